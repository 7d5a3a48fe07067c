//! Centred FFTs, the Fourier-slice spoke operator, the brute-force DTFT and
//! the direct radial adjoint.

mod fft;
mod radial;
mod slice;
mod toeplitz;

pub use fft::{fft1_centered, fft2_centered, ifft1_centered, ifft2_centered, Fft};
pub use radial::{adjoint_radial, coil_images, density_compensated_adjoint, dtft_oracle, forward_radial};
pub use slice::{
    fourier_slice_forward, fourier_slice_forward_with, CoilWeightedPhantom, FnImage, LatticePoint, SamplableImage,
    SliceLattice, DEFAULT_LATTICE_OVERSAMPLING,
};
pub use toeplitz::NormalOperator;
pub(crate) use radial::adjoint_radial_with_maps;
