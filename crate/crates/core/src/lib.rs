//! Subspace coordinate-network reconstruction for radially sampled dynamic MRI.
//!
//! The dynamic image is factorized into `k` spatial basis maps and `k`
//! temporal basis curves, each represented by a small hash-grid encoded MLP.
//! Both networks are fitted directly to individual radial k-space spokes
//! through the Fourier slice theorem: the spatial network is sampled on a
//! lattice rotated to the spoke angle, projected perpendicular to the spoke,
//! and transformed with a 1D FFT. No binning or gridding happens inside the
//! training loop.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is pure computation; file formats, configuration
//! and the command-line front end live in the `spokenet` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod fourier;
pub mod image;
pub mod inr;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod recon;
pub mod rng;
pub mod subspace;
pub mod trajectory;

pub use error::{Error, Result};
pub use image::{ComplexImage, DynamicImage, GridSpec};
pub use num_complex::Complex64;
