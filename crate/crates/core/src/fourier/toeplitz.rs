//! Normal operator `AᴴA` of the direct radial forward via Toeplitz embedding.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::fft::{apply_2d, Fft};
use crate::error::{invalid, shape, Result};
use crate::image::GridSpec;
use crate::math::{self, cis, TAU};
use crate::trajectory::SpokeGeometry;

/// `Σ_{j=-M/2}^{M/2-1} e^{ijφ}`.
#[inline]
fn spoke_phase_sum(m: usize, phi: f64) -> Complex64 {
    let half = math::sin(0.5 * phi);
    if half.abs() < 1e-6 {
        let lo = -((m / 2) as i64);
        return (0..m as i64).map(|j| cis((lo + j) as f64 * phi)).sum();
    }
    cis(-0.5 * phi) * (math::sin(0.5 * m as f64 * phi) / half)
}

/// `x ↦ Σ_c conj(S_c)·Fᴴ F (S_c x)` for one set of spokes, where `F` is the
/// `Δ²`-scaled DTFT onto the spokes' k-locations.
///
/// The point-spread kernel `K(d) = Δ⁴·Σ_k e^{2πi k·d}` is embedded in a
/// `P × P` circulant with `P ≥ 2n-1` and applied by FFT.
#[derive(Debug, Clone)]
pub struct NormalOperator {
    n: usize,
    p: usize,
    kernel_hat: Vec<Complex64>,
    maps: Vec<Vec<Complex64>>,
    fft: Fft,
}

impl NormalOperator {
    pub fn new(grid: &GridSpec, geometry: &[SpokeGeometry], maps: Vec<Vec<Complex64>>) -> Result<Self> {
        grid.validate()?;
        if geometry.is_empty() {
            return Err(invalid!("normal operator needs at least one spoke"));
        }
        if maps.is_empty() || maps.iter().any(|m| m.len() != grid.len()) {
            return Err(shape!("coil maps do not match the {}x{} grid", grid.nx, grid.ny));
        }
        let n = grid.nx;
        let p = (2 * n - 1).next_power_of_two();
        let delta = grid.spacing();
        let d4 = delta * delta * delta * delta;
        let mut kernel = vec![Complex64::new(0.0, 0.0); p * p];
        let dirs: Vec<([f64; 2], usize, f64)> =
            geometry.iter().map(|g| (g.direction(), g.n_samples, TAU * g.delta_k * delta)).collect();
        let span = n as i64 - 1;
        for dy in -span..=span {
            for dx in -span..=span {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(d, m, scale) in &dirs {
                    let phi = scale * (dx as f64 * d[0] + dy as f64 * d[1]);
                    acc += spoke_phase_sum(m, phi);
                }
                let iy = dy.rem_euclid(p as i64) as usize;
                let ix = dx.rem_euclid(p as i64) as usize;
                kernel[iy * p + ix] = acc * d4;
            }
        }
        let fft = Fft::new(p);
        apply_2d(&mut kernel, p, p, &fft, &fft, |f, v| f.forward(v));
        Ok(Self { n, p, kernel_hat: kernel, maps, fft })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Applies the single-coil Toeplitz block to an `n × n` image in place.
    fn convolve(&self, z: &mut [Complex64], work: &mut [Complex64]) {
        let (n, p) = (self.n, self.p);
        work.fill(Complex64::new(0.0, 0.0));
        for iy in 0..n {
            work[iy * p..iy * p + n].copy_from_slice(&z[iy * n..(iy + 1) * n]);
        }
        apply_2d(work, p, p, &self.fft, &self.fft, |f, v| f.forward(v));
        for (w, k) in work.iter_mut().zip(&self.kernel_hat) {
            *w *= k;
        }
        apply_2d(work, p, p, &self.fft, &self.fft, |f, v| f.backward(v));
        let scale = 1.0 / (p * p) as f64;
        for iy in 0..n {
            for ix in 0..n {
                z[iy * n + ix] = work[iy * p + ix] * scale;
            }
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.len(), "image size mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        let mut z = vec![Complex64::new(0.0, 0.0); x.len()];
        let mut work = vec![Complex64::new(0.0, 0.0); self.p * self.p];
        for s in &self.maps {
            for ((zi, si), xi) in z.iter_mut().zip(s).zip(x) {
                *zi = si * xi;
            }
            self.convolve(&mut z, &mut work);
            for ((o, si), zi) in out.iter_mut().zip(s).zip(&z) {
                *o += si.conj() * zi;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::radial::{adjoint_radial, coil_images, forward_radial};
    use crate::image::ComplexImage;
    use crate::phantom::make_coil_maps;
    use crate::rng::Rng;
    use crate::trajectory::{golden_angle_geometry, SpokeSet};

    #[test]
    fn phase_sum_closed_form_matches_direct_sum() {
        for m in [2usize, 8, 26, 64] {
            for phi in [0.0, 1e-9, 0.3, -1.1, TAU, 2.0 * TAU + 1e-8, 3.7] {
                let lo = -((m / 2) as i64);
                let direct: Complex64 = (0..m as i64).map(|j| cis((lo + j) as f64 * phi)).sum();
                assert!((spoke_phase_sum(m, phi) - direct).norm() < 1e-9 * m as f64, "m {m} phi {phi}");
            }
        }
    }

    #[test]
    fn matches_forward_then_adjoint() {
        let grid = GridSpec::new(16, 256.0).unwrap();
        let coils = make_coil_maps(3, &grid, 8).unwrap();
        let geometry = golden_angle_geometry(7, 16, 256.0, 2.3e-3, 23.62814).unwrap();
        let mut rng = Rng::new(2);
        let data: Vec<Complex64> = (0..grid.len()).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
        let x = ComplexImage::from_vec(grid, data).unwrap();
        let y = forward_radial(&x, &coils, &geometry);
        let set = SpokeSet::new(geometry.clone(), 3, y, 2.3e-3).unwrap();
        let direct = adjoint_radial(&set, &[1.0; 16], &coils, &grid).unwrap();
        let op = NormalOperator::new(&grid, &geometry, coil_images(&coils, &grid)).unwrap();
        let fast = op.apply(&x.data);
        let num: f64 = fast.iter().zip(&direct.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = direct.data.iter().map(|b| b.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-11, "{}", (num / den).sqrt());
    }
}
