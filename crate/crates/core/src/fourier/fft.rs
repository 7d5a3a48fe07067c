//! Unnormalized and centred FFTs.
//!
//! With `std` the transforms are delegated to `rustfft`; without it a
//! radix-2 / Bluestein implementation is used. Both compute
//! `X_k = Σ_n x_n e^{∓2πi nk/N}` without scaling.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

#[derive(Clone)]
pub struct Fft {
    n: usize,
    #[cfg(feature = "std")]
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    #[cfg(feature = "std")]
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl fmt::Debug for Fft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft").field("n", &self.n).finish()
    }
}

impl Fft {
    /// Plans a transform of length `n ≥ 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "FFT length must be positive");
        #[cfg(feature = "std")]
        {
            let mut planner = rustfft::FftPlanner::<f64>::new();
            Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
        }
        #[cfg(not(feature = "std"))]
        {
            Self { n }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X_k = Σ x_n e^{-2πi nk/N}` in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        #[cfg(feature = "std")]
        self.fwd.process(buf);
        #[cfg(not(feature = "std"))]
        fallback::transform(buf, false);
    }

    /// `x_n = Σ X_k e^{+2πi nk/N}` in place (no `1/N`).
    pub fn backward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        #[cfg(feature = "std")]
        self.inv.process(buf);
        #[cfg(not(feature = "std"))]
        fallback::transform(buf, true);
    }

    /// Centred forward transform: `X_k = Σ_n v_n e^{-2πi (n-c)(k-c)/N}`, `c = N/2`.
    pub fn forward_centered(&self, buf: &mut [Complex64]) {
        let c = self.n / 2;
        buf.rotate_left(c);
        self.forward(buf);
        buf.rotate_right(c);
    }

    /// Inverse of [`Fft::forward_centered`], including the `1/N` factor.
    pub fn inverse_centered(&self, buf: &mut [Complex64]) {
        let c = self.n / 2;
        buf.rotate_left(c);
        self.backward(buf);
        buf.rotate_right(c);
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }
}

/// Centred forward DFT of a vector.
pub fn fft1_centered(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    if !out.is_empty() {
        Fft::new(out.len()).forward_centered(&mut out);
    }
    out
}

/// Inverse of [`fft1_centered`] (divides by `M`).
pub fn ifft1_centered(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    if !out.is_empty() {
        Fft::new(out.len()).inverse_centered(&mut out);
    }
    out
}

/// Applies `op` to every row and then every column of a row-major `nx × ny` buffer.
pub(crate) fn apply_2d(
    buf: &mut [Complex64],
    nx: usize,
    ny: usize,
    row: &Fft,
    col: &Fft,
    op: impl Fn(&Fft, &mut [Complex64]),
) {
    debug_assert_eq!(buf.len(), nx * ny);
    for r in buf.chunks_exact_mut(nx) {
        op(row, r);
    }
    let mut column = alloc::vec![Complex64::new(0.0, 0.0); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            column[iy] = buf[iy * nx + ix];
        }
        op(col, &mut column);
        for iy in 0..ny {
            buf[iy * nx + ix] = column[iy];
        }
    }
}

/// Centred 2D forward DFT of a row-major `nx × ny` buffer.
pub fn fft2_centered(buf: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = buf.to_vec();
    let (row, col) = (Fft::new(nx), Fft::new(ny));
    apply_2d(&mut out, nx, ny, &row, &col, |f, v| f.forward_centered(v));
    out
}

/// Inverse of [`fft2_centered`].
pub fn ifft2_centered(buf: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = buf.to_vec();
    let (row, col) = (Fft::new(nx), Fft::new(ny));
    apply_2d(&mut out, nx, ny, &row, &col, |f, v| f.inverse_centered(v));
    out
}

#[cfg_attr(feature = "std", allow(dead_code))]
pub(crate) mod fallback {
    use alloc::vec;
    use num_complex::Complex64;

    use crate::math::{cis, PI, TAU};

    /// Unnormalized DFT in place; `inverse` selects the `+` exponent.
    pub fn transform(buf: &mut [Complex64], inverse: bool) {
        let n = buf.len();
        if n <= 1 {
            return;
        }
        if n.is_power_of_two() {
            radix2(buf, inverse);
        } else {
            bluestein(buf, inverse);
        }
    }

    fn radix2(buf: &mut [Complex64], inverse: bool) {
        let n = buf.len();
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let twiddles: vec::Vec<Complex64> = (0..half).map(|j| cis(sign * TAU * j as f64 / len as f64)).collect();
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let a = buf[start + j];
                    let b = buf[start + j + half] * twiddles[j];
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            len *= 2;
        }
    }

    fn bluestein(buf: &mut [Complex64], inverse: bool) {
        let n = buf.len();
        let m = (2 * n - 1).next_power_of_two();
        let sign = if inverse { 1.0 } else { -1.0 };
        // e^{±iπ j²/n}; reduce j² mod 2n to keep the phase small.
        let chirp: vec::Vec<Complex64> = (0..n)
            .map(|j| {
                let q = ((j as u128 * j as u128) % (2 * n as u128)) as f64;
                cis(sign * PI * q / n as f64)
            })
            .collect();
        let mut a = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            a[j] = buf[j] * chirp[j];
        }
        let mut b = vec![Complex64::new(0.0, 0.0); m];
        b[0] = chirp[0].conj();
        for j in 1..n {
            b[j] = chirp[j].conj();
            b[m - j] = chirp[j].conj();
        }
        radix2(&mut a, false);
        radix2(&mut b, false);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= *y;
        }
        radix2(&mut a, true);
        let scale = 1.0 / m as f64;
        for k in 0..n {
            buf[k] = a[k] * scale * chirp[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec;

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = Rng::new(seed);
        (0..n).map(|_| Complex64::new(rng.normal(), rng.normal())).collect()
    }

    fn centered_dft(v: &[Complex64]) -> Vec<Complex64> {
        let m = v.len();
        let c = (m / 2) as f64;
        (0..m)
            .map(|k| {
                v.iter()
                    .enumerate()
                    .map(|(n, x)| x * crate::math::cis(-crate::math::TAU * (n as f64 - c) * (k as f64 - c) / m as f64))
                    .sum()
            })
            .collect()
    }

    fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn centered_impulse_gives_ones() {
        for m in [1usize, 2, 7, 8, 64] {
            let mut v = vec![Complex64::new(0.0, 0.0); m];
            v[m / 2] = Complex64::new(1.0, 0.0);
            for z in fft1_centered(&v) {
                assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_concentrates_at_centre() {
        for m in [2usize, 5, 8, 64] {
            let out = fft1_centered(&vec![Complex64::new(1.0, 0.0); m]);
            for (k, z) in out.iter().enumerate() {
                let want = if k == m / 2 { m as f64 } else { 0.0 };
                assert!((z - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_direct_sum_and_round_trips() {
        for m in [8usize, 9, 12, 50, 64, 80] {
            let v = random_vec(m, m as u64);
            let fast = fft1_centered(&v);
            assert!(rel(&fast, &centered_dft(&v)) < 1e-12, "m = {m}");
            assert!(rel(&ifft1_centered(&fast), &v) < 1e-13);
        }
    }

    #[test]
    fn fallback_agrees_with_library_transform() {
        for n in [1usize, 2, 3, 16, 26, 50, 64, 80, 127, 128] {
            let v = random_vec(n, 100 + n as u64);
            for inverse in [false, true] {
                let mut a = v.clone();
                fallback::transform(&mut a, inverse);
                let mut b = v.clone();
                let plan = Fft::new(n);
                if inverse {
                    plan.backward(&mut b);
                } else {
                    plan.forward(&mut b);
                }
                assert!(rel(&a, &b) < 1e-12, "n = {n}, inverse = {inverse}");
            }
        }
    }

    #[test]
    fn two_dimensional_round_trip() {
        let v = random_vec(12 * 10, 5);
        let f = fft2_centered(&v, 12, 10);
        assert!(rel(&ifft2_centered(&f, 12, 10), &v) < 1e-13);
        let mut delta = vec![Complex64::new(0.0, 0.0); 8 * 8];
        delta[4 * 8 + 4] = Complex64::new(1.0, 0.0);
        assert!(fft2_centered(&delta, 8, 8).iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }
}
