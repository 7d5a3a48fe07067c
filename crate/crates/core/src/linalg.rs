//! Complex singular value decomposition by one-sided Jacobi rotations.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{shape, Result};
use crate::math;

/// `A = U·diag(s)·Vᴴ` with singular values in descending order.
///
/// Matrices are column-major. `u` is `rows × r`, `v` is `cols × r` with
/// `r = min(rows, cols)`. Columns of `u` belonging to zero singular values
/// are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub rows: usize,
    pub cols: usize,
    pub u: Vec<Complex64>,
    pub s: Vec<f64>,
    pub v: Vec<Complex64>,
}

impl Svd {
    #[inline]
    pub fn rank_bound(&self) -> usize {
        self.s.len()
    }

    #[inline]
    pub fn u_col(&self, j: usize) -> &[Complex64] {
        &self.u[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn v_col(&self, j: usize) -> &[Complex64] {
        &self.v[j * self.cols..(j + 1) * self.cols]
    }
}

const MAX_SWEEPS: usize = 80;

/// Orthogonalizes the columns of `a` (`rows × cols`, column-major, `rows ≥ cols`).
/// Returns the rotated columns `A·V` and `V`.
fn one_sided_jacobi(mut a: Vec<Complex64>, rows: usize, cols: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut v = vec![Complex64::new(0.0, 0.0); cols * cols];
    for j in 0..cols {
        v[j * cols + j] = Complex64::new(1.0, 0.0);
    }
    let tol = f64::EPSILON * rows as f64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (ap, aq) = (&a[p * rows..(p + 1) * rows], &a[q * rows..(q + 1) * rows]);
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::new(0.0, 0.0);
                for (x, y) in ap.iter().zip(aq) {
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= tol * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_columns(&mut a, rows, p, q, c, s, phase);
                rotate_columns(&mut v, cols, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

#[inline]
fn rotate_columns(m: &mut [Complex64], len: usize, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let (head, tail) = m.split_at_mut(q * len);
    let cp = &mut head[p * len..(p + 1) * len];
    let cq = &mut tail[..len];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let b = *y * phase;
        let xp = *x * c - b * s;
        *y = *x * s + b * c;
        *x = xp;
    }
}

/// Thin SVD of a `rows × cols` column-major complex matrix.
pub fn svd(a: &[Complex64], rows: usize, cols: usize) -> Result<Svd> {
    if a.len() != rows * cols {
        return Err(shape!("{} entries for a {rows}x{cols} matrix", a.len()));
    }
    if rows == 0 || cols == 0 {
        return Err(shape!("empty {rows}x{cols} matrix"));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(crate::Error::NonFinite("SVD input".into()));
    }
    if rows < cols {
        // A = (Aᴴ)ᴴ: factor the conjugate transpose and swap the roles of U and V.
        let mut ah = vec![Complex64::new(0.0, 0.0); rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                ah[i * cols + j] = a[j * rows + i].conj();
            }
        }
        let t = svd(&ah, cols, rows)?;
        return Ok(Svd { rows, cols, u: t.v, s: t.s, v: t.u });
    }
    let (av, v) = one_sided_jacobi(a.to_vec(), rows, cols);
    let norms: Vec<f64> =
        (0..cols).map(|j| math::sqrt(av[j * rows..(j + 1) * rows].iter().map(|z| z.norm_sqr()).sum())).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut u = Vec::with_capacity(rows * cols);
    let mut vs = Vec::with_capacity(cols * cols);
    let mut s = Vec::with_capacity(cols);
    for &j in &order {
        let sigma = norms[j];
        s.push(sigma);
        let col = &av[j * rows..(j + 1) * rows];
        if sigma > 0.0 {
            u.extend(col.iter().map(|z| z / sigma));
        } else {
            u.extend(core::iter::repeat_n(Complex64::new(0.0, 0.0), rows));
        }
        vs.extend_from_slice(&v[j * cols..(j + 1) * cols]);
    }
    Ok(Svd { rows, cols, u, s, v: vs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = Rng::new(seed);
        (0..rows * cols).map(|_| Complex64::new(rng.normal(), rng.normal())).collect()
    }

    fn reconstruct(d: &Svd) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); d.rows * d.cols];
        for k in 0..d.rank_bound() {
            for j in 0..d.cols {
                let w = d.s[k] * d.v_col(k)[j].conj();
                for i in 0..d.rows {
                    out[j * d.rows + i] += d.u_col(k)[i] * w;
                }
            }
        }
        out
    }

    fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        math::sqrt(num / den)
    }

    #[test]
    fn reconstructs_tall_and_wide_matrices() {
        for (r, c) in [(30, 7), (7, 30), (12, 12), (1, 5), (5, 1)] {
            let a = random(r, c, (r * 100 + c) as u64);
            let d = svd(&a, r, c).unwrap();
            assert!(rel(&reconstruct(&d), &a) < 1e-13, "{r}x{c}");
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn factors_are_orthonormal() {
        let d = svd(&random(40, 9, 1), 40, 9).unwrap();
        for p in 0..9 {
            for q in 0..9 {
                let uu: Complex64 = d.u_col(p).iter().zip(d.u_col(q)).map(|(a, b)| a.conj() * b).sum();
                let vv: Complex64 = d.v_col(p).iter().zip(d.v_col(q)).map(|(a, b)| a.conj() * b).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((uu - want).norm() < 1e-12);
                assert!((vv - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn handles_rank_deficiency_and_rejects_bad_shapes() {
        let mut a = random(10, 4, 3);
        for i in 0..10 {
            a[30 + i] = a[i] * Complex64::new(0.0, 2.0);
            a[20 + i] = Complex64::new(0.0, 0.0);
        }
        let d = svd(&a, 10, 4).unwrap();
        assert!(d.s[3] < 1e-12 && d.s[2] < 1e-12);
        assert!(rel(&reconstruct(&d), &a) < 1e-13);
        assert!(svd(&a, 10, 3).is_err());
        assert!(svd(&[], 0, 0).is_err());
    }
}
