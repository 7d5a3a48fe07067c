//! Low-resolution GRASP, SVD factorization into spatial/temporal bases and
//! interpolation of those bases to the full grid and spoke times.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, shape, Result};
use crate::fourier::{coil_images, density_compensated_adjoint, NormalOperator};
use crate::image::{DynamicImage, GridSpec};
use crate::linalg;
use crate::math;
use crate::phantom::CoilMaps;
use crate::rng::Rng;
use crate::trajectory::{BinnedSpokeSet, SpokeSet};

/// Rank-`k` factorization `frame_τ = Σ_j spatial_j · temporal[τ, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    pub grid: GridSpec,
    pub rank: usize,
    /// `[pixel][j]`, row-major pixels.
    pub spatial: Vec<Complex64>,
    /// `[τ][j]`.
    pub temporal: Vec<Complex64>,
    pub frame_times: Vec<f64>,
}

impl SubspaceModel {
    pub fn validate(&self) -> Result<()> {
        let k = self.rank;
        if k == 0 {
            return Err(invalid!("subspace rank must be at least 1"));
        }
        if self.spatial.len() != self.grid.len() * k {
            return Err(shape!("spatial bases hold {} values for {} pixels x rank {k}", self.spatial.len(), self.grid.len()));
        }
        if self.temporal.len() != self.frame_times.len() * k {
            return Err(shape!(
                "temporal bases hold {} values for {} frames x rank {k}",
                self.temporal.len(),
                self.frame_times.len()
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    /// Basis map `j` as a row-major image.
    pub fn spatial_basis(&self, j: usize) -> Vec<Complex64> {
        self.spatial.iter().skip(j).step_by(self.rank).copied().collect()
    }

    /// Temporal curve `j` over all frames.
    pub fn temporal_basis(&self, j: usize) -> Vec<Complex64> {
        self.temporal.iter().skip(j).step_by(self.rank).copied().collect()
    }

    pub fn frame(&self, tau: usize) -> Vec<Complex64> {
        let k = self.rank;
        let coeffs = &self.temporal[tau * k..(tau + 1) * k];
        self.spatial.chunks_exact(k).map(|s| s.iter().zip(coeffs).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        let mut out = DynamicImage::zeros(self.grid, self.frame_times.clone());
        for tau in 0..self.n_frames() {
            out.frame_mut(tau).copy_from_slice(&self.frame(tau));
        }
        out
    }
}

/// Settings of the binned temporal-TV reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspConfig {
    pub iterations: usize,
    /// Temporal TV weight `λ`, relative to the data term normalized by `‖AᴴA‖`.
    pub tv_weight: f64,
    pub spokes_per_bin: usize,
    pub lowres_fraction: f64,
    pub power_iterations: usize,
    /// Conjugate-gradient steps per majorize-minimize iteration.
    pub inner_iterations: usize,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self { iterations: 100, tv_weight: 0.025, spokes_per_bin: 20, lowres_fraction: 1.0 / 2.56, power_iterations: 20, inner_iterations: 4 }
    }
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spokes_per_bin == 0 {
            return Err(invalid!("grasp.spokes_per_bin must be at least 1"));
        }
        if !(self.tv_weight >= 0.0 && self.tv_weight.is_finite()) {
            return Err(invalid!("grasp.tv_weight must be non-negative, got {}", self.tv_weight));
        }
        if !(self.lowres_fraction > 0.0 && self.lowres_fraction <= 1.0) {
            return Err(invalid!("grasp.lowres_fraction must lie in (0, 1], got {}", self.lowres_fraction));
        }
        if self.power_iterations == 0 {
            return Err(invalid!("grasp.power_iterations must be at least 1"));
        }
        if self.inner_iterations == 0 {
            return Err(invalid!("grasp.inner_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Keeps the central `round_even(M·fraction)` samples of every spoke.
pub fn crop_center(spokes: &SpokeSet, fraction: f64) -> Result<SpokeSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid!("crop fraction must lie in (0, 1], got {fraction}"));
    }
    let m = spokes.n_samples();
    let m_low = math::round_to_even(m as f64 * fraction).min(m);
    if m_low < 4 {
        return Err(invalid!("cropping {m} samples by {fraction} leaves {m_low} (< 4)"));
    }
    let start = m / 2 - m_low / 2;
    let mut samples = Vec::with_capacity(spokes.n_spokes() * spokes.n_coils * m_low);
    for i in 0..spokes.n_spokes() {
        for c in 0..spokes.n_coils {
            samples.extend_from_slice(&spokes.spoke(i, c)[start..start + m_low]);
        }
    }
    let geometry = spokes.geometry.iter().map(|g| crate::trajectory::SpokeGeometry { n_samples: m_low, ..*g }).collect();
    SpokeSet::new(geometry, spokes.n_coils, samples, spokes.tr)
}

/// Grid matched to a spoke set's k-space extent: `M·Δk·fov` pixels over `fov`.
pub fn matched_grid(spokes: &SpokeSet, fov: f64) -> Result<GridSpec> {
    let g = spokes.geometry.first().ok_or_else(|| invalid!("empty spoke set"))?;
    GridSpec::new(math::round_to_even(g.n_samples as f64 * g.delta_k * fov), fov)
}

/// Result of [`grasp_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct GraspOutput {
    pub image: DynamicImage,
    /// Objective before the first step and after every iteration.
    pub objective: Vec<f64>,
    /// Power-iteration estimate of `‖AᴴA‖`.
    pub lipschitz: f64,
}

const CHARBONNIER_EPS: f64 = 1e-7;

struct Bin {
    op: NormalOperator,
    rhs: Vec<Complex64>,
    y_norm2: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn tv_value(x: &[Vec<Complex64>]) -> f64 {
    let eps2 = CHARBONNIER_EPS * CHARBONNIER_EPS;
    x.windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| math::sqrt((b - a).norm_sqr() + eps2)).sum::<f64>())
        .sum()
}

/// Smoothed magnitudes `w = √(|x_{b+1} − x_b|² + ε²)` for every adjacent frame pair.
fn pair_weights(x: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    let eps2 = CHARBONNIER_EPS * CHARBONNIER_EPS;
    x.windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| math::sqrt((b - a).norm_sqr() + eps2)).collect())
        .collect()
}

/// `out += λ·Σ_pairs (v_b − v_{b±1}) / w`, the Hessian of the TV majorizer applied to `v`.
fn add_weighted_laplacian(out: &mut [Vec<Complex64>], v: &[Vec<Complex64>], weights: &[Vec<f64>], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for (b, wb) in weights.iter().enumerate() {
        for (p, w) in wb.iter().enumerate() {
            let g = (v[b + 1][p] - v[b][p]) * (lambda / w);
            out[b + 1][p] += g;
            out[b][p] -= g;
        }
    }
}

/// `I + λ·Lap_w`: bounds the majorizer's Hessian from above (the data part
/// is at most the identity after normalization) and is tridiagonal in time
/// for every pixel, so it is inverted exactly by the Thomas algorithm.
struct TemporalPreconditioner {
    n_bins: usize,
    n_pix: usize,
    /// Sub/super-diagonal `-λ/w` per pair, `[pair][pixel]`.
    off: Vec<Vec<f64>>,
    /// Diagonal per frame, `[bin][pixel]`.
    diag: Vec<Vec<f64>>,
}

impl TemporalPreconditioner {
    fn new(weights: &[Vec<f64>], lambda: f64, n_bins: usize, n_pix: usize) -> Self {
        let mut diag = vec![vec![1.0; n_pix]; n_bins];
        let mut off = vec![vec![0.0; n_pix]; n_bins.saturating_sub(1)];
        for (b, wb) in weights.iter().enumerate() {
            for (p, w) in wb.iter().enumerate() {
                let c = lambda / w;
                diag[b][p] += c;
                diag[b + 1][p] += c;
                off[b][p] = -c;
            }
        }
        Self { n_bins, n_pix, off, diag }
    }

    fn solve(&self, rhs: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let (nb, np) = (self.n_bins, self.n_pix);
        let mut out = vec![vec![Complex64::new(0.0, 0.0); np]; nb];
        let mut c_prime = vec![0.0; nb];
        let mut d_prime = vec![Complex64::new(0.0, 0.0); nb];
        for p in 0..np {
            for b in 0..nb {
                let lower = if b > 0 { self.off[b - 1][p] } else { 0.0 };
                let upper = if b + 1 < nb { self.off[b][p] } else { 0.0 };
                let denom = self.diag[b][p] - if b > 0 { lower * c_prime[b - 1] } else { 0.0 };
                c_prime[b] = upper / denom;
                let prev = if b > 0 { d_prime[b - 1] * lower } else { Complex64::new(0.0, 0.0) };
                d_prime[b] = (rhs[b][p] - prev) / denom;
            }
            out[nb - 1][p] = d_prime[nb - 1];
            for b in (0..nb - 1).rev() {
                out[b][p] = d_prime[b] - out[b + 1][p] * c_prime[b];
            }
        }
        out
    }
}

/// Binned reconstruction with Charbonnier-smoothed temporal TV.
///
/// Minimizes `(1/2L)·Σ_b ‖A_b x_b − y_b‖² + λ·Σ_b Σ_r √(|x_{b+1} − x_b|² + ε²)`
/// where `L` is a power-iteration estimate of `‖AᴴA‖`. Each iteration replaces
/// every Charbonnier term by its quadratic majorizer at the current iterate
/// (`|d|²/2w + w/2`) and takes `inner_iterations` preconditioned
/// conjugate-gradient steps on that quadratic, starting from the current
/// iterate. Every such step lowers the majorizer, so the objective never
/// increases. Starts from the density-compensated adjoint.
pub fn grasp_solve(
    spokes: &SpokeSet,
    bins: &BinnedSpokeSet,
    coils: &CoilMaps,
    grid: &GridSpec,
    cfg: &GraspConfig,
) -> Result<GraspOutput> {
    cfg.validate()?;
    grid.validate()?;
    if bins.bins.is_empty() {
        return Err(invalid!("no bins to reconstruct"));
    }
    if coils.n_coils() != spokes.n_coils {
        return Err(shape!("{} coil maps for {} coils", coils.n_coils(), spokes.n_coils));
    }
    let maps = coil_images(coils, grid);
    let n_pix = grid.len();
    let prepared = crate::par::try_map_indexed(bins.bins.len(), |b| -> Result<(Bin, Vec<Complex64>)> {
        let members: Vec<usize> = bins.bins[b].members.clone().collect();
        let subset = spokes.select(&members);
        let ones = vec![1.0; subset.n_samples()];
        let rhs = crate::fourier::adjoint_radial_with_maps(&subset, &ones, &maps, grid)?.data;
        let x0 = density_compensated_adjoint(&subset, &maps, grid)?.data;
        let y_norm2 = subset.samples.iter().map(|z| z.norm_sqr()).sum();
        let op = NormalOperator::new(grid, &subset.geometry, maps.clone())?;
        Ok((Bin { op, rhs, y_norm2 }, x0))
    })?;
    let (ops, mut x): (Vec<Bin>, Vec<Vec<Complex64>>) = prepared.into_iter().unzip();
    let n_bins = ops.len();
    let apply_all = |v: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> { crate::par::map_indexed(n_bins, |b| ops[b].op.apply(&v[b])) };

    // Largest eigenvalue of the block-diagonal normal operator.
    let mut rng = Rng::with_stream(0x6A5F, 1);
    let mut v: Vec<Vec<Complex64>> =
        (0..n_bins).map(|_| (0..n_pix).map(|_| Complex64::new(rng.normal(), rng.normal())).collect()).collect();
    let mut lipschitz = 0.0;
    for _ in 0..cfg.power_iterations {
        let norm = math::sqrt(v.iter().flatten().map(|z| z.norm_sqr()).sum());
        for z in v.iter_mut().flatten() {
            *z /= norm;
        }
        let w = apply_all(&v);
        lipschitz = math::sqrt(w.iter().flatten().map(|z| z.norm_sqr()).sum());
        v = w;
    }
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(crate::Error::Numeric(alloc::format!("power iteration gave a non-finite norm estimate {lipschitz}")));
    }

    let inv_l = 1.0 / lipschitz;
    let lambda = cfg.tv_weight;
    let y_total: f64 = ops.iter().map(|b| b.y_norm2).sum();
    // q_b(x) = ⟨x, N x⟩ − 2 Re⟨x, r⟩; data = (q + ‖y‖²) / 2L.
    let data_value = |x: &[Vec<Complex64>], nx: &[Vec<Complex64>]| -> f64 {
        let q: f64 = (0..n_bins).map(|b| dot(&x[b], &nx[b]).re - 2.0 * dot(&x[b], &ops[b].rhs).re).sum();
        0.5 * inv_l * (q + y_total)
    };
    let mut nx = apply_all(&x);
    let mut objective = Vec::with_capacity(cfg.iterations + 1);
    let mut current = data_value(&x, &nx) + lambda * tv_value(&x);
    objective.push(current);

    for _ in 0..cfg.iterations {
        let weights = pair_weights(&x);
        // Gradient of the objective, equal to that of the majorizer at x.
        let mut grad: Vec<Vec<Complex64>> = (0..n_bins)
            .map(|b| nx[b].iter().zip(&ops[b].rhs).map(|(a, r)| (a - r) * inv_l).collect())
            .collect();
        add_weighted_laplacian(&mut grad, &x, &weights, lambda);
        // Preconditioned CG on the majorizer, started at x: every step lowers it.
        let mut resid: Vec<Vec<Complex64>> = grad.iter().map(|g| g.iter().map(|v| -v).collect()).collect();
        let mut delta = vec![vec![Complex64::new(0.0, 0.0); n_pix]; n_bins];
        let mut n_delta = vec![vec![Complex64::new(0.0, 0.0); n_pix]; n_bins];
        let precond = TemporalPreconditioner::new(&weights, lambda, n_bins, n_pix);
        let mut z = precond.solve(&resid);
        let mut dir = z.clone();
        let mut rz: f64 = (0..n_bins).map(|b| dot(&resid[b], &z[b]).re).sum();
        for _ in 0..cfg.inner_iterations {
            if !(rz > 0.0) {
                break;
            }
            let n_dir = apply_all(&dir);
            let mut h_dir: Vec<Vec<Complex64>> =
                n_dir.iter().map(|v| v.iter().map(|a| a * inv_l).collect()).collect();
            add_weighted_laplacian(&mut h_dir, &dir, &weights, lambda);
            let curvature: f64 = (0..n_bins).map(|b| dot(&dir[b], &h_dir[b]).re).sum();
            if !(curvature > 0.0) {
                break;
            }
            let alpha = rz / curvature;
            for b in 0..n_bins {
                for p in 0..n_pix {
                    delta[b][p] += dir[b][p] * alpha;
                    n_delta[b][p] += n_dir[b][p] * alpha;
                    resid[b][p] -= h_dir[b][p] * alpha;
                }
            }
            z = precond.solve(&resid);
            let rz_next: f64 = (0..n_bins).map(|b| dot(&resid[b], &z[b]).re).sum();
            let beta = rz_next / rz;
            rz = rz_next;
            for b in 0..n_bins {
                for p in 0..n_pix {
                    dir[b][p] = z[b][p] + dir[b][p] * beta;
                }
            }
        }
        let trial: Vec<Vec<Complex64>> =
            x.iter().zip(&delta).map(|(xb, db)| xb.iter().zip(db).map(|(a, d)| a + d).collect()).collect();
        let n_trial: Vec<Vec<Complex64>> =
            nx.iter().zip(&n_delta).map(|(xb, db)| xb.iter().zip(db).map(|(a, d)| a + d).collect()).collect();
        let value = data_value(&trial, &n_trial) + lambda * tv_value(&trial);
        if !value.is_finite() {
            return Err(crate::Error::Numeric("GRASP objective became non-finite".into()));
        }
        // The majorizer guarantees descent; rounding can still tie or flip the last digit.
        if value <= current {
            x = trial;
            nx = n_trial;
            current = value;
        }
        objective.push(current);
    }

    let mut image = DynamicImage::zeros(*grid, bins.center_times());
    for (b, xb) in x.iter().enumerate() {
        image.frame_mut(b).copy_from_slice(xb);
    }
    Ok(GraspOutput { image, objective, lipschitz })
}

/// [`grasp_solve`] returning only the frames.
pub fn grasp_reconstruct(
    spokes: &SpokeSet,
    bins: &BinnedSpokeSet,
    coils: &CoilMaps,
    grid: &GridSpec,
    cfg: &GraspConfig,
) -> Result<DynamicImage> {
    Ok(grasp_solve(spokes, bins, coils, grid, cfg)?.image)
}

/// Truncated SVD of the Casorati matrix `[pixels × frames]`.
///
/// Singular values are absorbed into the spatial bases; temporal bases are
/// the conjugated right singular vectors and are orthonormal.
pub fn svd_subspace(dynamic: &DynamicImage, k: usize) -> Result<SubspaceModel> {
    let n_pix = dynamic.grid.len();
    let t = dynamic.n_frames();
    if k == 0 || k > n_pix.min(t) {
        return Err(invalid!("rank {k} outside 1..={} for a {n_pix}x{t} Casorati matrix", n_pix.min(t)));
    }
    // Frame-major storage is the column-major Casorati matrix.
    let d = linalg::svd(&dynamic.data, n_pix, t)?;
    let mut spatial = vec![Complex64::new(0.0, 0.0); n_pix * k];
    let mut temporal = vec![Complex64::new(0.0, 0.0); t * k];
    for j in 0..k {
        for (p, u) in d.u_col(j).iter().enumerate() {
            spatial[p * k + j] = u * d.s[j];
        }
        for (tau, v) in d.v_col(j).iter().enumerate() {
            temporal[tau * k + j] = v.conj();
        }
    }
    Ok(SubspaceModel { grid: dynamic.grid, rank: k, spatial, temporal, frame_times: dynamic.frame_times.clone() })
}

/// Bilinear weights for a clamped fractional index on `n` nodes.
#[inline]
fn bracket(f: f64, n: usize) -> (usize, usize, f64) {
    let f = f.clamp(0.0, (n - 1) as f64);
    let i0 = (math::floor(f) as usize).min(n - 1);
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, f - i0 as f64)
}

/// Resamples the bases onto `grid` (bilinear in physical coordinates, edge
/// values held) and onto `times` (linear between the model's frame times,
/// held constant beyond the first and last).
pub fn interpolate_bases(model: &SubspaceModel, grid: &GridSpec, times: &[f64]) -> Result<SubspaceModel> {
    model.validate()?;
    grid.validate()?;
    if times.iter().any(|t| !t.is_finite()) {
        return Err(invalid!("target times must be finite"));
    }
    let k = model.rank;
    let src = model.grid;
    let ds = src.spacing();
    let mut spatial = Vec::with_capacity(grid.len() * k);
    for iy in 0..grid.ny {
        let (y0, y1, wy) = bracket(grid.y(iy) / ds + (src.ny / 2) as f64, src.ny);
        for ix in 0..grid.nx {
            let (x0, x1, wx) = bracket(grid.x(ix) / ds + (src.nx / 2) as f64, src.nx);
            for j in 0..k {
                let at = |x: usize, y: usize| model.spatial[(y * src.nx + x) * k + j];
                let top = at(x0, y0) * (1.0 - wx) + at(x1, y0) * wx;
                let bottom = at(x0, y1) * (1.0 - wx) + at(x1, y1) * wx;
                spatial.push(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    let nodes = &model.frame_times;
    let mut temporal = Vec::with_capacity(times.len() * k);
    for &t in times {
        let row = |tau: usize| &model.temporal[tau * k..(tau + 1) * k];
        if nodes.len() == 1 || t <= nodes[0] {
            temporal.extend_from_slice(row(0));
        } else if t >= nodes[nodes.len() - 1] {
            temporal.extend_from_slice(row(nodes.len() - 1));
        } else {
            let hi = nodes.partition_point(|&n| n <= t);
            let lo = hi - 1;
            let w = (t - nodes[lo]) / (nodes[hi] - nodes[lo]);
            temporal.extend(row(lo).iter().zip(row(hi)).map(|(a, b)| a * (1.0 - w) + b * w));
        }
    }
    Ok(SubspaceModel { grid: *grid, rank: k, spatial, temporal, frame_times: times.to_vec() })
}
