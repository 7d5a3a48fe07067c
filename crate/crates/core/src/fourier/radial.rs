//! Direct (non-gridded) radial Fourier operators on a Cartesian image.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, shape, Result};
use crate::image::{ComplexImage, GridSpec};
use crate::math::{cis, TAU};
use crate::phantom::CoilMaps;
use crate::trajectory::{SpokeGeometry, SpokeSet};

/// Separable phase factors `e^{sign·2πi k·r}` for the pixel centres of `grid`.
#[inline]
fn phase_factors(grid: &GridSpec, k: [f64; 2], sign: f64, ex: &mut [Complex64], ey: &mut [Complex64]) {
    for (ix, e) in ex.iter_mut().enumerate() {
        *e = cis(sign * TAU * k[0] * grid.x(ix));
    }
    for (iy, e) in ey.iter_mut().enumerate() {
        *e = cis(sign * TAU * k[1] * grid.y(iy));
    }
}

#[inline]
fn dtft_point(data: &[Complex64], nx: usize, ex: &[Complex64], ey: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (row, e) in data.chunks_exact(nx).zip(ey) {
        let mut r = Complex64::new(0.0, 0.0);
        for (v, w) in row.iter().zip(ex) {
            r += v * w;
        }
        acc += r * e;
    }
    acc
}

/// `y(k) = Δ²·Σ_pixels img(r)·e^{-2πi k·r}` by brute force.
pub fn dtft_oracle(img: &ComplexImage, k_points: &[[f64; 2]]) -> Vec<Complex64> {
    let grid = img.grid;
    let d2 = grid.spacing() * grid.spacing();
    let mut ex = vec![Complex64::new(0.0, 0.0); grid.nx];
    let mut ey = vec![Complex64::new(0.0, 0.0); grid.ny];
    k_points
        .iter()
        .map(|&k| {
            phase_factors(&grid, k, -1.0, &mut ex, &mut ey);
            dtft_point(&img.data, grid.nx, &ex, &ey) * d2
        })
        .collect()
}

/// Coil sensitivities at the pixel centres of `grid`, `[coil][pixel]`.
pub fn coil_images(coils: &CoilMaps, grid: &GridSpec) -> Vec<Vec<Complex64>> {
    coils.rasterize(grid).maps
}

/// Multicoil radial forward operator, `[spoke][coil][sample]`.
pub fn forward_radial(img: &ComplexImage, coils: &CoilMaps, geometry: &[SpokeGeometry]) -> Vec<Complex64> {
    let grid = img.grid;
    let weighted: Vec<Vec<Complex64>> = coil_images(coils, &grid)
        .into_iter()
        .map(|s| s.iter().zip(&img.data).map(|(a, b)| a * b).collect())
        .collect();
    let d2 = grid.spacing() * grid.spacing();
    let per_spoke = crate::par::map_indexed(geometry.len(), |i| {
        let g = &geometry[i];
        let ks = g.k_points();
        let mut out = vec![Complex64::new(0.0, 0.0); weighted.len() * ks.len()];
        let mut ex = vec![Complex64::new(0.0, 0.0); grid.nx];
        let mut ey = vec![Complex64::new(0.0, 0.0); grid.ny];
        for (m, &k) in ks.iter().enumerate() {
            phase_factors(&grid, k, -1.0, &mut ex, &mut ey);
            for (c, w) in weighted.iter().enumerate() {
                out[c * ks.len() + m] = dtft_point(w, grid.nx, &ex, &ey) * d2;
            }
        }
        out
    });
    per_spoke.concat()
}

/// Exact adjoint of [`forward_radial`] applied to density-weighted data:
/// `x(r) = Δ²·Σ_c conj(S_c(r))·Σ d_m·y·e^{+2πi k·r}`.
pub fn adjoint_radial(spokes: &SpokeSet, dcf: &[f64], coils: &CoilMaps, grid: &GridSpec) -> Result<ComplexImage> {
    let maps = coil_images(coils, grid);
    adjoint_radial_with_maps(spokes, dcf, &maps, grid)
}

pub(crate) fn adjoint_radial_with_maps(
    spokes: &SpokeSet,
    dcf: &[f64],
    maps: &[Vec<Complex64>],
    grid: &GridSpec,
) -> Result<ComplexImage> {
    grid.validate()?;
    if spokes.n_spokes() == 0 {
        return Err(invalid!("adjoint of an empty spoke set"));
    }
    let m = spokes.n_samples();
    if dcf.len() != m {
        return Err(shape!("{} density weights for readout length {m}", dcf.len()));
    }
    if maps.len() != spokes.n_coils {
        return Err(shape!("{} coil maps for {} coils", maps.len(), spokes.n_coils));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let mut acc = vec![vec![Complex64::new(0.0, 0.0); nx * ny]; spokes.n_coils];
    let mut ex = vec![Complex64::new(0.0, 0.0); nx];
    let mut ey = vec![Complex64::new(0.0, 0.0); ny];
    let mut row = vec![Complex64::new(0.0, 0.0); ny];
    for (i, g) in spokes.geometry.iter().enumerate() {
        for (mi, k) in g.k_points().into_iter().enumerate() {
            phase_factors(grid, k, 1.0, &mut ex, &mut ey);
            for (c, a) in acc.iter_mut().enumerate() {
                let v = spokes.spoke(i, c)[mi] * dcf[mi];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (r, e) in row.iter_mut().zip(&ey) {
                    *r = v * e;
                }
                for (chunk, r) in a.chunks_exact_mut(nx).zip(&row) {
                    for (p, w) in chunk.iter_mut().zip(&ex) {
                        *p += r * w;
                    }
                }
            }
        }
    }
    let d2 = grid.spacing() * grid.spacing();
    let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
    for (a, s) in acc.iter().zip(maps) {
        for ((o, v), sv) in out.iter_mut().zip(a).zip(s) {
            *o += sv.conj() * v;
        }
    }
    for o in &mut out {
        *o *= d2;
    }
    ComplexImage::from_vec(*grid, out)
}

/// Density-compensated, coil-combined direct reconstruction of one set of spokes:
/// `x = Σ_c conj(S_c)·Σ w_m·y·e^{+2πi k·r} / Σ_c |S_c|²` with the polar area
/// weights `w_m = (π/N)·Δk²·max(|m - M/2|, ½)`.
pub fn density_compensated_adjoint(spokes: &SpokeSet, maps: &[Vec<Complex64>], grid: &GridSpec) -> Result<ComplexImage> {
    if spokes.n_spokes() == 0 {
        return Err(invalid!("reconstruction of an empty spoke set"));
    }
    let m = spokes.n_samples();
    let raw = crate::trajectory::density_compensation_unnormalized(m)?;
    let dk = spokes.geometry[0].delta_k;
    let d2 = grid.spacing() * grid.spacing();
    let scale = crate::math::PI / spokes.n_spokes() as f64 * dk * dk / d2;
    let weights: Vec<f64> = raw.iter().map(|w| w * scale).collect();
    let mut img = adjoint_radial_with_maps(spokes, &weights, maps, grid)?;
    for (p, v) in img.data.iter_mut().enumerate() {
        let ss: f64 = maps.iter().map(|s| s[p].norm_sqr()).sum();
        *v = if ss > 0.0 { *v / ss } else { Complex64::new(0.0, 0.0) };
    }
    Ok(img)
}
