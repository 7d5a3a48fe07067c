//! Reference-free image metrics (SNR, edge sharpness), ground-truth metrics
//! (NRMSE, PSNR) and x–t profiles.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape, Result};
use crate::image::{DynamicImage, GridSpec};
use crate::math;
use crate::phantom::PhantomSpec;

/// Rectangular pixel patch `[x0, x0 + w) × [y0, y0 + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Roi {
    /// A `size × size` patch centred on the pixel nearest to `p` (mm), clipped to the grid.
    pub fn centered(grid: &GridSpec, p: [f64; 2], size: usize) -> Result<Self> {
        if size == 0 || size > grid.nx.min(grid.ny) {
            return Err(invalid!("ROI size {size} does not fit a {}x{} grid", grid.nx, grid.ny));
        }
        let (ix, iy) = nearest_pixel(grid, p);
        let half = size / 2;
        let x0 = ix.saturating_sub(half).min(grid.nx - size);
        let y0 = iy.saturating_sub(half).min(grid.ny - size);
        Ok(Self { x0, y0, w: size, h: size })
    }

    fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    fn overlaps(&self, o: &Roi) -> bool {
        self.x0 < o.x0 + o.w && o.x0 < self.x0 + self.w && self.y0 < o.y0 + o.h && o.y0 < self.y0 + self.h
    }

    fn mean(&self, image: &[f64], nx: usize, ny: usize) -> Result<f64> {
        if self.x0 + self.w > nx || self.y0 + self.h > ny {
            return Err(invalid!("ROI {self:?} exceeds the {nx}x{ny} image"));
        }
        let mut sum = 0.0;
        for iy in self.y0..self.y0 + self.h {
            sum += image[iy * nx + self.x0..iy * nx + self.x0 + self.w].iter().sum::<f64>();
        }
        Ok(sum / (self.w * self.h) as f64)
    }
}

/// Pixel whose centre is nearest to `p` (mm), clamped to the grid.
pub fn nearest_pixel(grid: &GridSpec, p: [f64; 2]) -> (usize, usize) {
    let d = grid.spacing();
    let ix = math::floor(p[0] / d + (grid.nx / 2) as f64 + 0.5).clamp(0.0, (grid.nx - 1) as f64) as usize;
    let iy = math::floor(p[1] / d + (grid.ny / 2) as f64 + 0.5).clamp(0.0, (grid.ny - 1) as f64) as usize;
    (ix, iy)
}

/// `10·log10(P_s / P_n)` with `P` the mean magnitude over each patch.
pub fn snr_db(magnitude: &[f64], grid: &GridSpec, signal: &Roi, noise: &Roi) -> Result<f64> {
    if magnitude.len() != grid.len() {
        return Err(shape!("{} magnitudes for a {}x{} grid", magnitude.len(), grid.nx, grid.ny));
    }
    if signal.is_empty() || noise.is_empty() {
        return Err(invalid!("SNR patches must be non-empty"));
    }
    if signal.overlaps(noise) {
        return Err(invalid!("signal and noise patches overlap"));
    }
    let ps = signal.mean(magnitude, grid.nx, grid.ny)?;
    let pn = noise.mean(magnitude, grid.nx, grid.ny)?;
    if pn == 0.0 {
        return Err(crate::Error::Numeric("noise patch has zero mean magnitude".into()));
    }
    Ok(10.0 * math::log10(ps / pn))
}

/// First position (in samples) where a rising profile reaches `level`.
fn first_crossing(p: &[f64], level: f64) -> Option<f64> {
    let i = p.iter().position(|&v| v >= level)?;
    if i == 0 {
        return None;
    }
    let (a, b) = (p[i - 1], p[i]);
    Some((i - 1) as f64 + (level - a) / (b - a))
}

/// Inverse distance (1/mm) between the 20 % and 80 % of maximum crossings.
///
/// Profiles falling from start to end are reversed first, so the result does
/// not depend on the direction the line was drawn in.
pub fn edge_sharpness(profile: &[f64], spacing: f64) -> Result<f64> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(invalid!("profile spacing must be positive, got {spacing}"));
    }
    if profile.len() < 2 || profile.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("profile needs at least two finite samples"));
    }
    let rising: Vec<f64> =
        if profile[0] <= profile[profile.len() - 1] { profile.to_vec() } else { profile.iter().rev().copied().collect() };
    let max = rising.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(invalid!("profile has no positive maximum"));
    }
    let lo = first_crossing(&rising, 0.2 * max).ok_or_else(|| invalid!("profile does not cross 20% of its maximum"))?;
    let hi = first_crossing(&rising, 0.8 * max).ok_or_else(|| invalid!("profile does not cross 80% of its maximum"))?;
    let span = (hi - lo).abs() * spacing;
    if span == 0.0 {
        return Err(invalid!("20% and 80% crossings coincide"));
    }
    Ok(1.0 / span)
}

/// NRMSE and PSNR of magnitudes; `psnr_db` is `+∞` for an exact match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    pub nrmse: f64,
    pub psnr_db: f64,
}

pub fn nrmse_psnr(recon: &DynamicImage, truth: &DynamicImage) -> Result<Fidelity> {
    if recon.grid != truth.grid || recon.n_frames() != truth.n_frames() {
        return Err(shape!(
            "reconstruction {}x{}x{} vs truth {}x{}x{}",
            recon.grid.nx,
            recon.grid.ny,
            recon.n_frames(),
            truth.grid.nx,
            truth.grid.ny,
            truth.n_frames()
        ));
    }
    if recon.frame_times.iter().zip(&truth.frame_times).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(shape!("reconstruction and truth frame times differ"));
    }
    let mut err = 0.0;
    let mut norm = 0.0;
    let mut peak: f64 = 0.0;
    for (r, t) in recon.data.iter().zip(&truth.data) {
        let (a, b) = (r.norm(), t.norm());
        err += (a - b) * (a - b);
        norm += b * b;
        peak = peak.max(b);
    }
    if norm == 0.0 {
        return Err(invalid!("ground truth is identically zero"));
    }
    let nrmse = math::sqrt(err / norm);
    let rmse = math::sqrt(err / recon.data.len() as f64);
    let psnr_db = if rmse == 0.0 { f64::INFINITY } else { 20.0 * math::log10(peak / rmse) };
    Ok(Fidelity { nrmse, psnr_db })
}

/// Magnitudes along one image row over time, stored `[x][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct XtProfile {
    pub nx: usize,
    pub n_frames: usize,
    pub data: Vec<f64>,
}

impl XtProfile {
    #[inline]
    pub fn at(&self, x: usize, t: usize) -> f64 {
        self.data[x * self.n_frames + t]
    }

    pub fn column(&self, x: usize) -> &[f64] {
        &self.data[x * self.n_frames..(x + 1) * self.n_frames]
    }

    /// Holds each binned frame over its member spokes: spoke `i` shows frame
    /// `min(i / spokes_per_bin, T - 1)`.
    pub fn hold(&self, spokes_per_bin: usize, n_spokes: usize) -> Result<XtProfile> {
        if spokes_per_bin == 0 || self.n_frames == 0 {
            return Err(invalid!("cannot hold an empty profile"));
        }
        let mut data = Vec::with_capacity(self.nx * n_spokes);
        for x in 0..self.nx {
            for i in 0..n_spokes {
                data.push(self.at(x, (i / spokes_per_bin).min(self.n_frames - 1)));
            }
        }
        Ok(XtProfile { nx: self.nx, n_frames: n_spokes, data })
    }
}

/// Row `y_index` of every frame, as magnitudes.
pub fn xt_profile(dynamic: &DynamicImage, y_index: usize) -> Result<XtProfile> {
    let grid = dynamic.grid;
    if y_index >= grid.ny {
        return Err(invalid!("row {y_index} outside 0..{}", grid.ny));
    }
    let t = dynamic.n_frames();
    let mut data = vec![0.0; grid.nx * t];
    for tau in 0..t {
        let row = &dynamic.frame(tau)[y_index * grid.nx..(y_index + 1) * grid.nx];
        for (x, z) in row.iter().enumerate() {
            data[x * t + tau] = z.norm();
        }
    }
    Ok(XtProfile { nx: grid.nx, n_frames: t, data })
}

/// Columns whose temporal standard deviation exceeds `fraction` of the largest one.
pub fn moving_columns(truth: &XtProfile, fraction: f64) -> Vec<usize> {
    let stds: Vec<f64> = (0..truth.nx)
        .map(|x| {
            let c = truth.column(x);
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            math::sqrt(c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c.len() as f64)
        })
        .collect();
    let max = stds.iter().cloned().fold(0.0, f64::max);
    (0..truth.nx).filter(|&x| max > 0.0 && stds[x] > fraction * max).collect()
}

/// Root-mean-square difference over the given columns and all frames.
pub fn xt_rmse(recon: &XtProfile, truth: &XtProfile, columns: &[usize]) -> Result<f64> {
    if recon.nx != truth.nx || recon.n_frames != truth.n_frames {
        return Err(shape!("x-t profiles {}x{} vs {}x{}", recon.nx, recon.n_frames, truth.nx, truth.n_frames));
    }
    if columns.is_empty() {
        return Err(invalid!("no columns to compare"));
    }
    let mut sum = 0.0;
    for &x in columns {
        for (a, b) in recon.column(x).iter().zip(truth.column(x)) {
            sum += (a - b) * (a - b);
        }
    }
    Ok(math::sqrt(sum / (columns.len() * truth.n_frames) as f64))
}

/// Samples a magnitude image bilinearly along a segment, returning the
/// profile and its sample spacing in mm.
pub fn line_profile(magnitude: &[f64], grid: &GridSpec, start: [f64; 2], end: [f64; 2], n: usize) -> Result<(Vec<f64>, f64)> {
    if n < 2 {
        return Err(invalid!("a line profile needs at least two samples"));
    }
    if magnitude.len() != grid.len() {
        return Err(shape!("{} magnitudes for a {}x{} grid", magnitude.len(), grid.nx, grid.ny));
    }
    let d = grid.spacing();
    let sample = |p: [f64; 2]| -> f64 {
        let fx = (p[0] / d + (grid.nx / 2) as f64).clamp(0.0, (grid.nx - 1) as f64);
        let fy = (p[1] / d + (grid.ny / 2) as f64).clamp(0.0, (grid.ny - 1) as f64);
        let (x0, y0) = (math::floor(fx) as usize, math::floor(fy) as usize);
        let (x1, y1) = ((x0 + 1).min(grid.nx - 1), (y0 + 1).min(grid.ny - 1));
        let (wx, wy) = (fx - x0 as f64, fy - y0 as f64);
        let at = |x: usize, y: usize| magnitude[y * grid.nx + x];
        (at(x0, y0) * (1.0 - wx) + at(x1, y0) * wx) * (1.0 - wy) + (at(x0, y1) * (1.0 - wx) + at(x1, y1) * wx) * wy
    };
    let profile = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            sample([start[0] + s * (end[0] - start[0]), start[1] + s * (end[1] - start[1])])
        })
        .collect();
    let len = math::hypot(end[0] - start[0], end[1] - start[1]);
    Ok((profile, len / (n - 1) as f64))
}

/// Where on the phantom the reference-free metrics are measured.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    /// Index of the contracting blob whose boundary is profiled.
    pub blob: usize,
    pub patch_size: usize,
    /// Centre of the background patch (mm).
    pub noise_center: [f64; 2],
    pub profile_angles_deg: Vec<f64>,
    pub profile_length: f64,
    pub profile_samples: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            blob: 1,
            patch_size: 5,
            noise_center: [70.0, -80.0],
            profile_angles_deg: vec![90.0, 114.0, 138.0, 162.0, 186.0, 210.0],
            profile_length: 45.0,
            profile_samples: 46,
        }
    }
}

/// One cardiac phase picked among the frame times.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub name: &'static str,
    pub frame: usize,
    pub center: [f64; 2],
}

/// End-systolic (smallest blob) and end-diastolic (largest blob) frames.
pub fn cardiac_phases(spec: &PhantomSpec, frame_times: &[f64], blob: usize) -> Result<[Phase; 2]> {
    let b = spec.blobs.get(blob).ok_or_else(|| invalid!("phantom has no blob {blob}"))?;
    if frame_times.is_empty() {
        return Err(invalid!("no frames to choose phases from"));
    }
    let sigma = |t: f64| b.state(t, spec.cardiac_period).1;
    let mut es = 0;
    let mut ed = 0;
    for (i, &t) in frame_times.iter().enumerate() {
        if sigma(t) < sigma(frame_times[es]) {
            es = i;
        }
        if sigma(t) > sigma(frame_times[ed]) {
            ed = i;
        }
    }
    let center = |i: usize| b.state(frame_times[i], spec.cardiac_period).0;
    Ok([
        Phase { name: "systole", frame: es, center: center(es) },
        Phase { name: "diastole", frame: ed, center: center(ed) },
    ])
}

/// One row of a metrics report (long format).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub phase: String,
    /// Profile index for per-profile values.
    pub profile: Option<usize>,
    pub value: f64,
}

/// All metrics of one reconstruction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub snr_db: Vec<(String, f64)>,
    /// `(phase, profile, ES)`; failed profiles are skipped.
    pub edge_sharpness: Vec<(String, usize, f64)>,
    pub mean_edge_sharpness: Option<f64>,
    pub fidelity: Option<Fidelity>,
    pub xt_rmse: Option<f64>,
}

impl MetricsReport {
    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::new();
        let row = |metric: &str, phase: &str, profile, value| MetricRow { metric: metric.into(), phase: phase.into(), profile, value };
        for (phase, v) in &self.snr_db {
            rows.push(row("snr_db", phase, None, *v));
        }
        for (phase, i, v) in &self.edge_sharpness {
            rows.push(row("edge_sharpness", phase, Some(*i), *v));
        }
        if let Some(v) = self.mean_edge_sharpness {
            rows.push(row("edge_sharpness_mean", "all", None, v));
        }
        if let Some(f) = self.fidelity {
            rows.push(row("nrmse", "all", None, f.nrmse));
            rows.push(row("psnr_db", "all", None, f.psnr_db));
        }
        if let Some(v) = self.xt_rmse {
            rows.push(row("xt_rmse", "all", None, v));
        }
        rows
    }
}

/// SNR and edge sharpness at both cardiac phases, measured at the phantom's
/// analytic blob position.
pub fn reference_free_metrics(
    recon: &DynamicImage,
    spec: &PhantomSpec,
    probes: &ProbeConfig,
) -> Result<(Vec<(String, f64)>, Vec<(String, usize, f64)>)> {
    let grid = recon.grid;
    let noise = Roi::centered(&grid, probes.noise_center, probes.patch_size)?;
    let mut snr = Vec::new();
    let mut es = Vec::new();
    for phase in cardiac_phases(spec, &recon.frame_times, probes.blob)? {
        let mag: Vec<f64> = recon.frame(phase.frame).iter().map(|z| z.norm()).collect();
        let signal = Roi::centered(&grid, phase.center, probes.patch_size)?;
        snr.push((String::from(phase.name), snr_db(&mag, &grid, &signal, &noise)?));
        for (i, angle) in probes.profile_angles_deg.iter().enumerate() {
            let a = angle.to_radians();
            let end = [phase.center[0] + probes.profile_length * math::cos(a), phase.center[1] + probes.profile_length * math::sin(a)];
            let (profile, spacing) = line_profile(&mag, &grid, phase.center, end, probes.profile_samples)?;
            if let Ok(v) = edge_sharpness(&profile, spacing) {
                es.push((String::from(phase.name), i, v));
            }
        }
    }
    Ok((snr, es))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{render_dynamic, Blob, FourierSeries};
    use num_complex::Complex64;

    #[test]
    fn snr_closed_forms() {
        let grid = GridSpec::new(8, 8.0).unwrap();
        let mut mag = vec![1.0; 64];
        for iy in 0..2 {
            for ix in 0..2 {
                mag[iy * 8 + ix] = 100.0;
            }
        }
        let s = Roi { x0: 0, y0: 0, w: 2, h: 2 };
        let n = Roi { x0: 4, y0: 4, w: 3, h: 3 };
        assert_eq!(snr_db(&mag, &grid, &s, &n).unwrap(), 20.0);
        let flat = vec![3.0; 64];
        assert_eq!(snr_db(&flat, &grid, &s, &n).unwrap(), 0.0);
        let scaled: Vec<f64> = mag.iter().map(|v| v * 7.5).collect();
        assert!((snr_db(&scaled, &grid, &s, &n).unwrap() - 20.0).abs() < 1e-12);
        let mut dead = mag.clone();
        for iy in 4..7 {
            for ix in 4..7 {
                dead[iy * 8 + ix] = 0.0;
            }
        }
        assert!(snr_db(&dead, &grid, &s, &n).is_err());
        assert!(snr_db(&mag, &grid, &s, &Roi { x0: 1, y0: 1, w: 2, h: 2 }).is_err());
        assert!(snr_db(&mag, &grid, &s, &Roi { x0: 4, y0: 4, w: 0, h: 2 }).is_err());
    }

    #[test]
    fn edge_sharpness_closed_forms() {
        let ramp: Vec<f64> = (0..=12).map(|i| (i as f64 / 6.0).min(1.0)).collect();
        assert!((edge_sharpness(&ramp, 0.5).unwrap() - 1.0 / 1.8).abs() < 1e-12);
        let step = [0.0, 0.0, 1.0, 1.0];
        assert!((edge_sharpness(&step, 2.0).unwrap() - 1.0 / 1.2).abs() < 1e-12);
        let reversed: Vec<f64> = ramp.iter().rev().copied().collect();
        assert_eq!(edge_sharpness(&reversed, 0.5).unwrap(), edge_sharpness(&ramp, 0.5).unwrap());
        assert!(edge_sharpness(&[0.5, 0.6, 0.7], 1.0).is_err());
        assert!(edge_sharpness(&[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn fidelity_cases() {
        let grid = GridSpec::new(8, 64.0).unwrap();
        let mut truth = DynamicImage::zeros(grid, vec![0.0, 1.0]);
        for (i, z) in truth.data.iter_mut().enumerate() {
            *z = Complex64::new((i % 7) as f64, 1.0);
        }
        let f = nrmse_psnr(&truth, &truth).unwrap();
        assert_eq!(f.nrmse, 0.0);
        assert_eq!(f.psnr_db, f64::INFINITY);
        let zero = DynamicImage::zeros(grid, vec![0.0, 1.0]);
        assert!((nrmse_psnr(&zero, &truth).unwrap().nrmse - 1.0).abs() < 1e-15);
        let short = DynamicImage::zeros(grid, vec![0.0]);
        assert!(nrmse_psnr(&short, &truth).is_err());
        let shifted = DynamicImage::zeros(grid, vec![0.0, 2.0]);
        assert!(nrmse_psnr(&shifted, &truth).is_err());
    }

    #[test]
    fn xt_profile_shapes_and_static_input() {
        let grid = GridSpec::new(16, 64.0).unwrap();
        let spec = PhantomSpec { blobs: vec![Blob::stationary(1.0, [3.0, -2.0], 6.0)], cardiac_period: 0.8, fov: 64.0 };
        let d = render_dynamic(&spec, &[0.0, 0.1, 0.2, 0.3], &grid).unwrap();
        let xt = xt_profile(&d, 7).unwrap();
        assert_eq!((xt.nx, xt.n_frames, xt.data.len()), (16, 4, 64));
        for x in 0..16 {
            assert!(xt.column(x).iter().all(|v| *v == xt.at(x, 0)));
        }
        assert!(xt_profile(&d, 16).is_err());
        assert!(moving_columns(&xt, 0.5).is_empty());
    }

    #[test]
    fn moving_blob_ridge_is_periodic() {
        let grid = GridSpec::new(64, 128.0).unwrap();
        let mut blob = Blob::stationary(1.0, [0.0, 0.0], 4.0);
        blob.center_x = FourierSeries::new(0.0, &[(20.0, 0.0)]);
        let spec = PhantomSpec { blobs: vec![blob], cardiac_period: 0.8, fov: 128.0 };
        let times: Vec<f64> = (0..32).map(|i| i as f64 * 0.05).collect();
        let d = render_dynamic(&spec, &times, &grid).unwrap();
        let xt = xt_profile(&d, 32).unwrap();
        let ridge: Vec<usize> = (0..32)
            .map(|t| (0..64).max_by(|&a, &b| xt.at(a, t).total_cmp(&xt.at(b, t))).unwrap())
            .collect();
        for t in 0..16 {
            assert_eq!(ridge[t], ridge[t + 16]);
        }
        assert_eq!(ridge[0], 42);
        assert_eq!(ridge[8], 22);
        assert!(ridge.iter().max() != ridge.iter().min());
    }

    #[test]
    fn hold_and_rmse() {
        let xt = XtProfile { nx: 2, n_frames: 2, data: vec![1.0, 2.0, 3.0, 4.0] };
        let held = xt.hold(3, 7).unwrap();
        assert_eq!(held.column(0), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(held.column(1), &[3.0, 3.0, 3.0, 4.0, 4.0, 4.0, 4.0]);
        let zero = XtProfile { nx: 2, n_frames: 2, data: vec![0.0; 4] };
        assert!((xt_rmse(&xt, &zero, &[0]).unwrap() - (2.5f64).sqrt()).abs() < 1e-15);
        assert!(xt_rmse(&xt, &zero, &[]).is_err());
    }

    #[test]
    fn phantom_probes_give_finite_metrics() {
        let grid = GridSpec::new(64, 256.0).unwrap();
        let spec = PhantomSpec::beating_heart(256.0, 0.8);
        let times: Vec<f64> = (0..40).map(|b| (20.0 * b as f64 + 9.5) * 2.3e-3).collect();
        let truth = render_dynamic(&spec, &times, &grid).unwrap();
        let phases = cardiac_phases(&spec, &times, 1).unwrap();
        assert_ne!(phases[0].frame, phases[1].frame);
        let (snr, es) = reference_free_metrics(&truth, &spec, &ProbeConfig::default()).unwrap();
        assert_eq!(snr.len(), 2);
        assert_eq!(es.len(), 12);
        assert!(snr.iter().all(|(_, v)| v.is_finite() && *v > 10.0));
        assert!(es.iter().all(|(_, _, v)| *v > 0.0));
    }
}
