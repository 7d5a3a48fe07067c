//! Tiny-golden-angle radial trajectory, ramp weights and temporal binning.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;

use crate::error::{invalid, shape, Result};
use crate::math;
use crate::phantom::{analytic_kspace, CoilMaps, PhantomSpec};
use crate::rng::Rng;

/// The 7th tiny golden angle in degrees.
pub const TINY_GOLDEN_ANGLE_DEG: f64 = 23.62814;
/// Default repetition time (s).
pub const DEFAULT_TR: f64 = 2.3e-3;
/// Default number of spokes in a reconstruction window.
pub const DEFAULT_SPOKES: usize = 800;

/// Geometry of one radial readout.
///
/// Sample `m` sits at `k_m = (m - M/2)·Δk·(cos θ, sin θ)`, so the DC sample is
/// at `m = M/2` (the centred-FFT layout).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpokeGeometry {
    pub index: usize,
    /// Angle in degrees, in `[0, 180)`.
    pub angle_deg: f64,
    /// Acquisition time in seconds.
    pub time: f64,
    /// Readout length `M`.
    pub n_samples: usize,
    /// Sample spacing along the spoke in 1/mm.
    pub delta_k: f64,
}

impl SpokeGeometry {
    #[inline]
    pub fn direction(&self) -> [f64; 2] {
        let theta = self.angle_deg.to_radians();
        [math::cos(theta), math::sin(theta)]
    }

    /// Signed radial frequency of sample `m` (1/mm).
    #[inline]
    pub fn radial_k(&self, m: usize) -> f64 {
        (m as f64 - (self.n_samples / 2) as f64) * self.delta_k
    }

    pub fn k_points(&self) -> Vec<[f64; 2]> {
        let d = self.direction();
        (0..self.n_samples)
            .map(|m| {
                let k = self.radial_k(m);
                [k * d[0], k * d[1]]
            })
            .collect()
    }
}

/// Builds `n_spokes` readouts rotated by `angle_step_deg` each, one per TR.
pub fn golden_angle_geometry(
    n_spokes: usize,
    n_samples: usize,
    fov: f64,
    tr: f64,
    angle_step_deg: f64,
) -> Result<Vec<SpokeGeometry>> {
    if n_spokes == 0 {
        return Err(invalid!("need at least one spoke"));
    }
    if n_samples < 2 || !n_samples.is_multiple_of(2) {
        return Err(invalid!("readout length must be even and at least 2, got {n_samples}"));
    }
    if !(angle_step_deg > 0.0 && angle_step_deg.is_finite()) {
        return Err(invalid!("angle increment must be positive, got {angle_step_deg}"));
    }
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(invalid!("TR must be positive, got {tr}"));
    }
    if !(fov > 0.0 && fov.is_finite()) {
        return Err(invalid!("field of view must be positive, got {fov}"));
    }
    Ok((0..n_spokes)
        .map(|i| SpokeGeometry {
            index: i,
            angle_deg: math::fmod(i as f64 * angle_step_deg, 180.0),
            time: i as f64 * tr,
            n_samples,
            delta_k: 1.0 / fov,
        })
        .collect())
}

/// Spoke geometry plus measured samples laid out `[spoke][coil][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpokeSet {
    pub geometry: Vec<SpokeGeometry>,
    pub n_coils: usize,
    pub samples: Vec<Complex64>,
    pub tr: f64,
}

impl SpokeSet {
    pub fn new(geometry: Vec<SpokeGeometry>, n_coils: usize, samples: Vec<Complex64>, tr: f64) -> Result<Self> {
        let set = Self { geometry, n_coils, samples, tr };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_samples();
        if self.geometry.iter().any(|g| g.n_samples != m) {
            return Err(shape!("spokes disagree on readout length"));
        }
        if self.samples.len() != self.geometry.len() * self.n_coils * m {
            return Err(shape!(
                "{} samples for {} spokes x {} coils x {} readout",
                self.samples.len(),
                self.geometry.len(),
                self.n_coils,
                m
            ));
        }
        if self.samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(crate::Error::NonFinite("spoke samples".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn n_spokes(&self) -> usize {
        self.geometry.len()
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.geometry.first().map_or(0, |g| g.n_samples)
    }

    #[inline]
    pub fn spoke(&self, i: usize, coil: usize) -> &[Complex64] {
        let m = self.n_samples();
        let start = (i * self.n_coils + coil) * m;
        &self.samples[start..start + m]
    }

    /// Acquisition window `[0, N·TR]` in seconds.
    #[inline]
    pub fn time_window(&self) -> f64 {
        self.n_spokes() as f64 * self.tr
    }

    /// Keeps only the listed spokes, in the given order.
    pub fn select(&self, indices: &[usize]) -> SpokeSet {
        let m = self.n_samples();
        let per_spoke = self.n_coils * m;
        let mut samples = Vec::with_capacity(indices.len() * per_spoke);
        let mut geometry = Vec::with_capacity(indices.len());
        for &i in indices {
            geometry.push(self.geometry[i]);
            samples.extend_from_slice(&self.samples[i * per_spoke..(i + 1) * per_spoke]);
        }
        SpokeSet { geometry, n_coils: self.n_coils, samples, tr: self.tr }
    }
}

/// Samples the analytic phantom along every spoke and adds complex Gaussian
/// noise with per-component standard deviation `noise_sigma`.
pub fn simulate_acquisition(
    phantom: &PhantomSpec,
    coils: &CoilMaps,
    geometry: Vec<SpokeGeometry>,
    tr: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SpokeSet> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(invalid!("noise sigma must be non-negative, got {noise_sigma}"));
    }
    let n_coils = coils.n_coils();
    let per_spoke = crate::par::try_map_indexed(geometry.len(), |i| {
        let g = &geometry[i];
        analytic_kspace(phantom, coils, g.time, &g.k_points())
    })?;
    let m = geometry.first().map_or(0, |g| g.n_samples);
    let mut samples = Vec::with_capacity(geometry.len() * n_coils * m);
    for coils_samples in per_spoke {
        for s in coils_samples {
            samples.extend(s);
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = Rng::with_stream(seed, 0x5A3E);
        for z in &mut samples {
            let re = rng.normal();
            let im = rng.normal();
            *z += Complex64::new(re, im) * noise_sigma;
        }
    }
    SpokeSet::new(geometry, n_coils, samples, tr)
}

/// Per-component noise level giving `snr_db = 10·log10(mean|y|² / E|n|²)`.
pub fn noise_sigma_for_snr(clean: &[Complex64], snr_db: f64) -> f64 {
    if clean.is_empty() {
        return 0.0;
    }
    let power = clean.iter().map(|z| z.norm_sqr()).sum::<f64>() / clean.len() as f64;
    math::sqrt(power / (2.0 * math::powf(10.0, snr_db / 10.0)))
}

/// Ramp weight per readout sample: distance to the spoke centre over `M/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RampWeights(pub Vec<f64>);

pub fn ramp_weights(n_samples: usize) -> Result<RampWeights> {
    if n_samples < 2 || !n_samples.is_multiple_of(2) {
        return Err(invalid!("readout length must be even and at least 2, got {n_samples}"));
    }
    let half = (n_samples / 2) as f64;
    Ok(RampWeights((0..n_samples).map(|m| (m as f64 - half).abs() / half).collect()))
}

/// Radial density compensation `∝ max(|m - M/2|, ½)`, normalized to sum `M`.
pub fn density_compensation(n_samples: usize) -> Result<Vec<f64>> {
    let raw = density_compensation_unnormalized(n_samples)?;
    let total: f64 = raw.iter().sum();
    let scale = n_samples as f64 / total;
    Ok(raw.into_iter().map(|d| d * scale).collect())
}

pub(crate) fn density_compensation_unnormalized(n_samples: usize) -> Result<Vec<f64>> {
    if n_samples < 2 || !n_samples.is_multiple_of(2) {
        return Err(invalid!("readout length must be even and at least 2, got {n_samples}"));
    }
    let half = (n_samples / 2) as f64;
    Ok((0..n_samples).map(|m| (m as f64 - half).abs().max(0.5)).collect())
}

/// One temporal bin: a contiguous run of spokes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub members: Range<usize>,
    /// Mean acquisition time of the members (s).
    pub center_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSpokeSet {
    pub bins: Vec<Bin>,
    pub spokes_per_bin: usize,
    /// Trailing spokes that did not fill a bin.
    pub dropped: usize,
}

impl BinnedSpokeSet {
    pub fn center_times(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.center_time).collect()
    }
}

/// Groups consecutive spokes into bins of `spokes_per_bin`; any remainder is
/// dropped and reported in [`BinnedSpokeSet::dropped`].
pub fn bin_spokes(geometry: &[SpokeGeometry], spokes_per_bin: usize) -> Result<BinnedSpokeSet> {
    if spokes_per_bin == 0 {
        return Err(invalid!("spokes_per_bin must be at least 1"));
    }
    if spokes_per_bin > geometry.len() {
        return Err(invalid!("spokes_per_bin {spokes_per_bin} exceeds the {} available spokes", geometry.len()));
    }
    let n_bins = geometry.len() / spokes_per_bin;
    let bins = (0..n_bins)
        .map(|b| {
            let members = b * spokes_per_bin..(b + 1) * spokes_per_bin;
            let center_time = geometry[members.clone()].iter().map(|g| g.time).sum::<f64>() / spokes_per_bin as f64;
            Bin { members, center_time }
        })
        .collect();
    Ok(BinnedSpokeSet { bins, spokes_per_bin, dropped: geometry.len() - n_bins * spokes_per_bin })
}

/// Bin-centre times of the default binning grid without building geometry.
pub fn bin_center_times(n_spokes: usize, tr: f64, spokes_per_bin: usize) -> Vec<f64> {
    let n_bins = n_spokes / spokes_per_bin.max(1);
    (0..n_bins)
        .map(|b| {
            let first = b * spokes_per_bin;
            let sum: f64 = (first..first + spokes_per_bin).map(|i| i as f64 * tr).sum();
            sum / spokes_per_bin as f64
        })
        .collect()
}

/// Spoke set with all samples zero.
pub fn zero_spoke_set(geometry: Vec<SpokeGeometry>, n_coils: usize, tr: f64) -> SpokeSet {
    let m = geometry.first().map_or(0, |g| g.n_samples);
    let n = geometry.len() * n_coils * m;
    SpokeSet { geometry, n_coils, samples: vec![Complex64::new(0.0, 0.0); n], tr }
}
