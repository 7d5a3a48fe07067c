//! Analytic dynamic phantom and coil sensitivities.
//!
//! The scene is a sum of isotropic Gaussian blobs whose centres and widths
//! follow truncated Fourier series in time. Coil sensitivities are Gaussians
//! as well, so every coil-weighted blob is again a Gaussian and its 2D Fourier
//! transform has a closed form. Acquisition therefore never touches a
//! reconstruction grid.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::image::{ComplexImage, DynamicImage, GridSpec};
use crate::math::{self, PI, TAU};
use crate::rng::Rng;

/// `mean + Σ_h a_h cos(2π h t / T) + b_h sin(2π h t / T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub mean: f64,
    /// `(a_h, b_h)` for harmonics `h = 1, 2, ...`.
    pub harmonics: Vec<(f64, f64)>,
}

impl FourierSeries {
    pub fn constant(mean: f64) -> Self {
        Self { mean, harmonics: Vec::new() }
    }

    pub fn new(mean: f64, harmonics: &[(f64, f64)]) -> Self {
        Self { mean, harmonics: harmonics.to_vec() }
    }

    pub fn eval(&self, t: f64, period: f64) -> f64 {
        // Reduce the phase first so that t and t + period give identical bits.
        let phase = math::fmod(t, period);
        let phase = if phase < 0.0 { phase + period } else { phase };
        let w = TAU * phase / period;
        let mut v = self.mean;
        for (h, &(a, b)) in self.harmonics.iter().enumerate() {
            let arg = (h + 1) as f64 * w;
            v += a * math::cos(arg) + b * math::sin(arg);
        }
        v
    }

    pub fn is_static(&self) -> bool {
        self.harmonics.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
    }
}

/// One Gaussian blob: `amplitude · exp(-|r - c(t)|² / (2 σ(t)²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub amplitude: Complex64,
    pub center_x: FourierSeries,
    pub center_y: FourierSeries,
    pub sigma: FourierSeries,
}

impl Blob {
    pub fn stationary(amplitude: f64, center: [f64; 2], sigma: f64) -> Self {
        Self {
            amplitude: Complex64::new(amplitude, 0.0),
            center_x: FourierSeries::constant(center[0]),
            center_y: FourierSeries::constant(center[1]),
            sigma: FourierSeries::constant(sigma),
        }
    }

    /// `(centre, sigma)` at time `t`.
    pub fn state(&self, t: f64, period: f64) -> ([f64; 2], f64) {
        (
            [self.center_x.eval(t, period), self.center_y.eval(t, period)],
            self.sigma.eval(t, period),
        )
    }
}

/// Time-varying Gaussian-blob scene with period `cardiac_period` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub blobs: Vec<Blob>,
    pub cardiac_period: f64,
    /// Scene extent (FOV) in mm.
    pub fov: f64,
}

impl PhantomSpec {
    /// A beating-heart stand-in: a dim torso, a contracting left-ventricle
    /// blood pool, a right ventricle, a small vessel and a liver-like mass.
    pub fn beating_heart(fov: f64, cardiac_period: f64) -> Self {
        let s = fov / 256.0;
        let lv = Blob {
            amplitude: Complex64::new(1.0, 0.0),
            center_x: FourierSeries::new(-18.0 * s, &[(2.5 * s, 0.0), (0.0, 0.8 * s), (0.0, 0.0)]),
            center_y: FourierSeries::new(10.0 * s, &[(0.0, 2.0 * s), (0.6 * s, 0.0), (0.0, 0.0)]),
            sigma: FourierSeries::new(13.0 * s, &[(3.5 * s, 0.0), (1.0 * s, 0.0), (0.0, 0.5 * s)]),
        };
        let rv = Blob {
            amplitude: Complex64::new(0.7, 0.0),
            center_x: FourierSeries::new(24.0 * s, &[(1.5 * s, 1.0 * s), (0.0, 0.0), (0.0, 0.0)]),
            center_y: FourierSeries::new(4.0 * s, &[(0.0, 1.0 * s), (0.0, 0.0), (0.0, 0.0)]),
            sigma: FourierSeries::new(11.0 * s, &[(1.25 * s, 2.2 * s), (0.4 * s, 0.0), (0.0, 0.0)]),
        };
        Self {
            blobs: vec![
                Blob::stationary(0.15, [0.0, 0.0], 38.0 * s),
                lv,
                rv,
                Blob::stationary(0.8, [12.0 * s, -38.0 * s], 5.0 * s),
                Blob::stationary(0.45, [-42.0 * s, -48.0 * s], 18.0 * s),
                Blob::stationary(0.35, [48.0 * s, 40.0 * s], 8.0 * s),
            ],
            cardiac_period,
            fov,
        }
    }

    /// Checks period, support and band-limitedness against `grid`.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.cardiac_period.is_finite() && self.cardiac_period > 0.0) {
            return Err(invalid!("cardiac period must be positive, got {}", self.cardiac_period));
        }
        let radius = 0.5 * self.fov;
        let min_sigma = grid.spacing();
        const SAMPLES: usize = 1024;
        for (b, blob) in self.blobs.iter().enumerate() {
            for i in 0..SAMPLES {
                let t = self.cardiac_period * i as f64 / SAMPLES as f64;
                let (c, sigma) = blob.state(t, self.cardiac_period);
                if sigma < min_sigma {
                    return Err(invalid!(
                        "blob {b}: sigma {sigma:.3} mm drops below the pixel spacing {min_sigma:.3} mm"
                    ));
                }
                if c[0] * c[0] + c[1] * c[1] >= radius * radius {
                    return Err(invalid!("blob {b}: centre leaves the field of view"));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth scene value at a physical position.
    pub fn value(&self, t: f64, p: [f64; 2]) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for blob in &self.blobs {
            let (c, sigma) = blob.state(t, self.cardiac_period);
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            v += blob.amplitude * math::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
        v
    }
}

/// Samples the phantom at every pixel centre of `grid`.
pub fn render_frame(spec: &PhantomSpec, t: f64, grid: &GridSpec) -> Result<ComplexImage> {
    if !t.is_finite() {
        return Err(invalid!("frame time must be finite, got {t}"));
    }
    grid.validate()?;
    let states: Vec<_> = spec.blobs.iter().map(|b| (b.amplitude, b.state(t, spec.cardiac_period))).collect();
    let mut img = ComplexImage::zeros(*grid);
    for iy in 0..grid.ny {
        let y = grid.y(iy);
        for ix in 0..grid.nx {
            let x = grid.x(ix);
            let mut v = Complex64::new(0.0, 0.0);
            for &(amp, (c, sigma)) in &states {
                let dx = x - c[0];
                let dy = y - c[1];
                v += amp * math::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            }
            img.set(ix, iy, v);
        }
    }
    Ok(img)
}

/// Renders the ground truth at each requested time.
pub fn render_dynamic(spec: &PhantomSpec, times: &[f64], grid: &GridSpec) -> Result<DynamicImage> {
    let frames = crate::par::try_map_indexed(times.len(), |i| render_frame(spec, times[i], grid))?;
    DynamicImage::from_frames(*grid, times.to_vec(), &frames)
}

/// Analytic description of one receive coil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoilModel {
    /// Spatially constant sensitivity (the `τ → ∞` limit).
    Uniform { gain: Complex64 },
    /// `gain · exp(-|r - center|² / (2 width²))`.
    Gaussian { gain: Complex64, center: [f64; 2], width: f64 },
}

impl CoilModel {
    #[inline]
    pub fn value(&self, p: [f64; 2]) -> Complex64 {
        match *self {
            CoilModel::Uniform { gain } => gain,
            CoilModel::Gaussian { gain, center, width } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                gain * math::exp(-(dx * dx + dy * dy) / (2.0 * width * width))
            }
        }
    }
}

/// Coil sensitivities rasterized on a grid, `[coil][pixel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterCoils {
    pub grid: GridSpec,
    pub maps: Vec<Vec<Complex64>>,
}

/// Receive-coil sensitivities: analytic, rasterized, or both.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps {
    pub analytic: Option<Vec<CoilModel>>,
    pub raster: Option<RasterCoils>,
}

impl CoilMaps {
    pub fn from_models(models: Vec<CoilModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(invalid!("at least one coil is required"));
        }
        Ok(Self { analytic: Some(models), raster: None })
    }

    pub fn uniform() -> Self {
        Self { analytic: Some(vec![CoilModel::Uniform { gain: Complex64::new(1.0, 0.0) }]), raster: None }
    }

    pub fn from_raster(raster: RasterCoils) -> Result<Self> {
        if raster.maps.is_empty() {
            return Err(invalid!("at least one coil is required"));
        }
        if raster.maps.iter().any(|m| m.len() != raster.grid.len()) {
            return Err(crate::error::shape!("coil raster does not match its grid"));
        }
        Ok(Self { analytic: None, raster: Some(raster) })
    }

    pub fn n_coils(&self) -> usize {
        match (&self.analytic, &self.raster) {
            (Some(a), _) => a.len(),
            (None, Some(r)) => r.maps.len(),
            (None, None) => 0,
        }
    }

    pub fn models(&self) -> Result<&[CoilModel]> {
        self.analytic
            .as_deref()
            .ok_or_else(|| invalid!("analytic coil models are required but only a raster is available"))
    }

    /// Sensitivity of coil `c` at a physical position. Analytic when possible,
    /// otherwise bilinear interpolation of the raster.
    pub fn value(&self, c: usize, p: [f64; 2]) -> Complex64 {
        if let Some(models) = &self.analytic {
            return models[c].value(p);
        }
        let r = self.raster.as_ref().expect("coil maps without analytic or raster form");
        crate::image::interpolate_on(&r.grid, &r.maps[c], p)
    }

    /// Evaluates every coil at every pixel of `grid`.
    pub fn rasterize(&self, grid: &GridSpec) -> RasterCoils {
        let coords = grid.coordinates();
        let maps = (0..self.n_coils())
            .map(|c| coords.iter().map(|&p| self.value(c, p)).collect())
            .collect();
        RasterCoils { grid: *grid, maps }
    }

    /// `sqrt(Σ_c |S_c|²)` at each pixel of `grid`.
    pub fn root_sum_of_squares(&self, grid: &GridSpec) -> Vec<f64> {
        let raster = self.rasterize(grid);
        (0..grid.len())
            .map(|i| math::sqrt(raster.maps.iter().map(|m| m[i].norm_sqr()).sum::<f64>()))
            .collect()
    }
}

/// Minimum root-sum-of-squares sensitivity allowed inside the FOV.
pub const MIN_COIL_COVERAGE: f64 = 0.1;

/// Gaussian coils on a ring just outside the FOV with distinct phases.
///
/// A single coil degenerates to a uniform unit sensitivity.
pub fn make_coil_maps(n_coils: usize, grid: &GridSpec, seed: u64) -> Result<CoilMaps> {
    if n_coils == 0 {
        return Err(invalid!("n_coils must be at least 1"));
    }
    if n_coils == 1 {
        return Ok(CoilMaps::uniform());
    }
    let fov = grid.fov;
    let mut rng = Rng::with_stream(seed, 0xC011);
    let step = TAU / n_coils as f64;
    let models = (0..n_coils)
        .map(|j| {
            let angle = j as f64 * step + rng.uniform_in(-0.1, 0.1) * step;
            let width = 0.6 * fov * rng.uniform_in(0.9, 1.1);
            let mag = rng.uniform_in(0.8, 1.2);
            let phase = j as f64 * step + rng.uniform_in(-0.2, 0.2);
            let radius = 0.55 * fov;
            CoilModel::Gaussian {
                gain: math::cis(phase) * mag,
                center: [radius * math::cos(angle), radius * math::sin(angle)],
                width,
            }
        })
        .collect();
    let maps = CoilMaps::from_models(models)?;
    let r = grid.support_radius();
    let rss = maps.root_sum_of_squares(grid);
    for (i, p) in grid.coordinates().iter().enumerate() {
        if p[0] * p[0] + p[1] * p[1] <= r * r && rss[i] < MIN_COIL_COVERAGE {
            return Err(Error::Numeric(alloc::format!(
                "coil coverage {:.3} below {MIN_COIL_COVERAGE} at ({:.1}, {:.1}) mm",
                rss[i],
                p[0],
                p[1]
            )));
        }
    }
    Ok(maps)
}

/// Exact k-space of the coil-weighted phantom, `[coil][k-point]`.
///
/// Convention `F(k) = ∫ f(r) e^{-2πi k·r} dr`, k in 1/mm. Each coil × blob
/// product is a Gaussian with width `σ'` and centre `c'`, whose transform is
/// `A'·2πσ'²·exp(-2π²σ'²|k|²)·exp(-2πi k·c')`.
pub fn analytic_kspace(
    spec: &PhantomSpec,
    coils: &CoilMaps,
    t: f64,
    k_points: &[[f64; 2]],
) -> Result<Vec<Vec<Complex64>>> {
    if !t.is_finite() {
        return Err(invalid!("acquisition time must be finite, got {t}"));
    }
    let models = coils.models()?;
    let states: Vec<_> = spec.blobs.iter().map(|b| (b.amplitude, b.state(t, spec.cardiac_period))).collect();
    let mut out = Vec::with_capacity(models.len());
    for model in models {
        // Collapse each blob with this coil into (amplitude', sigma'², centre').
        let terms: Vec<(Complex64, f64, [f64; 2])> = states
            .iter()
            .map(|&(amp, (c, sigma))| {
                let s2 = sigma * sigma;
                match *model {
                    CoilModel::Uniform { gain } => (amp * gain, s2, c),
                    CoilModel::Gaussian { gain, center, width } => {
                        let w2 = width * width;
                        let sum = s2 + w2;
                        let var = s2 * w2 / sum;
                        let cc = [(c[0] * w2 + center[0] * s2) / sum, (c[1] * w2 + center[1] * s2) / sum];
                        let dx = c[0] - center[0];
                        let dy = c[1] - center[1];
                        let scale = math::exp(-(dx * dx + dy * dy) / (2.0 * sum));
                        (amp * gain * scale, var, cc)
                    }
                }
            })
            .collect();
        let samples = k_points
            .iter()
            .map(|k| {
                let k2 = k[0] * k[0] + k[1] * k[1];
                let mut v = Complex64::new(0.0, 0.0);
                for &(a, var, c) in &terms {
                    let mag = TAU * var * math::exp(-2.0 * PI * PI * var * k2);
                    v += a * math::cis(-TAU * (k[0] * c[0] + k[1] * c[1])) * mag;
                }
                v
            })
            .collect();
        out.push(samples);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid64() -> GridSpec {
        GridSpec::new(64, 256.0).unwrap()
    }

    #[test]
    fn empty_scene_renders_zero() {
        let spec = PhantomSpec { blobs: vec![], cardiac_period: 0.8, fov: 256.0 };
        let img = render_frame(&spec, 0.37, &grid64()).unwrap();
        assert!(img.data.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn static_scene_is_time_invariant() {
        let mut spec = PhantomSpec::beating_heart(256.0, 0.8);
        for b in &mut spec.blobs {
            for s in [&mut b.center_x, &mut b.center_y, &mut b.sigma] {
                for h in &mut s.harmonics {
                    *h = (0.0, 0.0);
                }
            }
        }
        let a = render_frame(&spec, 0.1, &grid64()).unwrap();
        let b = render_frame(&spec, 1.234, &grid64()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blob_peak_on_pixel_centre_is_one() {
        let g = grid64();
        let spec = PhantomSpec {
            blobs: vec![Blob::stationary(1.0, [g.x(40), g.y(20)], 6.0)],
            cardiac_period: 0.8,
            fov: 256.0,
        };
        let img = render_frame(&spec, 0.0, &g).unwrap();
        assert_eq!(img.get(40, 20), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn render_rejects_bad_inputs() {
        let spec = PhantomSpec::beating_heart(256.0, 0.8);
        assert!(render_frame(&spec, f64::NAN, &grid64()).is_err());
        let empty = GridSpec { nx: 0, ny: 0, fov: 256.0 };
        assert!(render_frame(&spec, 0.0, &empty).is_err());
    }

    #[test]
    fn rendering_is_periodic() {
        let spec = PhantomSpec::beating_heart(256.0, 0.8);
        for t in [0.0, 0.13, 0.5, 1.1] {
            let a = render_frame(&spec, t, &grid64()).unwrap();
            let b = render_frame(&spec, t + 0.8, &grid64()).unwrap();
            assert_eq!(a, b, "t = {t}");
        }
    }

    #[test]
    fn default_phantom_is_valid() {
        let spec = PhantomSpec::beating_heart(256.0, 0.8);
        spec.validate(&grid64()).unwrap();
        spec.validate(&GridSpec::new(128, 256.0).unwrap()).unwrap();
    }

    #[test]
    fn validation_rejects_thin_blobs() {
        let spec = PhantomSpec {
            blobs: vec![Blob::stationary(1.0, [0.0, 0.0], 1.0)],
            cardiac_period: 0.8,
            fov: 256.0,
        };
        assert!(spec.validate(&grid64()).is_err());
        let bad_period = PhantomSpec { blobs: vec![], cardiac_period: 0.0, fov: 256.0 };
        assert!(bad_period.validate(&grid64()).is_err());
    }

    #[test]
    fn unit_gaussian_dc_is_two_pi() {
        let spec = PhantomSpec {
            blobs: vec![Blob::stationary(1.0, [0.0, 0.0], 1.0)],
            cardiac_period: 0.8,
            fov: 256.0,
        };
        let k = analytic_kspace(&spec, &CoilMaps::uniform(), 0.0, &[[0.0, 0.0]]).unwrap();
        assert!((k[0][0].re - TAU).abs() < 1e-12);
        assert_eq!(k[0][0].im, 0.0);
    }

    #[test]
    fn real_scene_has_conjugate_symmetric_kspace() {
        let spec = PhantomSpec::beating_heart(256.0, 0.8);
        let real_coil = CoilMaps::from_models(vec![CoilModel::Gaussian {
            gain: Complex64::new(0.9, 0.0),
            center: [100.0, -60.0],
            width: 150.0,
        }])
        .unwrap();
        let ks = [[0.01, -0.02], [0.07, 0.03], [-0.1, 0.11]];
        let neg: Vec<_> = ks.iter().map(|k| [-k[0], -k[1]]).collect();
        let a = analytic_kspace(&spec, &real_coil, 0.3, &ks).unwrap();
        let b = analytic_kspace(&spec, &real_coil, 0.3, &neg).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert!((x - y.conj()).norm() <= 1e-12 * x.norm().max(1e-300));
        }
    }

    #[test]
    fn rasterized_only_coils_are_rejected() {
        let g = grid64();
        let raster = CoilMaps::uniform().rasterize(&g);
        let maps = CoilMaps::from_raster(raster).unwrap();
        let spec = PhantomSpec::beating_heart(256.0, 0.8);
        assert!(analytic_kspace(&spec, &maps, 0.0, &[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn kspace_is_linear_in_blobs() {
        let full = PhantomSpec::beating_heart(256.0, 0.8);
        let (left, right) = full.blobs.split_at(3);
        let a = PhantomSpec { blobs: left.to_vec(), ..full.clone() };
        let b = PhantomSpec { blobs: right.to_vec(), ..full.clone() };
        let coils = make_coil_maps(4, &grid64(), 3).unwrap();
        let ks: Vec<[f64; 2]> = (0..20).map(|i| [0.004 * i as f64 - 0.03, 0.002 * i as f64]).collect();
        let yf = analytic_kspace(&full, &coils, 0.21, &ks).unwrap();
        let ya = analytic_kspace(&a, &coils, 0.21, &ks).unwrap();
        let yb = analytic_kspace(&b, &coils, 0.21, &ks).unwrap();
        for c in 0..4 {
            for i in 0..ks.len() {
                let d = yf[c][i] - ya[c][i] - yb[c][i];
                assert!(d.norm() <= 1e-12 * yf[c][i].norm().max(1.0));
            }
        }
    }

    #[test]
    fn single_coil_is_uniform() {
        let maps = make_coil_maps(1, &grid64(), 7).unwrap();
        assert_eq!(maps.n_coils(), 1);
        for p in [[0.0, 0.0], [100.0, -20.0], [-90.0, 90.0]] {
            assert_eq!(maps.value(0, p), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn six_coils_cover_the_fov() {
        let g = grid64();
        let maps = make_coil_maps(6, &g, 11).unwrap();
        assert_eq!(maps.n_coils(), 6);
        let rss = maps.root_sum_of_squares(&g);
        let r = g.support_radius();
        for (i, p) in g.coordinates().iter().enumerate() {
            if p[0] * p[0] + p[1] * p[1] <= r * r {
                assert!(rss[i] >= MIN_COIL_COVERAGE);
            }
        }
        let phases: Vec<f64> = maps
            .models()
            .unwrap()
            .iter()
            .map(|m| match m {
                CoilModel::Gaussian { gain, .. } => gain.arg(),
                CoilModel::Uniform { gain } => gain.arg(),
            })
            .collect();
        for i in 0..phases.len() {
            for j in 0..i {
                assert!((phases[i] - phases[j]).abs() > 1e-3);
            }
        }
    }

    #[test]
    fn coil_maps_are_deterministic() {
        let g = grid64();
        let a = make_coil_maps(6, &g, 42).unwrap();
        let b = make_coil_maps(6, &g, 42).unwrap();
        assert_eq!(a, b);
        let c = make_coil_maps(6, &g, 43).unwrap();
        assert_ne!(a, c);
    }
}
