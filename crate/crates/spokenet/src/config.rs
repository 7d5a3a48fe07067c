//! Experiment configuration as sectioned `key = value` text.
//!
//! Every key has a default, so an empty file is a complete configuration.
//! Unknown sections or keys are rejected with their line number.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spokenet_core::inr::{Activation, HashGridConfig};
use spokenet_core::metrics::ProbeConfig;
use spokenet_core::phantom::{Blob, FourierSeries, PhantomSpec};
use spokenet_core::recon::{PipelineConfig, ReconConfig};
use spokenet_core::subspace::GraspConfig;
use spokenet_core::trajectory::{bin_center_times, DEFAULT_SPOKES, DEFAULT_TR, TINY_GOLDEN_ANGLE_DEG};
use spokenet_core::{Complex64, GridSpec};

use crate::error::{AppError, AppResult};

/// Environment variable naming the config file when `--config` is absent.
pub const CONFIG_ENV: &str = "SPOKENET_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Scene, including its FOV (mm) and cardiac period (s).
    pub phantom: PhantomSpec,
    pub grid_size: usize,
    pub n_spokes: usize,
    pub n_samples: usize,
    pub tr: f64,
    pub angle_step_deg: f64,
    pub n_coils: usize,
    pub coil_seed: u64,
    /// Data SNR in dB; ignored when `noise_sigma` is set.
    pub snr_db: f64,
    pub noise_sigma: Option<f64>,
    pub grasp: GraspConfig,
    pub recon: ReconConfig,
    /// Spokes per bin of the inference frame grid.
    pub frame_spokes_per_bin: usize,
    pub probes: ProbeConfig,
    /// Row of the x–t profile; `None` uses the row through the mean LV centre.
    pub xt_row: Option<usize>,
    pub xt_fraction: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            phantom: PhantomSpec::beating_heart(256.0, 0.8),
            grid_size: 64,
            n_spokes: DEFAULT_SPOKES,
            n_samples: 64,
            tr: DEFAULT_TR,
            angle_step_deg: TINY_GOLDEN_ANGLE_DEG,
            n_coils: 6,
            coil_seed: 7,
            snr_db: 25.0,
            noise_sigma: None,
            grasp: GraspConfig::default(),
            recon: ReconConfig::default(),
            frame_spokes_per_bin: 20,
            probes: ProbeConfig::default(),
            xt_row: None,
            xt_fraction: 0.5,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
    }
}

/// `mean, a1, b1, a2, b2, ...`
fn series_text(f: &FourierSeries) -> String {
    let mut v = vec![f.mean];
    for &(a, b) in &f.harmonics {
        v.extend([a, b]);
    }
    join(&v)
}

/// A blob line: amplitude `re, im`, then the x-centre, y-centre and width
/// series, separated by `|`.
fn parse_blob(v: &str) -> Result<Blob, String> {
    let parts: Vec<&str> = v.split('|').collect();
    if parts.len() != 4 {
        return Err(format!("blob: expected 4 `|`-separated fields, got {}", parts.len()));
    }
    let nums = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| format!("blob: cannot parse `{}`", x.trim()))).collect()
    };
    let amp = nums(parts[0])?;
    if amp.len() != 2 {
        return Err("blob: amplitude needs `re, im`".into());
    }
    let series = |s: &str| -> Result<FourierSeries, String> {
        let v = nums(s)?;
        if v.len() % 2 != 1 {
            return Err(format!("blob: a series needs a mean plus (a, b) pairs, got {} values", v.len()));
        }
        Ok(FourierSeries { mean: v[0], harmonics: v[1..].chunks(2).map(|c| (c[0], c[1])).collect() })
    };
    Ok(Blob {
        amplitude: Complex64::new(amp[0], amp[1]),
        center_x: series(parts[1])?,
        center_y: series(parts[2])?,
        sigma: series(parts[3])?,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    #[inline]
    pub fn fov(&self) -> f64 {
        self.phantom.fov
    }

    pub fn grid(&self) -> AppResult<GridSpec> {
        GridSpec::new(self.grid_size, self.phantom.fov).map_err(|e| AppError::Config(e.to_string()))
    }

    /// Frame times of the inference grid (bin centres).
    pub fn frame_times(&self) -> Vec<f64> {
        match &self.recon.frame_times {
            Some(t) => t.clone(),
            None => bin_center_times(self.n_spokes, self.tr, self.frame_spokes_per_bin),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut recon = self.recon.clone();
        recon.seed = self.seed;
        recon.frame_times = Some(self.frame_times());
        PipelineConfig { fov: self.phantom.fov, grid_size: Some(self.grid_size), grasp: self.grasp, recon, initialize: true }
    }

    /// Checks ranges so later stages fail only on genuinely numeric problems.
    pub fn validate(&self) -> AppResult<()> {
        let err = |m: String| Err(AppError::Config(m));
        let fov = self.phantom.fov;
        if !(fov > 0.0 && fov.is_finite()) {
            return err(format!("phantom.fov must be positive, got {fov}"));
        }
        if !(self.phantom.cardiac_period > 0.0 && self.phantom.cardiac_period.is_finite()) {
            return err(format!("phantom.cardiac_period must be positive, got {}", self.phantom.cardiac_period));
        }
        if self.phantom.blobs.is_empty() {
            return err("phantom needs at least one blob".into());
        }
        if self.n_spokes == 0 {
            return err("trajectory.spokes must be positive".into());
        }
        if self.n_samples < 4 || !self.n_samples.is_multiple_of(2) {
            return err(format!("trajectory.samples must be even and at least 4, got {}", self.n_samples));
        }
        if !(self.tr > 0.0) {
            return err(format!("trajectory.tr must be positive, got {}", self.tr));
        }
        if self.n_coils == 0 {
            return err("coils.count must be positive".into());
        }
        if let Some(s) = self.noise_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return err(format!("noise.sigma must be non-negative, got {s}"));
            }
        }
        if self.frame_spokes_per_bin == 0 || self.frame_spokes_per_bin > self.n_spokes {
            return err(format!("recon.frame_spokes_per_bin must be in 1..={}", self.n_spokes));
        }
        if !(self.xt_fraction > 0.0 && self.xt_fraction < 1.0) {
            return err(format!("metrics.xt_fraction must be in (0, 1), got {}", self.xt_fraction));
        }
        if let Some(r) = self.xt_row {
            if r >= self.grid_size {
                return err(format!("metrics.xt_row {r} outside the {}-pixel grid", self.grid_size));
            }
        }
        let grid = self.grid()?;
        self.phantom.validate(&grid).map_err(|e| AppError::Config(format!("phantom: {e}")))?;
        self.grasp.validate().map_err(|e| AppError::Config(e.to_string()))?;
        self.recon.validate().map_err(|e| AppError::Config(e.to_string()))
    }

    /// Serializes every field; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.recon;
        let g = &self.grasp;
        let p = &self.probes;
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[phantom]\nfov = {:?}\ncardiac_period = {:?}", self.phantom.fov, self.phantom.cardiac_period);
        for b in &self.phantom.blobs {
            let _ = writeln!(
                s,
                "blob = {:?}, {:?} | {} | {} | {}",
                b.amplitude.re,
                b.amplitude.im,
                series_text(&b.center_x),
                series_text(&b.center_y),
                series_text(&b.sigma)
            );
        }
        let _ = writeln!(s, "\n[grid]\nsize = {}", self.grid_size);
        let _ = writeln!(
            s,
            "\n[trajectory]\nspokes = {}\nsamples = {}\ntr = {:?}\nangle_step_deg = {:?}",
            self.n_spokes, self.n_samples, self.tr, self.angle_step_deg
        );
        let _ = writeln!(s, "\n[coils]\ncount = {}\nseed = {}", self.n_coils, self.coil_seed);
        let _ = writeln!(s, "\n[noise]\nsnr_db = {:?}", self.snr_db);
        if let Some(sigma) = self.noise_sigma {
            let _ = writeln!(s, "sigma = {sigma:?}");
        }
        let _ = writeln!(
            s,
            "\n[grasp]\niterations = {}\ntv_weight = {:?}\nspokes_per_bin = {}\nlowres_fraction = {:?}\npower_iterations = {}\ninner_iterations = {}",
            g.iterations, g.tv_weight, g.spokes_per_bin, g.lowres_fraction, g.power_iterations, g.inner_iterations
        );
        let _ = writeln!(
            s,
            "\n[recon]\nrank = {}\ninit_steps = {}\ninit_lr = {:?}\ninit_jitter = {}\nfinetune_iters = {}\nfinetune_lr = {:?}\nfreeze_temporal_iters = {}\nspokes_per_batch = {}\nframe_spokes_per_bin = {}\nlattice_oversampling = {:?}\nactivation = {}",
            r.rank,
            r.init_steps,
            r.init_lr,
            r.init_jitter,
            r.finetune_iters,
            r.finetune_lr,
            r.freeze_temporal_iters,
            r.spokes_per_batch.unwrap_or(0),
            self.frame_spokes_per_bin,
            r.lattice_oversampling,
            activation_name(r.activation)
        );
        if let Some(t) = &r.frame_times {
            let _ = writeln!(s, "frame_times = {}", join(t));
        }
        let _ = writeln!(
            s,
            "adam_beta1 = {:?}\nadam_beta2 = {:?}\nadam_eps = {:?}",
            r.adam.beta1, r.adam.beta2, r.adam.eps
        );
        for (name, h) in [("spatial", &r.spatial_encoding), ("temporal", &r.temporal_encoding)] {
            let _ = writeln!(
                s,
                "{name}_levels = {}\n{name}_features = {}\n{name}_base_resolution = {}\n{name}_per_level_scale = {:?}\n{name}_log2_table_size = {}",
                h.levels, h.features_per_level, h.base_resolution, h.per_level_scale, h.log2_table_size
            );
        }
        let _ = writeln!(
            s,
            "\n[metrics]\nblob = {}\npatch_size = {}\nnoise_center = {}\nprofile_angles_deg = {}\nprofile_length = {:?}\nprofile_samples = {}\nxt_fraction = {:?}",
            p.blob,
            p.patch_size,
            join(&p.noise_center),
            join(&p.profile_angles_deg),
            p.profile_length,
            p.profile_samples,
            self.xt_fraction
        );
        if let Some(row) = self.xt_row {
            let _ = writeln!(s, "xt_row = {row}");
        }
        let _ = writeln!(s, "\n[output]\ndir = {}", self.output_dir.display());
        s
    }

    pub fn parse(text: &str) -> AppResult<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut blobs = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| AppError::Config(format!("line {}: {m}", no + 1));
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| at(format!("malformed section header `{line}`")))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if section == "phantom" && key == "blob" {
                blobs.push(parse_blob(value).map_err(at)?);
            } else {
                cfg.set(&section, key, value).map_err(at)?;
            }
        }
        cfg.phantom.blobs = if blobs.is_empty() {
            PhantomSpec::beating_heart(cfg.phantom.fov, cfg.phantom.cardiac_period).blobs
        } else {
            blobs
        };
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse `{v}`"))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>, String> {
            v.split(',').map(|x| num::<f64>(key, x.trim())).collect()
        }
        let r = &mut self.recon;
        let full = format!("{section}.{key}");
        match (section, key) {
            ("", "seed") => self.seed = num(key, v)?,
            ("phantom", "fov") => self.phantom.fov = num(key, v)?,
            ("phantom", "cardiac_period") => self.phantom.cardiac_period = num(key, v)?,
            ("grid", "size") => self.grid_size = num(key, v)?,
            ("trajectory", "spokes") => self.n_spokes = num(key, v)?,
            ("trajectory", "samples") => self.n_samples = num(key, v)?,
            ("trajectory", "tr") => self.tr = num(key, v)?,
            ("trajectory", "angle_step_deg") => self.angle_step_deg = num(key, v)?,
            ("coils", "count") => self.n_coils = num(key, v)?,
            ("coils", "seed") => self.coil_seed = num(key, v)?,
            ("noise", "snr_db") => self.snr_db = num(key, v)?,
            ("noise", "sigma") => self.noise_sigma = Some(num(key, v)?),
            ("grasp", "iterations") => self.grasp.iterations = num(key, v)?,
            ("grasp", "tv_weight") => self.grasp.tv_weight = num(key, v)?,
            ("grasp", "spokes_per_bin") => self.grasp.spokes_per_bin = num(key, v)?,
            ("grasp", "lowres_fraction") => self.grasp.lowres_fraction = num(key, v)?,
            ("grasp", "power_iterations") => self.grasp.power_iterations = num(key, v)?,
            ("grasp", "inner_iterations") => self.grasp.inner_iterations = num(key, v)?,
            ("recon", "rank") => r.rank = num(key, v)?,
            ("recon", "init_steps") => r.init_steps = num(key, v)?,
            ("recon", "init_lr") => r.init_lr = num(key, v)?,
            ("recon", "init_jitter") => r.init_jitter = num(key, v)?,
            ("recon", "finetune_iters") => r.finetune_iters = num(key, v)?,
            ("recon", "finetune_lr") => r.finetune_lr = num(key, v)?,
            ("recon", "freeze_temporal_iters") => r.freeze_temporal_iters = num(key, v)?,
            ("recon", "spokes_per_batch") => {
                let b: usize = num(key, v)?;
                r.spokes_per_batch = (b > 0).then_some(b);
            }
            ("recon", "frame_spokes_per_bin") => self.frame_spokes_per_bin = num(key, v)?,
            ("recon", "frame_times") => r.frame_times = Some(list(key, v)?),
            ("recon", "lattice_oversampling") => r.lattice_oversampling = num(key, v)?,
            ("recon", "activation") => {
                r.activation = match v {
                    "relu" => Activation::Relu,
                    "tanh" => Activation::Tanh,
                    _ => return Err(format!("activation: expected relu or tanh, got `{v}`")),
                }
            }
            ("recon", "adam_beta1") => r.adam.beta1 = num(key, v)?,
            ("recon", "adam_beta2") => r.adam.beta2 = num(key, v)?,
            ("recon", "adam_eps") => r.adam.eps = num(key, v)?,
            ("recon", k) if k.starts_with("spatial_") || k.starts_with("temporal_") => {
                let (net, field) = k.split_once('_').unwrap_or_default();
                let h: &mut HashGridConfig = if net == "spatial" { &mut r.spatial_encoding } else { &mut r.temporal_encoding };
                match field {
                    "levels" => h.levels = num(key, v)?,
                    "features" => h.features_per_level = num(key, v)?,
                    "base_resolution" => h.base_resolution = num(key, v)?,
                    "per_level_scale" => h.per_level_scale = num(key, v)?,
                    "log2_table_size" => h.log2_table_size = num(key, v)?,
                    _ => return Err(format!("unknown key `{full}`")),
                }
            }
            ("metrics", "blob") => self.probes.blob = num(key, v)?,
            ("metrics", "patch_size") => self.probes.patch_size = num(key, v)?,
            ("metrics", "noise_center") => {
                let c = list(key, v)?;
                if c.len() != 2 {
                    return Err(format!("noise_center: expected two values, got {}", c.len()));
                }
                self.probes.noise_center = [c[0], c[1]];
            }
            ("metrics", "profile_angles_deg") => self.probes.profile_angles_deg = list(key, v)?,
            ("metrics", "profile_length") => self.probes.profile_length = num(key, v)?,
            ("metrics", "profile_samples") => self.probes.profile_samples = num(key, v)?,
            ("metrics", "xt_row") => self.xt_row = Some(num(key, v)?),
            ("metrics", "xt_fraction") => self.xt_fraction = num(key, v)?,
            ("output", "dir") => self.output_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key `{full}`")),
        }
        Ok(())
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `--config`, else the environment variable, else defaults.
    pub fn resolve(flag: Option<&Path>) -> AppResult<Self> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        match flag.map(Path::to_path_buf).or(from_env) {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }
}
