//! The command implementations, callable without the CLI.

use std::path::{Path, PathBuf};

use spokenet_core::baselines::{grasp_baseline, nufft_baseline};
use spokenet_core::inr::CoordinateNetwork;
use spokenet_core::metrics::{
    cardiac_phases, moving_columns, nearest_pixel, nrmse_psnr, reference_free_metrics, xt_profile, xt_rmse, MetricsReport,
};
use spokenet_core::phantom::{make_coil_maps, render_dynamic, CoilMaps};
use spokenet_core::recon::{fine_tune_observed, fit_to_bases, infer, LogEntry, TrainLog};
use spokenet_core::subspace::{crop_center, grasp_reconstruct, interpolate_bases, matched_grid, svd_subspace, SubspaceModel};
use spokenet_core::trajectory::{bin_spokes, golden_angle_geometry, noise_sigma_for_snr, simulate_acquisition, SpokeSet};
use spokenet_core::{DynamicImage, GridSpec};

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult, Stage};
use crate::io;
use crate::tensor::TensorFile;

pub fn coil_maps(cfg: &ExperimentConfig) -> AppResult<CoilMaps> {
    make_coil_maps(cfg.n_coils, &cfg.grid()?, cfg.coil_seed).stage("coil maps")
}

pub struct Simulation {
    pub spokes: SpokeSet,
    /// Ground truth at the inference frame times.
    pub truth: DynamicImage,
    pub noise_sigma: f64,
}

/// Noisy spokes from the analytic phantom plus the rendered ground truth.
pub fn simulate(cfg: &ExperimentConfig) -> AppResult<Simulation> {
    let grid = cfg.grid()?;
    let coils = coil_maps(cfg)?;
    let geometry = golden_angle_geometry(cfg.n_spokes, cfg.n_samples, cfg.fov(), cfg.tr, cfg.angle_step_deg).stage("trajectory")?;
    let clean = simulate_acquisition(&cfg.phantom, &coils, geometry.clone(), cfg.tr, 0.0, cfg.seed).stage("simulate")?;
    let noise_sigma = cfg.noise_sigma.unwrap_or_else(|| noise_sigma_for_snr(&clean.samples, cfg.snr_db));
    let spokes = if noise_sigma > 0.0 {
        simulate_acquisition(&cfg.phantom, &coils, geometry, cfg.tr, noise_sigma, cfg.seed).stage("simulate")?
    } else {
        clean
    };
    let truth = render_dynamic(&cfg.phantom, &cfg.frame_times(), &grid).stage("render truth")?;
    Ok(Simulation { spokes, truth, noise_sigma })
}

/// Intermediate results of the initialization stages.
pub struct InitStages {
    pub lowres_grasp: DynamicImage,
    pub svd: SubspaceModel,
    pub targets: SubspaceModel,
}

pub struct Reconstruction {
    pub spatial: CoordinateNetwork,
    pub temporal: CoordinateNetwork,
    pub init: Option<InitStages>,
    pub init_log: TrainLog,
    pub finetune_log: TrainLog,
    pub image: DynamicImage,
    pub window: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ReconOptions {
    /// Skip the GRASP/SVD initialization (ablation).
    pub skip_init: bool,
}

/// Low-resolution GRASP, SVD and basis interpolation.
pub fn init_stages(cfg: &ExperimentConfig, spokes: &SpokeSet, coils: &CoilMaps, grid: &GridSpec) -> AppResult<InitStages> {
    let low = crop_center(spokes, cfg.grasp.lowres_fraction).stage("crop_center")?;
    let low_grid = matched_grid(&low, cfg.fov()).stage("crop_center")?;
    let bins = bin_spokes(&low.geometry, cfg.grasp.spokes_per_bin).stage("bin")?;
    let lowres_grasp = grasp_reconstruct(&low, &bins, coils, &low_grid, &cfg.grasp).stage("grasp_reconstruct")?;
    let svd = svd_subspace(&lowres_grasp, cfg.recon.rank).stage("svd_subspace")?;
    let times: Vec<f64> = spokes.geometry.iter().map(|g| g.time).collect();
    let targets = interpolate_bases(&svd, grid, &times).stage("interpolate_bases")?;
    Ok(InitStages { lowres_grasp, svd, targets })
}

/// The full pipeline; `observer` sees every fine-tune iteration.
pub fn reconstruct_observed(
    cfg: &ExperimentConfig,
    spokes: &SpokeSet,
    opts: &ReconOptions,
    observer: &mut dyn FnMut(&LogEntry, &CoordinateNetwork, &CoordinateNetwork),
) -> AppResult<Reconstruction> {
    let grid = cfg.grid()?;
    let coils = coil_maps(cfg)?;
    let pipeline = cfg.pipeline();
    let recon = &pipeline.recon;
    let window = spokes.time_window();
    let (mut spatial, mut temporal) = recon.networks().stage("init_parameters")?;
    let (init, init_log) = if opts.skip_init {
        (None, TrainLog::default())
    } else {
        let stages = init_stages(cfg, spokes, &coils, &grid)?;
        let log = fit_to_bases(&mut spatial, &mut temporal, &stages.targets, window, recon).stage("fit_to_bases")?;
        (Some(stages), log)
    };
    let finetune_log =
        fine_tune_observed(&mut spatial, &mut temporal, spokes, &coils, cfg.fov(), recon, observer).stage("fine_tune")?;
    let image = infer(&spatial, &temporal, &grid, &cfg.frame_times(), window).stage("infer")?;
    Ok(Reconstruction { spatial, temporal, init, init_log, finetune_log, image, window })
}

pub fn reconstruct(cfg: &ExperimentConfig, spokes: &SpokeSet, opts: &ReconOptions) -> AppResult<Reconstruction> {
    reconstruct_observed(cfg, spokes, opts, &mut |_, _, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Nufft,
    Grasp,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Nufft => "nufft",
            BaselineMethod::Grasp => "grasp",
        }
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nufft" => Ok(Self::Nufft),
            "grasp" => Ok(Self::Grasp),
            _ => Err(format!("unknown baseline method `{s}` (expected nufft or grasp)")),
        }
    }
}

pub fn baseline(cfg: &ExperimentConfig, spokes: &SpokeSet, method: BaselineMethod, spokes_per_bin: usize) -> AppResult<DynamicImage> {
    let grid = cfg.grid()?;
    let coils = coil_maps(cfg)?;
    match method {
        BaselineMethod::Nufft => nufft_baseline(spokes, &coils, spokes_per_bin, &grid).stage("nufft_baseline"),
        BaselineMethod::Grasp => grasp_baseline(spokes, &coils, spokes_per_bin, &grid, &cfg.grasp).stage("grasp_baseline"),
    }
}

/// Each requested time takes the frame with the nearest time (first on ties).
pub fn hold_frames(image: &DynamicImage, times: &[f64]) -> AppResult<DynamicImage> {
    if image.n_frames() == 0 {
        return Err(AppError::Config("image has no frames".into()));
    }
    let mut out = DynamicImage::zeros(image.grid, times.to_vec());
    for (i, &t) in times.iter().enumerate() {
        let nearest = (0..image.n_frames())
            .min_by(|&a, &b| (image.frame_times[a] - t).abs().total_cmp(&(image.frame_times[b] - t).abs()))
            .expect("at least one frame");
        out.frame_mut(i).copy_from_slice(image.frame(nearest));
    }
    Ok(out)
}

/// Row through the mean centre of the profiled blob, unless configured.
pub fn xt_row(cfg: &ExperimentConfig, grid: &GridSpec) -> AppResult<usize> {
    if let Some(r) = cfg.xt_row {
        return Ok(r);
    }
    let blob = cfg
        .phantom
        .blobs
        .get(cfg.probes.blob)
        .ok_or_else(|| AppError::Config(format!("metrics.blob {} does not exist", cfg.probes.blob)))?;
    Ok(nearest_pixel(grid, [blob.center_x.mean, blob.center_y.mean]).1)
}

/// Reference-free metrics, plus NRMSE/PSNR and x–t RMSE when a truth is given.
///
/// A reconstruction on other frame times is compared after [`hold_frames`].
pub fn evaluate(cfg: &ExperimentConfig, recon: &DynamicImage, truth: Option<&DynamicImage>) -> AppResult<MetricsReport> {
    let (snr_db, edge_sharpness) = reference_free_metrics(recon, &cfg.phantom, &cfg.probes).stage("metrics")?;
    let mean_edge_sharpness =
        (!edge_sharpness.is_empty()).then(|| edge_sharpness.iter().map(|e| e.2).sum::<f64>() / edge_sharpness.len() as f64);
    let mut report = MetricsReport { snr_db, edge_sharpness, mean_edge_sharpness, fidelity: None, xt_rmse: None };
    if let Some(truth) = truth {
        let held;
        let recon = if recon.frame_times == truth.frame_times {
            recon
        } else {
            held = hold_frames(recon, &truth.frame_times)?;
            &held
        };
        report.fidelity = Some(nrmse_psnr(recon, truth).stage("metrics")?);
        let row = xt_row(cfg, &truth.grid)?;
        let truth_xt = xt_profile(truth, row).stage("metrics")?;
        let columns = moving_columns(&truth_xt, cfg.xt_fraction);
        if !columns.is_empty() {
            let recon_xt = xt_profile(recon, row).stage("metrics")?;
            report.xt_rmse = Some(xt_rmse(&recon_xt, &truth_xt, &columns).stage("metrics")?);
        }
    }
    Ok(report)
}

/// ES/ED frame indices of the configured blob among `times`.
pub fn phase_frames(cfg: &ExperimentConfig, times: &[f64]) -> AppResult<[usize; 2]> {
    let [es, ed] = cardiac_phases(&cfg.phantom, times, cfg.probes.blob).stage("metrics")?;
    Ok([es.frame, ed.frame])
}

/// Creates `dir` and returns `dir/name`.
pub fn output_path(dir: &Path, name: &str) -> AppResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    Ok(dir.join(name))
}

/// Writes the checkpoint, image and training log of a reconstruction, plus
/// the initialization stages when `dump_stages` is set.
pub fn write_reconstruction(dir: &Path, r: &Reconstruction, dump_stages: bool) -> AppResult<()> {
    io::checkpoint_to_file(&r.spatial, &r.temporal, r.window).write(&output_path(dir, "checkpoint.spkt")?)?;
    io::dynamic_to_file(&r.image).write(&output_path(dir, "recon.spkt")?)?;
    io::write_train_log(&output_path(dir, "train_log.csv")?, &[&r.init_log, &r.finetune_log])?;
    if dump_stages {
        if let Some(init) = &r.init {
            io::dynamic_to_file(&init.lowres_grasp).write(&output_path(dir, "stage_grasp_lowres.spkt")?)?;
            io::subspace_to_file(&init.svd).write(&output_path(dir, "stage_svd.spkt")?)?;
            io::subspace_to_file(&init.targets).write(&output_path(dir, "stage_targets.spkt")?)?;
        }
    }
    Ok(())
}

/// Reads the dynamic image in `path`.
pub fn load_image(path: &Path) -> AppResult<DynamicImage> {
    io::read_dynamic(path)
}

pub fn write_image(path: &Path, image: &DynamicImage) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    TensorFile::write(&io::dynamic_to_file(image), path)
}
