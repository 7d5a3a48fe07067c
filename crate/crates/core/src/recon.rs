//! Training and inference of the spatial and temporal coordinate networks.
//!
//! The pipeline is: low-resolution binned GRASP, truncated SVD, interpolation
//! of the bases to the target grid and spoke times, an MSE fit of both
//! networks to those bases, and a fine-tune against every acquired spoke
//! through the Fourier slice operator.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape, Error, Result};
use crate::fourier::{Fft, SliceLattice};
use crate::image::{interpolate_on, DynamicImage, GridSpec};
use crate::inr::{
    complex_to_real_pairs, real_pairs_to_complex, scatter_gradient, Activation, AdamConfig, AdamState,
    CoordinateNetwork, Encoding, HashGridConfig, NetworkGrads,
};
use crate::phantom::CoilMaps;
use crate::rng::Rng;
use crate::subspace::{crop_center, grasp_reconstruct, interpolate_bases, matched_grid, svd_subspace, GraspConfig, SubspaceModel};
use crate::trajectory::{bin_center_times, bin_spokes, ramp_weights, SpokeGeometry, SpokeSet};
use crate::Complex64;

/// Readout oversampling of the training lattice: `M × M` points before the
/// support disk is applied.
pub const TRAINING_LATTICE_OVERSAMPLING: f64 = 1.0;

/// Spokes evaluated concurrently before their gradients are merged.
const SPOKE_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub rank: usize,
    pub init_steps: usize,
    pub init_lr: f64,
    /// Fit the spatial network at grid points jittered within their pixel,
    /// against bilinearly interpolated bases, instead of at the pixel centres.
    pub init_jitter: bool,
    pub finetune_iters: usize,
    pub finetune_lr: f64,
    pub freeze_temporal_iters: usize,
    /// `None` trains on all spokes per optimizer step.
    pub spokes_per_batch: Option<usize>,
    /// `None` uses the bin centres of 20 spokes per bin.
    pub frame_times: Option<Vec<f64>>,
    pub seed: u64,
    pub lattice_oversampling: f64,
    pub spatial_encoding: HashGridConfig,
    pub temporal_encoding: HashGridConfig,
    pub activation: Activation,
    pub adam: AdamConfig,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            rank: 6,
            init_steps: 1000,
            init_lr: 0.01,
            init_jitter: true,
            finetune_iters: 150,
            finetune_lr: 3e-5,
            freeze_temporal_iters: 10,
            spokes_per_batch: None,
            frame_times: None,
            seed: 0,
            lattice_oversampling: TRAINING_LATTICE_OVERSAMPLING,
            spatial_encoding: HashGridConfig::standard(2),
            temporal_encoding: HashGridConfig::standard(1),
            activation: Activation::Relu,
            adam: AdamConfig::default(),
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(invalid!("rank must be positive"));
        }
        for (name, lr) in [("init_lr", self.init_lr), ("finetune_lr", self.finetune_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(invalid!("{name} must be positive, got {lr}"));
            }
        }
        if self.spokes_per_batch == Some(0) {
            return Err(invalid!("spokes_per_batch must be positive"));
        }
        if !(self.lattice_oversampling >= 1.0 && self.lattice_oversampling.is_finite()) {
            return Err(invalid!("lattice oversampling must be at least 1"));
        }
        if self.spatial_encoding.input_dim != 2 || self.temporal_encoding.input_dim != 1 {
            return Err(invalid!("spatial encoding must be 2D and temporal encoding 1D"));
        }
        self.spatial_encoding.validate()?;
        self.temporal_encoding.validate()
    }

    /// Freshly initialized `(spatial, temporal)` networks.
    pub fn networks(&self) -> Result<(CoordinateNetwork, CoordinateNetwork)> {
        self.validate()?;
        let mut s = CoordinateNetwork::new(self.spatial_encoding, self.rank, self.activation)?;
        let mut t = CoordinateNetwork::new(self.temporal_encoding, self.rank, self.activation)?;
        s.init_parameters(self.seed);
        t.init_parameters(self.seed ^ 0x5EED_0001);
        Ok((s, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainPhase {
    InitSpatial,
    InitTemporal,
    /// Fine-tune iteration with the temporal network frozen.
    FineTuneFrozen,
    FineTune,
}

impl TrainPhase {
    pub fn name(self) -> &'static str {
        match self {
            TrainPhase::InitSpatial => "init_spatial",
            TrainPhase::InitTemporal => "init_temporal",
            TrainPhase::FineTuneFrozen => "finetune_frozen",
            TrainPhase::FineTune => "finetune",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub phase: TrainPhase,
    /// Loss before the step's update.
    pub loss: f64,
    /// Seconds since training started (0 without `std`).
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn losses(&self, phases: &[TrainPhase]) -> Vec<f64> {
        self.entries.iter().filter(|e| phases.contains(&e.phase)).map(|e| e.loss).collect()
    }

    /// Fine-tune losses, frozen and unfrozen.
    pub fn finetune_losses(&self) -> Vec<f64> {
        self.losses(&[TrainPhase::FineTuneFrozen, TrainPhase::FineTune])
    }
}

struct Stopwatch {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

/// Grid pixel centres mapped to `[0, 1]²` (`x/fov + ½`).
pub fn spatial_coordinates(grid: &GridSpec) -> Vec<f64> {
    grid.coordinates().iter().flat_map(|p| [p[0] / grid.fov + 0.5, p[1] / grid.fov + 0.5]).collect()
}

fn check_rank(net: &CoordinateNetwork, k: usize, what: &str) -> Result<()> {
    if net.rank != k {
        return Err(shape!("{what} network has rank {}, expected {k}", net.rank));
    }
    Ok(())
}

/// Mean over points of `Σ_j |G_j − U_j|²` and its output gradient.
fn mse_against(out: &[f64], targets: &[Complex64], k: usize) -> (f64, Vec<f64>) {
    let n = targets.len() / k;
    let target_pairs = complex_to_real_pairs(targets, k);
    let mut loss = 0.0;
    let mut dout = vec![0.0; out.len()];
    for ((d, o), t) in dout.iter_mut().zip(out).zip(&target_pairs) {
        let r = o - t;
        loss += r * r;
        *d = 2.0 * r / n as f64;
    }
    (loss / n as f64, dout)
}

fn fit_one(
    net: &mut CoordinateNetwork,
    batch: &mut dyn FnMut() -> (Vec<f64>, Vec<Complex64>),
    cfg: &ReconConfig,
    phase: TrainPhase,
    group: &str,
    clock: &Stopwatch,
    log: &mut TrainLog,
) -> Result<()> {
    let mut adam = AdamState::new(net, cfg.adam);
    let mut grads = NetworkGrads::new(net);
    for step in 0..cfg.init_steps {
        let (coords, targets) = batch();
        let cache = net.forward(&coords)?;
        let (loss, dout) = mse_against(cache.output(), &targets, net.rank);
        if !loss.is_finite() {
            return Err(Error::NonFinite(alloc::format!("{group} initialization loss at step {step}")));
        }
        grads.clear();
        net.backward(&cache, &dout, &mut grads)?;
        adam.step(net, &grads, cfg.init_lr, group)?;
        log.entries.push(LogEntry { step, phase, loss, elapsed: clock.elapsed() });
    }
    Ok(())
}

/// Pixel centres moved uniformly within their pixel, with the bases
/// bilinearly interpolated there (zero outside the support disk).
fn jittered_batch(targets: &SubspaceModel, rng: &mut Rng) -> (Vec<f64>, Vec<Complex64>) {
    let grid = &targets.grid;
    let (k, d) = (targets.rank, grid.spacing());
    let planes: Vec<Vec<Complex64>> = (0..k).map(|j| targets.spatial.iter().skip(j).step_by(k).copied().collect()).collect();
    let mut coords = Vec::with_capacity(grid.len() * 2);
    let mut values = Vec::with_capacity(grid.len() * k);
    for p in grid.coordinates() {
        let q = [p[0] + (rng.uniform() - 0.5) * d, p[1] + (rng.uniform() - 0.5) * d];
        coords.extend([q[0] / grid.fov + 0.5, q[1] / grid.fov + 0.5]);
        values.extend(planes.iter().map(|plane| interpolate_on(grid, plane, q)));
    }
    (coords, values)
}

/// Fits both networks to interpolated bases by Adam on the mean squared
/// error: the spatial network on the target grid (jittered when
/// `cfg.init_jitter` is set), the temporal network at the target times
/// (normalized by `window`).
pub fn fit_to_bases(
    spatial: &mut CoordinateNetwork,
    temporal: &mut CoordinateNetwork,
    targets: &SubspaceModel,
    window: f64,
    cfg: &ReconConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    targets.validate()?;
    if targets.rank != cfg.rank {
        return Err(shape!("targets have rank {}, configuration expects {}", targets.rank, cfg.rank));
    }
    check_rank(spatial, cfg.rank, "spatial")?;
    check_rank(temporal, cfg.rank, "temporal")?;
    if !(window > 0.0 && window.is_finite()) {
        return Err(invalid!("acquisition window must be positive"));
    }
    let clock = Stopwatch::start();
    let mut log = TrainLog::default();
    let mut rng = Rng::with_stream(cfg.seed, 0x717E);
    let s_coords = spatial_coordinates(&targets.grid);
    let mut spatial_batch = || {
        if cfg.init_jitter {
            jittered_batch(targets, &mut rng)
        } else {
            (s_coords.clone(), targets.spatial.clone())
        }
    };
    fit_one(spatial, &mut spatial_batch, cfg, TrainPhase::InitSpatial, "spatial", &clock, &mut log)?;
    let t_coords: Vec<f64> = targets.frame_times.iter().map(|t| t / window).collect();
    let mut temporal_batch = || (t_coords.clone(), targets.temporal.clone());
    fit_one(temporal, &mut temporal_batch, cfg, TrainPhase::InitTemporal, "temporal", &clock, &mut log)?;
    Ok(log)
}

/// Geometry shared by every spoke of one acquisition.
#[derive(Debug, Clone)]
pub struct SliceContext {
    pub fov: f64,
    /// Acquisition window used to normalize spoke times.
    pub window: f64,
    pub oversampling: f64,
    fft: Fft,
}

impl SliceContext {
    pub fn new(spokes: &SpokeSet, fov: f64, oversampling: f64) -> Result<Self> {
        spokes.validate()?;
        let first = spokes.geometry.first().ok_or_else(|| invalid!("empty spoke set"))?;
        let lattice = SliceLattice::new(first, fov, oversampling)?;
        Ok(Self { fov, window: spokes.time_window(), oversampling, fft: Fft::new(lattice.n_read) })
    }

    fn lattice(&self, spoke: &SpokeGeometry) -> Result<SliceLattice> {
        let l = SliceLattice::new(spoke, self.fov, self.oversampling)?;
        if l.n_read != self.fft.len() {
            return Err(shape!("spoke {} needs a {}-point readout, context has {}", spoke.index, l.n_read, self.fft.len()));
        }
        Ok(l)
    }
}

/// Loss of one spoke with everything needed to merge its gradients later.
struct SpokeTerms {
    loss: f64,
    spatial_mlp: Vec<f64>,
    encoding: Encoding,
    dfeatures: Vec<f64>,
    /// `∂L/∂c_j` for the spoke's temporal values.
    dtemporal: Vec<Complex64>,
}

/// Ramp-weighted data consistency of one spoke given its temporal values `c`.
#[allow(clippy::too_many_arguments)]
fn spoke_terms(
    spatial: &CoordinateNetwork,
    c: &[Complex64],
    spoke: &SpokeGeometry,
    samples: &[Complex64],
    coils: &CoilMaps,
    ramp: &[f64],
    ctx: &SliceContext,
) -> Result<SpokeTerms> {
    let k = spatial.rank;
    let m = spoke.n_samples;
    let n_coils = coils.n_coils();
    if samples.len() != n_coils * m || ramp.len() != m || c.len() != k {
        return Err(shape!("spoke {}: {} samples for {n_coils} coils of {m}", spoke.index, samples.len()));
    }
    let lattice = ctx.lattice(spoke)?;
    let support = lattice.support();
    let coords: Vec<f64> = support.iter().flat_map(|p| [p.pos[0] / ctx.fov + 0.5, p.pos[1] / ctx.fov + 0.5]).collect();
    let cache = spatial.forward(&coords)?;
    let s = real_pairs_to_complex(cache.output(), k);
    let frame: Vec<Complex64> = s.chunks_exact(k).map(|row| row.iter().zip(c).map(|(a, b)| a * b).sum()).collect();

    let zero = Complex64::new(0.0, 0.0);
    let norm = (n_coils * m) as f64;
    let mut loss = 0.0;
    let mut dframe = vec![zero; support.len()];
    let mut sens = vec![zero; support.len()];
    let mut proj = vec![zero; lattice.n_read];
    let mut y_hat = vec![zero; m];
    let mut g = vec![zero; m];
    for coil in 0..n_coils {
        proj.fill(zero);
        for ((p, s), f) in support.iter().zip(sens.iter_mut()).zip(&frame) {
            *s = coils.value(coil, p.pos);
            proj[p.read] += *s * f;
        }
        lattice.projection_to_spoke(&ctx.fft, &mut proj, &mut y_hat);
        let y = &samples[coil * m..(coil + 1) * m];
        for i in 0..m {
            let r = y_hat[i] - y[i];
            let w2 = ramp[i] * ramp[i];
            loss += w2 * r.norm_sqr();
            g[i] = r * (2.0 * w2 / norm);
        }
        lattice.spoke_to_projection_adjoint(&ctx.fft, &g, &mut proj);
        for ((p, s), d) in support.iter().zip(&sens).zip(dframe.iter_mut()) {
            *d += s.conj() * proj[p.read];
        }
    }
    loss /= norm;
    if !loss.is_finite() {
        return Err(Error::NonFinite(alloc::format!("loss of spoke {}", spoke.index)));
    }
    let mut dtemporal = vec![zero; k];
    let mut ds = vec![zero; s.len()];
    for (p, d) in dframe.iter().enumerate() {
        for j in 0..k {
            dtemporal[j] += d * s[p * k + j].conj();
            ds[p * k + j] = d * c[j].conj();
        }
    }
    let dout = complex_to_real_pairs(&ds, k);
    let mut spatial_mlp = vec![0.0; spatial.mlp.params.len()];
    let dfeatures = spatial.mlp.backward(&cache.mlp, &dout, &mut spatial_mlp)?;
    Ok(SpokeTerms { loss, spatial_mlp, encoding: cache.encoding, dfeatures, dtemporal })
}

/// Loss and parameter gradients of one spoke.
#[derive(Debug, Clone)]
pub struct SpokeLoss {
    pub loss: f64,
    pub spatial: NetworkGrads,
    pub temporal: NetworkGrads,
}

/// `Σ_c Σ_m w_m²·|ŷ_m − y_m|² / (C·M)` for one spoke, where `ŷ` is the Fourier
/// slice of `S_c · Σ_j spatial_j · temporal_j(t)` on the spoke's rotated lattice.
pub fn spoke_loss(
    spatial: &CoordinateNetwork,
    temporal: &CoordinateNetwork,
    spoke: &SpokeGeometry,
    samples: &[Complex64],
    coils: &CoilMaps,
    ramp: &[f64],
    ctx: &SliceContext,
) -> Result<SpokeLoss> {
    check_rank(temporal, spatial.rank, "temporal")?;
    let tcache = temporal.forward(&[spoke.time / ctx.window])?;
    let c = real_pairs_to_complex(tcache.output(), temporal.rank);
    let terms = spoke_terms(spatial, &c, spoke, samples, coils, ramp, ctx)?;
    let mut s_grads = NetworkGrads::new(spatial);
    s_grads.add_mlp(&terms.spatial_mlp);
    scatter_gradient(&spatial.encoding, &terms.encoding, &terms.dfeatures, &mut s_grads.table)?;
    let mut t_grads = NetworkGrads::new(temporal);
    temporal.backward(&tcache, &complex_to_real_pairs(&terms.dtemporal, temporal.rank), &mut t_grads)?;
    Ok(SpokeLoss { loss: terms.loss, spatial: s_grads, temporal: t_grads })
}

/// Spoke order of each optimizer step within one iteration.
fn batches(n: usize, per_batch: Option<usize>, rng: &mut Rng) -> Vec<Vec<usize>> {
    match per_batch {
        None => vec![(0..n).collect()],
        Some(b) if b >= n => vec![(0..n).collect()],
        Some(b) => {
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = ((rng.uniform() * (i + 1) as f64) as usize).min(i);
                order.swap(i, j);
            }
            order.chunks(b).map(|c| c.to_vec()).collect()
        }
    }
}

/// Fine-tunes both networks against every spoke. Each iteration averages the
/// spoke gradients over a batch (all spokes by default) and takes one Adam
/// step per network; the temporal network is held fixed for the first
/// `freeze_temporal_iters` iterations.
pub fn fine_tune(
    spatial: &mut CoordinateNetwork,
    temporal: &mut CoordinateNetwork,
    spokes: &SpokeSet,
    coils: &CoilMaps,
    fov: f64,
    cfg: &ReconConfig,
) -> Result<TrainLog> {
    fine_tune_observed(spatial, temporal, spokes, coils, fov, cfg, &mut |_, _, _| {})
}

/// [`fine_tune`] calling `observer` after every iteration with the new log
/// entry and the updated networks.
pub fn fine_tune_observed(
    spatial: &mut CoordinateNetwork,
    temporal: &mut CoordinateNetwork,
    spokes: &SpokeSet,
    coils: &CoilMaps,
    fov: f64,
    cfg: &ReconConfig,
    observer: &mut dyn FnMut(&LogEntry, &CoordinateNetwork, &CoordinateNetwork),
) -> Result<TrainLog> {
    cfg.validate()?;
    check_rank(spatial, cfg.rank, "spatial")?;
    check_rank(temporal, cfg.rank, "temporal")?;
    if coils.n_coils() != spokes.n_coils {
        return Err(shape!("{} coil maps for {} coils", coils.n_coils(), spokes.n_coils));
    }
    let ctx = SliceContext::new(spokes, fov, cfg.lattice_oversampling)?;
    let ramp = ramp_weights(spokes.n_samples())?.0;
    let k = cfg.rank;
    let per_spoke = spokes.n_coils * spokes.n_samples();
    let mut s_adam = AdamState::new(spatial, cfg.adam);
    let mut t_adam = AdamState::new(temporal, cfg.adam);
    let mut s_grads = NetworkGrads::new(spatial);
    let mut t_grads = NetworkGrads::new(temporal);
    let mut rng = Rng::with_stream(cfg.seed, 0xBA7C);
    let clock = Stopwatch::start();
    let mut log = TrainLog::default();
    for it in 0..cfg.finetune_iters {
        let frozen = it < cfg.freeze_temporal_iters;
        let mut total = 0.0;
        for batch in batches(spokes.n_spokes(), cfg.spokes_per_batch, &mut rng) {
            let t_coords: Vec<f64> = batch.iter().map(|&i| spokes.geometry[i].time / ctx.window).collect();
            let tcache = temporal.forward(&t_coords)?;
            let c = real_pairs_to_complex(tcache.output(), k);
            s_grads.clear();
            t_grads.clear();
            let mut dt = vec![Complex64::new(0.0, 0.0); batch.len() * k];
            for (chunk_no, chunk) in batch.chunks(SPOKE_CHUNK).enumerate() {
                let terms = crate::par::try_map_indexed(chunk.len(), |q| {
                    let i = chunk[q];
                    let pos = chunk_no * SPOKE_CHUNK + q;
                    spoke_terms(
                        spatial,
                        &c[pos * k..(pos + 1) * k],
                        &spokes.geometry[i],
                        &spokes.samples[i * per_spoke..(i + 1) * per_spoke],
                        coils,
                        &ramp,
                        &ctx,
                    )
                })?;
                for (q, t) in terms.into_iter().enumerate() {
                    let pos = chunk_no * SPOKE_CHUNK + q;
                    total += t.loss;
                    s_grads.add_mlp(&t.spatial_mlp);
                    scatter_gradient(&spatial.encoding, &t.encoding, &t.dfeatures, &mut s_grads.table)?;
                    dt[pos * k..(pos + 1) * k].copy_from_slice(&t.dtemporal);
                }
            }
            let inv = 1.0 / batch.len() as f64;
            s_grads.scale(inv);
            for d in &mut dt {
                *d *= inv;
            }
            s_adam.step(spatial, &s_grads, cfg.finetune_lr, "spatial")?;
            if !frozen {
                temporal.backward(&tcache, &complex_to_real_pairs(&dt, k), &mut t_grads)?;
                t_adam.step(temporal, &t_grads, cfg.finetune_lr, "temporal")?;
            }
        }
        let phase = if frozen { TrainPhase::FineTuneFrozen } else { TrainPhase::FineTune };
        let entry = LogEntry { step: it, phase, loss: total / spokes.n_spokes() as f64, elapsed: clock.elapsed() };
        observer(&entry, spatial, temporal);
        log.entries.push(entry);
    }
    Ok(log)
}

/// Mean spoke loss of the current networks over a spoke set.
pub fn mean_spoke_loss(
    spatial: &CoordinateNetwork,
    temporal: &CoordinateNetwork,
    spokes: &SpokeSet,
    coils: &CoilMaps,
    fov: f64,
    oversampling: f64,
) -> Result<f64> {
    check_rank(temporal, spatial.rank, "temporal")?;
    let ctx = SliceContext::new(spokes, fov, oversampling)?;
    let ramp = ramp_weights(spokes.n_samples())?.0;
    let k = spatial.rank;
    let t_coords: Vec<f64> = spokes.geometry.iter().map(|g| g.time / ctx.window).collect();
    let c = temporal.evaluate_complex(&t_coords)?;
    let per_spoke = spokes.n_coils * spokes.n_samples();
    let losses = crate::par::try_map_indexed(spokes.n_spokes(), |i| {
        spoke_terms(spatial, &c[i * k..(i + 1) * k], &spokes.geometry[i], &spokes.samples[i * per_spoke..(i + 1) * per_spoke], coils, &ramp, &ctx)
            .map(|t| t.loss)
    })?;
    Ok(losses.iter().sum::<f64>() / spokes.n_spokes() as f64)
}

/// `frame(t) = Σ_j spatial_j(grid) · temporal_j(t / window)`.
pub fn infer(
    spatial: &CoordinateNetwork,
    temporal: &CoordinateNetwork,
    grid: &GridSpec,
    frame_times: &[f64],
    window: f64,
) -> Result<DynamicImage> {
    grid.validate()?;
    check_rank(temporal, spatial.rank, "temporal")?;
    if frame_times.is_empty() {
        return Err(invalid!("no frame times requested"));
    }
    if let Some(t) = frame_times.iter().find(|t| !(**t >= 0.0 && **t <= window)) {
        return Err(invalid!("frame time {t} outside the acquisition window [0, {window}]"));
    }
    let k = spatial.rank;
    let s = spatial.evaluate_complex(&spatial_coordinates(grid))?;
    let t_coords: Vec<f64> = frame_times.iter().map(|t| t / window).collect();
    let c = temporal.evaluate_complex(&t_coords)?;
    let mut out = DynamicImage::zeros(*grid, frame_times.to_vec());
    for (tau, ct) in c.chunks_exact(k).enumerate() {
        for (v, row) in out.frame_mut(tau).iter_mut().zip(s.chunks_exact(k)) {
            *v = row.iter().zip(ct).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}

/// Everything the end-to-end pipeline needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fov: f64,
    /// Output grid size; `None` matches the readout's k-space extent.
    pub grid_size: Option<usize>,
    pub grasp: GraspConfig,
    pub recon: ReconConfig,
    /// `false` skips the GRASP/SVD initialization (ablation).
    pub initialize: bool,
}

impl PipelineConfig {
    pub fn new(fov: f64) -> Self {
        Self { fov, grid_size: None, grasp: GraspConfig::default(), recon: ReconConfig::default(), initialize: true }
    }
}

#[derive(Debug, Clone)]
pub struct ReconOutput {
    pub spatial: CoordinateNetwork,
    pub temporal: CoordinateNetwork,
    /// Low-resolution GRASP bases interpolated to the target grid and spoke times.
    pub init_targets: Option<SubspaceModel>,
    pub init_log: TrainLog,
    pub finetune_log: TrainLog,
    pub image: DynamicImage,
}

/// Initialization targets: low-resolution GRASP, rank-`k` SVD, interpolation
/// to `grid` and the spoke times.
pub fn initial_bases(spokes: &SpokeSet, coils: &CoilMaps, grid: &GridSpec, cfg: &PipelineConfig) -> Result<SubspaceModel> {
    let low = crop_center(spokes, cfg.grasp.lowres_fraction)?;
    let low_grid = matched_grid(&low, cfg.fov)?;
    let bins = bin_spokes(&low.geometry, cfg.grasp.spokes_per_bin)?;
    let dynamic = grasp_reconstruct(&low, &bins, coils, &low_grid, &cfg.grasp)?;
    let model = svd_subspace(&dynamic, cfg.recon.rank)?;
    let times: Vec<f64> = spokes.geometry.iter().map(|g| g.time).collect();
    interpolate_bases(&model, grid, &times)
}

/// Runs initialization (unless disabled), fine-tuning and inference.
pub fn reconstruct(spokes: &SpokeSet, coils: &CoilMaps, cfg: &PipelineConfig) -> Result<ReconOutput> {
    cfg.recon.validate()?;
    spokes.validate()?;
    let grid = match cfg.grid_size {
        Some(n) => GridSpec::new(n, cfg.fov)?,
        None => matched_grid(spokes, cfg.fov)?,
    };
    let window = spokes.time_window();
    let (mut spatial, mut temporal) = cfg.recon.networks()?;
    let (init_targets, init_log) = if cfg.initialize {
        let targets = initial_bases(spokes, coils, &grid, cfg)?;
        let log = fit_to_bases(&mut spatial, &mut temporal, &targets, window, &cfg.recon)?;
        (Some(targets), log)
    } else {
        (None, TrainLog::default())
    };
    let finetune_log = fine_tune(&mut spatial, &mut temporal, spokes, coils, cfg.fov, &cfg.recon)?;
    let times = match &cfg.recon.frame_times {
        Some(t) => t.clone(),
        None => bin_center_times(spokes.n_spokes(), spokes.tr, 20),
    };
    let image = infer(&spatial, &temporal, &grid, &times, window)?;
    Ok(ReconOutput { spatial, temporal, init_targets, init_log, finetune_log, image })
}
