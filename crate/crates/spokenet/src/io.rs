//! Conversions between pipeline values and files.

use std::path::Path;

use spokenet_core::inr::{Activation, CoordinateNetwork, HashGridConfig, Tensor};
use spokenet_core::metrics::MetricRow;
use spokenet_core::recon::TrainLog;
use spokenet_core::subspace::SubspaceModel;
use spokenet_core::trajectory::{SpokeGeometry, SpokeSet};
use spokenet_core::{DynamicImage, GridSpec};

use crate::error::{AppError, AppResult};
use crate::tensor::{Dtype, NamedTensor, TensorFile};

fn scalar(f: &TensorFile, name: &str) -> Result<f64, String> {
    Ok(f.require(name, Dtype::F64, Some(&[1]))?.values[0])
}

fn usize_of(v: f64, what: &str) -> Result<usize, String> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as usize)
    } else {
        Err(format!("{what} must be a non-negative integer, got {v}"))
    }
}

pub fn spokes_to_file(s: &SpokeSet) -> TensorFile {
    let n = s.n_spokes();
    let geometry = s
        .geometry
        .iter()
        .flat_map(|g| [g.index as f64, g.angle_deg, g.time, g.n_samples as f64, g.delta_k])
        .collect();
    let mut f = TensorFile::default();
    f.push(NamedTensor::scalar("tr", s.tr));
    f.push(NamedTensor::real("geometry", vec![n, 5], geometry));
    f.push(NamedTensor::complex("samples", vec![n, s.n_coils, s.n_samples()], &s.samples));
    f
}

pub fn spokes_from_file(f: &TensorFile) -> Result<SpokeSet, String> {
    let tr = scalar(f, "tr")?;
    let g = f.require("geometry", Dtype::F64, None)?;
    if g.dims.len() != 2 || g.dims[1] != 5 {
        return Err(format!("geometry must be N x 5, got {:?}", g.dims));
    }
    let geometry = g
        .values
        .chunks_exact(5)
        .map(|r| {
            Ok(SpokeGeometry {
                index: usize_of(r[0], "spoke index")?,
                angle_deg: r[1],
                time: r[2],
                n_samples: usize_of(r[3], "readout length")?,
                delta_k: r[4],
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let samples = f.require("samples", Dtype::Complex64, None)?;
    if samples.dims.len() != 3 || samples.dims[0] != geometry.len() {
        return Err(format!("samples must be {} x coils x readout, got {:?}", geometry.len(), samples.dims));
    }
    SpokeSet::new(geometry, samples.dims[1], samples.to_complex(), tr).map_err(|e| e.to_string())
}

pub fn dynamic_to_file(d: &DynamicImage) -> TensorFile {
    let mut f = TensorFile::default();
    f.push(NamedTensor::scalar("fov", d.grid.fov));
    f.push(NamedTensor::real("frame_times", vec![d.frame_times.len()], d.frame_times.clone()));
    f.push(NamedTensor::complex("frames", vec![d.frame_times.len(), d.grid.ny, d.grid.nx], &d.data));
    f
}

pub fn dynamic_from_file(f: &TensorFile) -> Result<DynamicImage, String> {
    let fov = scalar(f, "fov")?;
    let times = f.require("frame_times", Dtype::F64, None)?.values.clone();
    let frames = f.require("frames", Dtype::Complex64, None)?;
    if frames.dims.len() != 3 || frames.dims[0] != times.len() {
        return Err(format!("frames must be {} x ny x nx, got {:?}", times.len(), frames.dims));
    }
    let grid = GridSpec { nx: frames.dims[2], ny: frames.dims[1], fov };
    grid.validate().map_err(|e| e.to_string())?;
    Ok(DynamicImage { grid, frame_times: times, data: frames.to_complex() })
}

pub fn subspace_to_file(m: &SubspaceModel) -> TensorFile {
    let mut f = TensorFile::default();
    f.push(NamedTensor::scalar("fov", m.grid.fov));
    f.push(NamedTensor::real("frame_times", vec![m.frame_times.len()], m.frame_times.clone()));
    f.push(NamedTensor::complex("spatial", vec![m.grid.ny, m.grid.nx, m.rank], &m.spatial));
    f.push(NamedTensor::complex("temporal", vec![m.frame_times.len(), m.rank], &m.temporal));
    f
}

pub fn subspace_from_file(f: &TensorFile) -> Result<SubspaceModel, String> {
    let fov = scalar(f, "fov")?;
    let frame_times = f.require("frame_times", Dtype::F64, None)?.values.clone();
    let s = f.require("spatial", Dtype::Complex64, None)?;
    if s.dims.len() != 3 {
        return Err(format!("spatial must be ny x nx x rank, got {:?}", s.dims));
    }
    let rank = s.dims[2];
    let t = f.require("temporal", Dtype::Complex64, Some(&[frame_times.len(), rank]))?;
    let model = SubspaceModel {
        grid: GridSpec { nx: s.dims[1], ny: s.dims[0], fov },
        rank,
        spatial: s.to_complex(),
        temporal: t.to_complex(),
        frame_times,
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn network_header(net: &CoordinateNetwork) -> Vec<f64> {
    let e = &net.encoding;
    let act = match net.mlp.activation {
        Activation::Relu => 0.0,
        Activation::Tanh => 1.0,
    };
    vec![
        e.levels as f64,
        e.features_per_level as f64,
        e.base_resolution as f64,
        e.per_level_scale,
        e.log2_table_size as f64,
        e.input_dim as f64,
        net.rank as f64,
        act,
    ]
}

fn network_from_header(h: &[f64]) -> Result<CoordinateNetwork, String> {
    if h.len() != 8 {
        return Err(format!("network header has {} entries, expected 8", h.len()));
    }
    let encoding = HashGridConfig {
        levels: usize_of(h[0], "levels")?,
        features_per_level: usize_of(h[1], "features per level")?,
        base_resolution: usize_of(h[2], "base resolution")?,
        per_level_scale: h[3],
        log2_table_size: u32::try_from(usize_of(h[4], "table size")?).map_err(|_| "table size too large")?,
        input_dim: usize_of(h[5], "input dimension")?,
    };
    let activation = match h[7] {
        0.0 => Activation::Relu,
        1.0 => Activation::Tanh,
        v => return Err(format!("unknown activation code {v}")),
    };
    CoordinateNetwork::new(encoding, usize_of(h[6], "rank")?, activation).map_err(|e| e.to_string())
}

/// Both networks; tensors are prefixed `spatial.` and `temporal.`.
pub fn checkpoint_to_file(spatial: &CoordinateNetwork, temporal: &CoordinateNetwork, window: f64) -> TensorFile {
    let mut f = TensorFile::default();
    f.push(NamedTensor::scalar("window", window));
    for (prefix, net) in [("spatial", spatial), ("temporal", temporal)] {
        f.push(NamedTensor::real(format!("{prefix}.config"), vec![8], network_header(net)));
        for t in net.tensors() {
            f.push(NamedTensor::real(format!("{prefix}.{}", t.name), t.shape, t.data));
        }
    }
    f
}

/// Returns `(spatial, temporal, window)`.
pub fn checkpoint_from_file(f: &TensorFile) -> Result<(CoordinateNetwork, CoordinateNetwork, f64), String> {
    let window = scalar(f, "window")?;
    let mut nets = Vec::with_capacity(2);
    for prefix in ["spatial", "temporal"] {
        let header = f.require(&format!("{prefix}.config"), Dtype::F64, Some(&[8]))?;
        let mut net = network_from_header(&header.values)?;
        let lead = format!("{prefix}.");
        let tensors: Vec<Tensor> = f
            .tensors
            .iter()
            .filter_map(|t| {
                let name = t.name.strip_prefix(&lead)?;
                (name != "config").then(|| Tensor { name: name.to_string(), shape: t.dims.clone(), data: t.values.clone() })
            })
            .collect();
        net.load_tensors(&tensors).map_err(|e| format!("{prefix}: {e}"))?;
        nets.push(net);
    }
    let temporal = nets.pop().expect("two networks");
    let spatial = nets.pop().expect("two networks");
    Ok((spatial, temporal, window))
}

fn read_with<T>(path: &Path, convert: impl FnOnce(&TensorFile) -> Result<T, String>) -> AppResult<T> {
    let f = TensorFile::read(path)?;
    convert(&f).map_err(|m| AppError::format(path, m))
}

pub fn read_spokes(path: &Path) -> AppResult<SpokeSet> {
    read_with(path, spokes_from_file)
}

pub fn read_dynamic(path: &Path) -> AppResult<DynamicImage> {
    read_with(path, dynamic_from_file)
}

pub fn read_subspace(path: &Path) -> AppResult<SubspaceModel> {
    read_with(path, subspace_from_file)
}

pub fn read_checkpoint(path: &Path) -> AppResult<(CoordinateNetwork, CoordinateNetwork, f64)> {
    read_with(path, checkpoint_from_file)
}

fn csv_error(path: &Path, e: csv::Error) -> AppError {
    AppError::format(path, e.to_string())
}

/// Columns: `iteration, phase, loss, elapsed_s`.
pub fn write_train_log(path: &Path, logs: &[&TrainLog]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["iteration", "phase", "loss", "elapsed_s"]).map_err(|e| csv_error(path, e))?;
    for e in logs.iter().flat_map(|l| &l.entries) {
        w.write_record([e.step.to_string(), e.phase.name().to_string(), e.loss.to_string(), e.elapsed.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Column order of the metrics CSV.
pub const METRICS_COLUMNS: [&str; 4] = ["metric", "phase", "profile", "value"];

/// Values use the shortest representation that parses back to the same bits;
/// `profile` is empty for whole-image values.
pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(METRICS_COLUMNS).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let profile = r.profile.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([r.metric.as_str(), r.phase.as_str(), profile.as_str(), r.value.to_string().as_str()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn read_metrics(path: &Path) -> AppResult<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(METRICS_COLUMNS) {
        return Err(AppError::format(path, format!("unexpected columns {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| AppError::format(path, format!("bad {what} in {rec:?}"));
        let profile = match &rec[2] {
            "" => None,
            p => Some(p.parse().map_err(|_| bad("profile"))?),
        };
        rows.push(MetricRow {
            metric: rec[0].to_string(),
            phase: rec[1].to_string(),
            profile,
            value: rec[3].parse().map_err(|_| bad("value"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spokenet_core::recon::ReconConfig;
    use spokenet_core::trajectory::{golden_angle_geometry, zero_spoke_set};
    use spokenet_core::Complex64;

    #[test]
    fn spokes_round_trip() {
        let g = golden_angle_geometry(5, 8, 256.0, 2.3e-3, 23.62814).unwrap();
        let mut s = zero_spoke_set(g, 2, 2.3e-3);
        for (i, z) in s.samples.iter_mut().enumerate() {
            *z = Complex64::new(i as f64 * 0.1, -(i as f64).sqrt());
        }
        let f = spokes_to_file(&s);
        let bytes = f.encode().unwrap();
        let back = spokes_from_file(&TensorFile::decode(&bytes).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(spokes_to_file(&back).encode().unwrap(), bytes);
    }

    #[test]
    fn dynamic_and_subspace_round_trip() {
        let grid = GridSpec::new(8, 100.0).unwrap();
        let mut d = DynamicImage::zeros(grid, vec![0.0, 0.5, 1.25]);
        for (i, z) in d.data.iter_mut().enumerate() {
            *z = Complex64::new((i as f64).sin(), (i as f64).cos());
        }
        assert_eq!(dynamic_from_file(&dynamic_to_file(&d)).unwrap(), d);
        let m = SubspaceModel {
            grid,
            rank: 2,
            spatial: d.data[..128].to_vec(),
            temporal: d.data[..6].to_vec(),
            frame_times: d.frame_times.clone(),
        };
        assert_eq!(subspace_from_file(&subspace_to_file(&m)).unwrap(), m);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = ReconConfig { rank: 2, ..ReconConfig::default() };
        let (s, t) = cfg.networks().unwrap();
        let f = checkpoint_to_file(&s, &t, 1.84);
        let (s2, t2, w) = checkpoint_from_file(&TensorFile::decode(&f.encode().unwrap()).unwrap()).unwrap();
        assert_eq!((s2, t2, w), (s, t, 1.84));
        let mut broken = f.clone();
        broken.tensors.retain(|t| t.name != "temporal.layer1.bias");
        assert!(checkpoint_from_file(&broken).is_err());
    }
}
