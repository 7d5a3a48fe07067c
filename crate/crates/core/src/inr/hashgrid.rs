//! Multiresolution hash-grid encoding.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape, Result};
use crate::math;

/// Per-dimension hashing primes.
pub const HASH_PRIMES: [u32; 2] = [1, 2_654_435_761];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashGridConfig {
    pub levels: usize,
    pub features_per_level: usize,
    pub base_resolution: usize,
    pub per_level_scale: f64,
    /// `log2` of the number of table entries per level.
    pub log2_table_size: u32,
    /// 1 (time) or 2 (space).
    pub input_dim: usize,
}

impl HashGridConfig {
    /// 16 levels, 2 features, base resolution 16, scale 1.26, 2^20 entries.
    pub fn standard(input_dim: usize) -> Self {
        Self { levels: 16, features_per_level: 2, base_resolution: 16, per_level_scale: 1.26, log2_table_size: 20, input_dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.features_per_level == 0 || self.base_resolution == 0 {
            return Err(invalid!("hash grid needs at least one level, feature and cell"));
        }
        if !(self.per_level_scale > 1.0 && self.per_level_scale.is_finite()) {
            return Err(invalid!("per-level scale must exceed 1, got {}", self.per_level_scale));
        }
        if self.log2_table_size == 0 || self.log2_table_size > 31 {
            return Err(invalid!("log2 table size must be in 1..=31, got {}", self.log2_table_size));
        }
        if !(1..=2).contains(&self.input_dim) {
            return Err(invalid!("hash grid input dimension must be 1 or 2, got {}", self.input_dim));
        }
        if self.resolution(self.levels - 1) >= u32::MAX as usize {
            return Err(invalid!("finest resolution overflows the hash coordinates"));
        }
        Ok(())
    }

    #[inline]
    pub fn table_size(&self) -> usize {
        1usize << self.log2_table_size
    }

    /// `⌊N_min·b^ℓ⌋`.
    pub fn resolution(&self, level: usize) -> usize {
        math::floor(self.base_resolution as f64 * math::powf(self.per_level_scale, level as f64)) as usize
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.levels * self.features_per_level
    }

    #[inline]
    pub fn corners(&self) -> usize {
        1 << self.input_dim
    }

    #[inline]
    pub fn n_slots(&self) -> usize {
        self.levels * self.table_size()
    }

    #[inline]
    pub fn n_params(&self) -> usize {
        self.n_slots() * self.features_per_level
    }
}

/// Table slot of an integer grid corner.
#[inline]
pub fn hash_slot(corner: &[u32], mask: u32) -> u32 {
    let mut h = 0u32;
    for (c, p) in corner.iter().zip(HASH_PRIMES) {
        h ^= c.wrapping_mul(p);
    }
    h & mask
}

/// Encoded features plus the corner slots and weights needed for backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub n: usize,
    /// `[n × L·F]`.
    pub features: Vec<f64>,
    /// Global slot `ℓ·T + slot` per `(point, level, corner)`.
    pub slots: Vec<u32>,
    pub weights: Vec<f64>,
    /// Number of coordinates that had to be clamped into `[0, 1]`.
    pub clamped: usize,
}

/// Encodes `n = coords.len() / d` coordinates with the given table.
pub fn hash_encode(cfg: &HashGridConfig, table: &[f64], coords: &[f64]) -> Result<Encoding> {
    let d = cfg.input_dim;
    if !coords.len().is_multiple_of(d) {
        return Err(shape!("{} coordinate values for dimension {d}", coords.len()));
    }
    if table.len() != cfg.n_params() {
        return Err(shape!("hash table has {} values, expected {}", table.len(), cfg.n_params()));
    }
    let n = coords.len() / d;
    let (levels, nf, nc) = (cfg.levels, cfg.features_per_level, cfg.corners());
    let t = cfg.table_size();
    let mask = (t - 1) as u32;
    let mut features = vec![0.0; n * levels * nf];
    let mut slots = vec![0u32; n * levels * nc];
    let mut weights = vec![0.0; n * levels * nc];
    let mut clamped = 0;
    let resolutions: Vec<usize> = (0..levels).map(|l| cfg.resolution(l)).collect();
    for i in 0..n {
        let mut u = [0.0; 2];
        for (a, &c) in coords[i * d..(i + 1) * d].iter().enumerate() {
            let v = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
            if v != c {
                clamped += 1;
            }
            u[a] = v;
        }
        for (l, &res) in resolutions.iter().enumerate() {
            let mut cell = [0u32; 2];
            let mut frac = [0.0; 2];
            for a in 0..d {
                let pos = u[a] * res as f64;
                let c = (math::floor(pos) as usize).min(res - 1);
                cell[a] = c as u32;
                frac[a] = pos - c as f64;
            }
            let base = (i * levels + l) * nc;
            let out = &mut features[(i * levels + l) * nf..(i * levels + l + 1) * nf];
            for corner in 0..nc {
                let mut idx = [0u32; 2];
                let mut w = 1.0;
                for a in 0..d {
                    let bit = (corner >> a) & 1;
                    idx[a] = cell[a] + bit as u32;
                    w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                }
                let slot = (l * t) as u32 + hash_slot(&idx[..d], mask);
                slots[base + corner] = slot;
                weights[base + corner] = w;
                let entry = &table[slot as usize * nf..(slot as usize + 1) * nf];
                for (o, e) in out.iter_mut().zip(entry) {
                    *o += w * e;
                }
            }
        }
    }
    Ok(Encoding { n, features, slots, weights, clamped })
}

/// Sparse accumulator for hash-table gradients.
///
/// The dense buffer is zero-allocated, so untouched pages are never written.
#[derive(Debug, Clone)]
pub struct TableGrad {
    pub features_per_level: usize,
    pub values: Vec<f64>,
    touched: Vec<u32>,
    mark: Vec<u64>,
}

impl TableGrad {
    pub fn new(cfg: &HashGridConfig) -> Self {
        let slots = cfg.n_slots();
        Self { features_per_level: cfg.features_per_level, values: vec![0.0; cfg.n_params()], touched: Vec::new(), mark: vec![0; slots.div_ceil(64)] }
    }

    #[inline]
    pub fn add(&mut self, slot: u32, grad: &[f64]) {
        let s = slot as usize;
        let bit = 1u64 << (s % 64);
        if self.mark[s / 64] & bit == 0 {
            self.mark[s / 64] |= bit;
            self.touched.push(slot);
        }
        let nf = self.features_per_level;
        for (v, g) in self.values[s * nf..(s + 1) * nf].iter_mut().zip(grad) {
            *v += g;
        }
    }

    /// Slots with a (possibly zero) accumulated gradient, in first-touch order.
    pub fn touched(&self) -> &[u32] {
        &self.touched
    }

    pub fn get(&self, slot: u32) -> &[f64] {
        let nf = self.features_per_level;
        &self.values[slot as usize * nf..(slot as usize + 1) * nf]
    }

    pub fn scale(&mut self, factor: f64) {
        let nf = self.features_per_level;
        for &s in &self.touched {
            for v in &mut self.values[s as usize * nf..(s as usize + 1) * nf] {
                *v *= factor;
            }
        }
    }

    pub fn clear(&mut self) {
        let nf = self.features_per_level;
        for &s in &self.touched {
            let s = s as usize;
            self.values[s * nf..(s + 1) * nf].fill(0.0);
            self.mark[s / 64] = 0;
        }
        self.touched.clear();
    }
}

/// Accumulates `∂L/∂table` given `∂L/∂features` for an encoding.
pub fn scatter_gradient(cfg: &HashGridConfig, enc: &Encoding, dfeatures: &[f64], grad: &mut TableGrad) -> Result<()> {
    let (levels, nf, nc) = (cfg.levels, cfg.features_per_level, cfg.corners());
    if dfeatures.len() != enc.n * levels * nf || enc.slots.len() != enc.n * levels * nc {
        return Err(shape!("feature gradient of length {} for {} encoded points", dfeatures.len(), enc.n));
    }
    let mut buf = vec![0.0; nf];
    for il in 0..enc.n * levels {
        let g = &dfeatures[il * nf..(il + 1) * nf];
        if g.iter().all(|v| *v == 0.0) {
            continue;
        }
        for corner in 0..nc {
            let w = enc.weights[il * nc + corner];
            for (b, v) in buf.iter_mut().zip(g) {
                *b = w * v;
            }
            grad.add(enc.slots[il * nc + corner], &buf);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(d: usize) -> HashGridConfig {
        HashGridConfig { log2_table_size: 12, ..HashGridConfig::standard(d) }
    }

    fn ramp_table(cfg: &HashGridConfig) -> Vec<f64> {
        (0..cfg.n_params()).map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5).collect()
    }

    #[test]
    fn standard_shapes() {
        let cfg = HashGridConfig::standard(2);
        cfg.validate().unwrap();
        assert_eq!(cfg.output_dim(), 32);
        assert_eq!(cfg.table_size(), 1 << 20);
        assert_eq!(cfg.resolution(0), 16);
        assert_eq!(cfg.resolution(1), 20);
        assert_eq!(cfg.resolution(15), (16.0 * 1.26f64.powi(15)).floor() as usize);
        assert!(HashGridConfig { per_level_scale: 1.0, ..cfg }.validate().is_err());
        assert!(HashGridConfig { input_dim: 3, ..cfg }.validate().is_err());
    }

    #[test]
    fn corner_coordinate_reads_the_entry() {
        let cfg = small(2);
        let table = ramp_table(&cfg);
        let enc = hash_encode(&cfg, &table, &[3.0 / 16.0, 5.0 / 16.0]).unwrap();
        assert_eq!(enc.features.len(), 32);
        let slot = hash_slot(&[3, 5], (cfg.table_size() - 1) as u32) as usize;
        assert_eq!(&enc.features[0..2], &table[slot * 2..slot * 2 + 2]);
    }

    #[test]
    fn midpoint_in_one_dimension_is_the_mean() {
        let cfg = small(1);
        let table = ramp_table(&cfg);
        let enc = hash_encode(&cfg, &table, &[4.5 / 16.0]).unwrap();
        for f in 0..2 {
            let expect = 0.5 * (table[4 * 2 + f] + table[5 * 2 + f]);
            assert!((enc.features[f] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn encoding_is_continuous_across_cell_boundaries() {
        let cfg = small(2);
        let table = ramp_table(&cfg);
        for level in [0, 3, 9] {
            let res = cfg.resolution(level) as f64;
            let edge = 7.0 / res;
            let left = hash_encode(&cfg, &table, &[edge - 1e-13, 0.37]).unwrap();
            let right = hash_encode(&cfg, &table, &[edge + 1e-13, 0.37]).unwrap();
            for f in 0..2 {
                let i = level * 2 + f;
                assert!((left.features[i] - right.features[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn out_of_range_coordinates_are_clamped() {
        let cfg = small(2);
        let table = ramp_table(&cfg);
        let a = hash_encode(&cfg, &table, &[-0.2, 1.3]).unwrap();
        let b = hash_encode(&cfg, &table, &[0.0, 1.0]).unwrap();
        assert_eq!(a.clamped, 2);
        assert_eq!(b.clamped, 0);
        assert_eq!(a.features, b.features);
        assert!(hash_encode(&cfg, &table, &[0.5]).is_err());
    }

    #[test]
    fn table_grad_tracks_and_clears() {
        let cfg = small(1);
        let mut g = TableGrad::new(&cfg);
        g.add(5, &[1.0, 2.0]);
        g.add(5, &[1.0, 2.0]);
        g.add(3, &[0.5, 0.0]);
        assert_eq!(g.touched(), &[5, 3]);
        assert_eq!(g.get(5), &[2.0, 4.0]);
        g.scale(0.5);
        assert_eq!(g.get(5), &[1.0, 2.0]);
        g.clear();
        assert!(g.touched().is_empty());
        assert!(g.values.iter().all(|v| *v == 0.0));
    }
}
