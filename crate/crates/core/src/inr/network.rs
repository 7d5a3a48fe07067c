//! Hash-grid encoding followed by an MLP, mapping coordinates to `k` complex values.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::hashgrid::{hash_encode, scatter_gradient, Encoding, HashGridConfig, TableGrad};
use super::mlp::{Activation, Mlp, MlpCache};
use crate::error::{invalid, shape, Error, Result};
use crate::rng::Rng;
use crate::Complex64;

/// Hidden layer width.
pub const HIDDEN_WIDTH: usize = 64;
/// Half-width of the uniform hash-table initialization.
pub const TABLE_INIT_RANGE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateNetwork {
    pub encoding: HashGridConfig,
    /// `[L × T × F]`, indexed `(ℓ·T + slot)·F + f`.
    pub table: Vec<f64>,
    pub mlp: Mlp,
    /// Number of complex outputs `k`.
    pub rank: usize,
}

/// Cached state of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub encoding: Encoding,
    pub mlp: MlpCache,
}

impl ForwardCache {
    /// `[n × 2k]` outputs: real parts of the `k` values, then imaginary parts.
    pub fn output(&self) -> &[f64] {
        self.mlp.output()
    }
}

/// Gradients for every parameter of one network.
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub table: TableGrad,
    pub mlp: Vec<f64>,
}

impl NetworkGrads {
    pub fn new(net: &CoordinateNetwork) -> Self {
        Self { table: TableGrad::new(&net.encoding), mlp: vec![0.0; net.mlp.params.len()] }
    }

    pub fn clear(&mut self) {
        self.table.clear();
        self.mlp.fill(0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.table.scale(factor);
        for g in &mut self.mlp {
            *g *= factor;
        }
    }

    pub fn add_mlp(&mut self, other: &[f64]) {
        for (a, b) in self.mlp.iter_mut().zip(other) {
            *a += b;
        }
    }
}

/// A named parameter tensor for checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl CoordinateNetwork {
    /// All-zero network `L·F → 64 → 64 → 2k`.
    pub fn new(encoding: HashGridConfig, rank: usize, activation: Activation) -> Result<Self> {
        encoding.validate()?;
        if rank == 0 {
            return Err(invalid!("network rank must be positive"));
        }
        let sizes = [encoding.output_dim(), HIDDEN_WIDTH, HIDDEN_WIDTH, 2 * rank];
        Ok(Self { encoding, table: vec![0.0; encoding.n_params()], mlp: Mlp::zeros(&sizes, activation), rank })
    }

    /// Standard 2D spatial network with ReLU hidden layers.
    pub fn spatial(rank: usize) -> Result<Self> {
        Self::new(HashGridConfig::standard(2), rank, Activation::Relu)
    }

    /// Standard 1D temporal network with ReLU hidden layers.
    pub fn temporal(rank: usize) -> Result<Self> {
        Self::new(HashGridConfig::standard(1), rank, Activation::Relu)
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.encoding.input_dim
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        2 * self.rank
    }

    pub fn n_params(&self) -> usize {
        self.table.len() + self.mlp.params.len()
    }

    /// Hash table `U(±1e-4)`, Xavier-uniform weights, zero biases.
    pub fn init_parameters(&mut self, seed: u64) {
        let mut rng = Rng::with_stream(seed, 0x7AB1);
        for v in &mut self.table {
            *v = rng.uniform_in(-TABLE_INIT_RANGE, TABLE_INIT_RANGE);
        }
        let mut rng = Rng::with_stream(seed, 0x3A1F);
        self.mlp.init_xavier(&mut rng);
    }

    /// Evaluates a batch of coordinates (flattened, `d` values each, in `[0, 1]`).
    pub fn forward(&self, coords: &[f64]) -> Result<ForwardCache> {
        if coords.is_empty() {
            return Err(invalid!("empty coordinate batch"));
        }
        if self.mlp.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("MLP parameters (poisoned state)".into()));
        }
        let encoding = hash_encode(&self.encoding, &self.table, coords)?;
        if encoding.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hash-grid features (poisoned state)".into()));
        }
        let mlp = self.mlp.forward(encoding.features.clone(), encoding.n)?;
        if mlp.output().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output (poisoned state)".into()));
        }
        Ok(ForwardCache { encoding, mlp })
    }

    /// Outputs only.
    pub fn evaluate(&self, coords: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(coords)?.mlp.acts.pop_last())
    }

    /// Outputs as `[n × k]` complex values.
    pub fn evaluate_complex(&self, coords: &[f64]) -> Result<Vec<Complex64>> {
        let out = self.evaluate(coords)?;
        Ok(real_pairs_to_complex(&out, self.rank))
    }

    /// Accumulates the gradients of a scalar loss with `∂L/∂output = dout`.
    pub fn backward(&self, cache: &ForwardCache, dout: &[f64], grads: &mut NetworkGrads) -> Result<()> {
        if dout.len() != cache.encoding.n * self.output_dim() {
            return Err(shape!("output gradient of length {} for a batch of {}", dout.len(), cache.encoding.n));
        }
        if grads.mlp.len() != self.mlp.params.len() || grads.table.values.len() != self.table.len() {
            return Err(shape!("gradient buffers do not match the network"));
        }
        let dfeat = self.mlp.backward(&cache.mlp, dout, &mut grads.mlp)?;
        scatter_gradient(&self.encoding, &cache.encoding, &dfeat, &mut grads.table)
    }

    /// Parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<Tensor> {
        let mut out = vec![Tensor {
            name: "hash_table".into(),
            shape: vec![self.encoding.levels, self.encoding.table_size(), self.encoding.features_per_level],
            data: self.table.clone(),
        }];
        for l in 0..self.mlp.n_layers() {
            let (w, b) = self.mlp.offsets(l);
            let (fi, fo) = (self.mlp.sizes[l], self.mlp.sizes[l + 1]);
            out.push(Tensor { name: alloc::format!("layer{l}.weight"), shape: vec![fo, fi], data: self.mlp.params[w..b].to_vec() });
            out.push(Tensor { name: alloc::format!("layer{l}.bias"), shape: vec![fo], data: self.mlp.params[b..b + fo].to_vec() });
        }
        out
    }

    /// Loads tensors produced by [`tensors`](Self::tensors) of an identically configured network.
    pub fn load_tensors(&mut self, tensors: &[Tensor]) -> Result<()> {
        let expected = self.tensors();
        if tensors.len() != expected.len() {
            return Err(shape!("{} tensors, expected {}", tensors.len(), expected.len()));
        }
        for (t, e) in tensors.iter().zip(&expected) {
            if t.name != e.name || t.shape != e.shape || t.data.len() != e.data.len() {
                return Err(shape!("tensor {} {:?} does not match {} {:?}", t.name, t.shape, e.name, e.shape));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("tensor {}", t.name)));
            }
        }
        self.table.copy_from_slice(&tensors[0].data);
        for l in 0..self.mlp.n_layers() {
            let (w, b) = self.mlp.offsets(l);
            let fo = self.mlp.sizes[l + 1];
            self.mlp.params[w..b].copy_from_slice(&tensors[1 + 2 * l].data);
            self.mlp.params[b..b + fo].copy_from_slice(&tensors[2 + 2 * l].data);
        }
        Ok(())
    }
}

trait PopLast {
    fn pop_last(self) -> Vec<f64>;
}

impl PopLast for Vec<Vec<f64>> {
    fn pop_last(mut self) -> Vec<f64> {
        self.pop().unwrap_or_default()
    }
}

/// `[n × 2k]` rows of `(re_0..re_k, im_0..im_k)` to `[n × k]` complex values.
pub fn real_pairs_to_complex(out: &[f64], k: usize) -> Vec<Complex64> {
    out.chunks_exact(2 * k)
        .flat_map(|row| (0..k).map(move |j| Complex64::new(row[j], row[k + j])))
        .collect()
}

/// Inverse of [`real_pairs_to_complex`] for gradients: `∂L/∂re + i·∂L/∂im` to pairs.
pub fn complex_to_real_pairs(grad: &[Complex64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grad.len() * 2);
    for row in grad.chunks_exact(k) {
        out.extend(row.iter().map(|z| z.re));
        out.extend(row.iter().map(|z| z.im));
    }
    out
}
