//! Fully connected layers on row-major batches.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// `c ← α·a·b + β·c` with explicit strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], (rsa, csa): (isize, isize), b: &[f64], (rsb, csb): (isize, isize), beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every caller passes slices of at least the extent addressed by
    // the given dimensions and strides, and `c` is a distinct buffer.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

/// Dense layers `sizes[0] → … → sizes[last]`, hidden activation, linear output.
///
/// Parameters are stored flat: for every layer the `[out × in]` weight matrix
/// followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

/// Activations of one forward pass (`acts[0]` is the input).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    pub n: usize,
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize], activation: Activation) -> Self {
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self { sizes: sizes.to_vec(), activation, params: vec![0.0; n] }
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `(weight offset, bias offset)` of layer `l`.
    pub fn offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    /// Uniform `±√(6/(fan_in + fan_out))` weights, zero biases.
    pub fn init_xavier(&mut self, rng: &mut Rng) {
        for l in 0..self.n_layers() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.offsets(l);
            let bound = crate::math::sqrt(6.0 / (fi + fo) as f64);
            for p in &mut self.params[w..b] {
                *p = rng.uniform_in(-bound, bound);
            }
            self.params[b..b + fo].fill(0.0);
        }
    }

    pub fn forward(&self, input: Vec<f64>, n: usize) -> Result<MlpCache> {
        if input.len() != n * self.sizes[0] {
            return Err(shape!("MLP input of length {} for batch {n} x {}", input.len(), self.sizes[0]));
        }
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input);
        for l in 0..self.n_layers() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.offsets(l);
            let mut z = vec![0.0; n * fo];
            for row in z.chunks_exact_mut(fo) {
                row.copy_from_slice(&self.params[b..b + fo]);
            }
            gemm(n, fi, fo, &acts[l], (fi as isize, 1), &self.params[w..b], (1, fi as isize), 1.0, &mut z);
            if l + 1 < self.n_layers() {
                for v in &mut z {
                    *v = self.activation.apply(*v);
                }
            }
            acts.push(z);
        }
        Ok(MlpCache { n, acts })
    }

    /// Accumulates parameter gradients into `grad` and returns `∂L/∂input`.
    pub fn backward(&self, cache: &MlpCache, dout: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        let n = cache.n;
        let nl = self.n_layers();
        if dout.len() != n * self.sizes[nl] || cache.acts.len() != nl + 1 {
            return Err(shape!("output gradient of length {} for batch {n} x {}", dout.len(), self.sizes[nl]));
        }
        if grad.len() != self.params.len() {
            return Err(shape!("MLP gradient buffer of length {}, expected {}", grad.len(), self.params.len()));
        }
        let mut delta = dout.to_vec();
        for l in (0..nl).rev() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.offsets(l);
            if l + 1 < nl {
                for (d, y) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= self.activation.derivative_from_output(*y);
                }
            }
            for row in delta.chunks_exact(fo) {
                for (g, d) in grad[b..b + fo].iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dW[fo × fi] += deltaᵀ · input
            gemm(fo, n, fi, &delta, (1, fo as isize), &cache.acts[l], (fi as isize, 1), 1.0, &mut grad[w..b]);
            let mut dinput = vec![0.0; n * fi];
            gemm(n, fo, fi, &delta, (fo as isize, 1), &self.params[w..b], (fi as isize, 1), 0.0, &mut dinput);
            delta = dinput;
        }
        Ok(delta)
    }
}
