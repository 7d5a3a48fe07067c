//! Adam with bias correction over dense MLP parameters and sparse hash tables.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::network::{CoordinateNetwork, NetworkGrads};
use crate::error::{invalid, shape, Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for one network.
///
/// Table moments are only updated for slots that have received a gradient at
/// least once; all other slots have zero moments and would not move anyway.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m_mlp: Vec<f64>,
    v_mlp: Vec<f64>,
    m_table: Vec<f64>,
    v_table: Vec<f64>,
    active: Vec<u32>,
    active_mark: Vec<u64>,
}

impl AdamState {
    pub fn new(net: &CoordinateNetwork, config: AdamConfig) -> Self {
        let slots = net.encoding.n_slots();
        Self {
            config,
            step: 0,
            m_mlp: vec![0.0; net.mlp.params.len()],
            v_mlp: vec![0.0; net.mlp.params.len()],
            m_table: vec![0.0; net.table.len()],
            v_table: vec![0.0; net.table.len()],
            active: Vec::new(),
            active_mark: vec![0; slots.div_ceil(64)],
        }
    }

    /// One update at learning rate `lr`; `group` names the network in errors.
    pub fn step(&mut self, net: &mut CoordinateNetwork, grads: &NetworkGrads, lr: f64, group: &str) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(invalid!("learning rate must be positive, got {lr}"));
        }
        if grads.mlp.len() != self.m_mlp.len() || grads.table.values.len() != self.m_table.len() {
            return Err(shape!("gradients do not match the optimizer state of {group}"));
        }
        if net.mlp.params.len() != self.m_mlp.len() || net.table.len() != self.m_table.len() {
            return Err(shape!("network does not match the optimizer state of {group}"));
        }
        if grads.mlp.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("{group} MLP gradient")));
        }
        let nf = net.encoding.features_per_level;
        for &s in grads.table.touched() {
            if grads.table.get(s).iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("{group} hash-table gradient (slot {s})")));
            }
        }
        for &s in grads.table.touched() {
            let bit = 1u64 << (s % 64);
            let word = &mut self.active_mark[s as usize / 64];
            if *word & bit == 0 {
                *word |= bit;
                self.active.push(s);
            }
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - math::powf(beta1, self.step as f64);
        let c2 = 1.0 - math::powf(beta2, self.step as f64);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / (math::sqrt(*v / c2) + eps);
        };
        for i in 0..net.mlp.params.len() {
            update(&mut net.mlp.params[i], &mut self.m_mlp[i], &mut self.v_mlp[i], grads.mlp[i]);
        }
        for &s in &self.active {
            for i in s as usize * nf..(s as usize + 1) * nf {
                update(&mut net.table[i], &mut self.m_table[i], &mut self.v_table[i], grads.table.values[i]);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::{Activation, HashGridConfig};

    fn net() -> CoordinateNetwork {
        let cfg = HashGridConfig { log2_table_size: 8, levels: 2, ..HashGridConfig::standard(1) };
        let mut n = CoordinateNetwork::new(cfg, 1, Activation::Relu).unwrap();
        n.init_parameters(1);
        n
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut n = net();
        let before = n.clone();
        let mut g = NetworkGrads::new(&n);
        for (i, v) in g.mlp.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.3 } else { -2.0 };
        }
        g.table.add(7, &[1.5, -0.01]);
        let mut adam = AdamState::new(&n, AdamConfig::default());
        adam.step(&mut n, &g, 0.01, "test").unwrap();
        assert_eq!(adam.step, 1);
        for (i, (a, b)) in n.mlp.params.iter().zip(&before.mlp.params).enumerate() {
            let expect = if i % 2 == 0 { -0.01 } else { 0.01 };
            assert!(((a - b) - expect).abs() < 1e-6 * 0.01);
        }
        assert!(((n.table[14] - before.table[14]) + 0.01).abs() < 1e-8);
        assert!(((n.table[15] - before.table[15]) - 0.01).abs() < 1e-8);
        assert_eq!(n.table[16], before.table[16]);
    }

    #[test]
    fn zero_gradients_never_move_parameters() {
        let mut n = net();
        let before = n.clone();
        let g = NetworkGrads::new(&n);
        let mut adam = AdamState::new(&n, AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut n, &g, 0.1, "test").unwrap();
        }
        assert_eq!(n, before);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut n = net();
            let mut g = NetworkGrads::new(&n);
            let mut adam = AdamState::new(&n, AdamConfig::default());
            for s in 0..4u32 {
                g.clear();
                g.mlp[3] = 0.1 * s as f64 - 0.2;
                g.table.add(s, &[0.5, -0.25]);
                adam.step(&mut n, &g, 0.05, "test").unwrap();
            }
            n
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradients_name_the_group() {
        let mut n = net();
        let mut g = NetworkGrads::new(&n);
        g.table.add(1, &[f64::INFINITY, 0.0]);
        let mut adam = AdamState::new(&n, AdamConfig::default());
        let err = adam.step(&mut n, &g, 0.1, "temporal").unwrap_err();
        assert!(alloc::format!("{err}").contains("temporal"));
        let zero = NetworkGrads::new(&n);
        assert!(adam.step(&mut n, &zero, 0.0, "temporal").is_err());
    }
}
