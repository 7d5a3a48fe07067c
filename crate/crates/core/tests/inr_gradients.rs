//! Reverse-mode gradients of the coordinate networks against central differences.

use spokenet_core::inr::{hash_encode, Activation, CoordinateNetwork, HashGridConfig, NetworkGrads};
use spokenet_core::rng::Rng;

const H: f64 = 1e-4;

fn network(d: usize, seed: u64) -> CoordinateNetwork {
    let cfg = HashGridConfig { log2_table_size: 12, ..HashGridConfig::standard(d) };
    let mut net = CoordinateNetwork::new(cfg, 6, Activation::Relu).unwrap();
    net.init_parameters(seed);
    // Larger table values so the encoding matters at finite-difference scale.
    let mut rng = Rng::new(seed + 100);
    for v in &mut net.table {
        *v = rng.uniform_in(-0.5, 0.5);
    }
    net
}

struct Problem {
    coords: Vec<f64>,
    weights: Vec<f64>,
}

/// Smallest |pre-activation| over the hidden units for one coordinate.
fn kink_margin(net: &CoordinateNetwork, coord: &[f64]) -> f64 {
    let mut act = hash_encode(&net.encoding, &net.table, coord).unwrap().features;
    let mut margin = f64::INFINITY;
    for l in 0..net.mlp.n_layers() - 1 {
        let (w, b) = net.mlp.offsets(l);
        let (fi, fo) = (net.mlp.sizes[l], net.mlp.sizes[l + 1]);
        act = (0..fo)
            .map(|j| {
                let z = net.mlp.params[b + j] + (0..fi).map(|i| net.mlp.params[w + j * fi + i] * act[i]).sum::<f64>();
                margin = margin.min(z.abs());
                z.max(0.0)
            })
            .collect();
    }
    margin
}

impl Problem {
    /// `n` random coordinates kept away from ReLU kinks, where central
    /// differences are not a valid oracle.
    fn new(net: &CoordinateNetwork, d: usize, n: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut coords = Vec::new();
        while coords.len() < n * d {
            let c: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            if kink_margin(net, &c) > 1e-2 {
                coords.extend(c);
            }
        }
        Self { coords, weights: (0..n * 12).map(|_| rng.normal()).collect() }
    }

    /// Random quadratic-plus-linear scalar loss of the outputs.
    fn loss(&self, net: &CoordinateNetwork) -> f64 {
        let out = net.evaluate(&self.coords).unwrap();
        out.iter().zip(&self.weights).map(|(o, w)| w * o + 0.5 * o * o).sum()
    }

    fn grads(&self, net: &CoordinateNetwork) -> NetworkGrads {
        let cache = net.forward(&self.coords).unwrap();
        let dout: Vec<f64> = cache.output().iter().zip(&self.weights).map(|(o, w)| w + o).collect();
        let mut g = NetworkGrads::new(net);
        net.backward(&cache, &dout, &mut g).unwrap();
        g
    }
}

fn central(net: &CoordinateNetwork, p: &Problem, set: impl Fn(&mut CoordinateNetwork, f64)) -> f64 {
    let mut a = net.clone();
    set(&mut a, H);
    let up = p.loss(&a);
    let mut b = net.clone();
    set(&mut b, -H);
    (up - p.loss(&b)) / (2.0 * H)
}

fn relative(fd: &[f64], an: &[f64]) -> f64 {
    let diff: f64 = fd.iter().zip(an).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = fd.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm
}

fn check(d: usize) {
    let net = network(d, 3 + d as u64);
    let p = Problem::new(&net, d, 7, 11 + d as u64);
    let g = p.grads(&net);
    for l in 0..net.mlp.n_layers() {
        let (w, b) = net.mlp.offsets(l);
        let end = b + net.mlp.sizes[l + 1];
        for (name, range) in [("weight", w..b), ("bias", b..end)] {
            let idx: Vec<usize> = range.clone().step_by((range.len() / 40).max(1)).collect();
            let fd: Vec<f64> = idx.iter().map(|&i| central(&net, &p, |n, h| n.mlp.params[i] += h)).collect();
            let an: Vec<f64> = idx.iter().map(|&i| g.mlp[i]).collect();
            let r = relative(&fd, &an);
            assert!(r < 1e-4, "d={d} layer {l} {name}: relative error {r}");
        }
    }
    let nf = net.encoding.features_per_level;
    let touched: Vec<usize> = g.table.touched().iter().step_by(3).flat_map(|&s| (0..nf).map(move |f| s as usize * nf + f)).collect();
    assert!(!touched.is_empty());
    let fd: Vec<f64> = touched.iter().map(|&i| central(&net, &p, |n, h| n.table[i] += h)).collect();
    let an: Vec<f64> = touched.iter().map(|&i| g.table.values[i]).collect();
    let r = relative(&fd, &an);
    assert!(r < 1e-4, "d={d} hash table: relative error {r}");
}

#[test]
fn spatial_network_gradients_match_finite_differences() {
    check(2);
}

#[test]
fn temporal_network_gradients_match_finite_differences() {
    check(1);
}

#[test]
fn untouched_entries_and_zero_output_gradients_give_zero() {
    let net = network(2, 1);
    let coords = [0.25, 0.75];
    let cache = net.forward(&coords).unwrap();
    let mut g = NetworkGrads::new(&net);
    net.backward(&cache, &[0.0; 12], &mut g).unwrap();
    assert!(g.mlp.iter().all(|v| *v == 0.0));
    assert!(g.table.values.iter().all(|v| *v == 0.0));
    let dout: Vec<f64> = (0..12).map(|i| i as f64 - 5.5).collect();
    net.backward(&cache, &dout, &mut g).unwrap();
    let touched: std::collections::HashSet<u32> = cache.encoding.slots.iter().copied().collect();
    for s in 0..net.encoding.n_slots() as u32 {
        if !touched.contains(&s) {
            assert!(g.table.get(s).iter().all(|v| *v == 0.0));
        }
    }
    assert!(net.backward(&cache, &dout[..6], &mut g).is_err());
}

#[test]
fn forward_of_a_large_batch_is_fast() {
    let mut net = CoordinateNetwork::spatial(6).unwrap();
    net.init_parameters(0);
    let mut rng = Rng::new(1);
    let coords: Vec<f64> = (0..2 * 4096).map(|_| rng.uniform()).collect();
    let t0 = std::time::Instant::now();
    let out = net.evaluate(&coords).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("4096-point forward: {dt:.3} s");
    assert_eq!(out.len(), 4096 * 12);
    assert!(dt < 1.0);
}
