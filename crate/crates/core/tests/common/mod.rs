#![allow(dead_code)]

pub mod corpus;
pub mod formulas;
pub mod polynomials;

use std::fs;
use std::path::{Path, PathBuf};

use boxverify::onnx_runtime::{to_onnx_bytes, LayerOp, Network};
use rand::Rng;

/// Dense → bias → ReLU blocks for every hidden width, then a final affine
/// layer. Weights and biases are uniform in [-1, 1].
pub fn random_relu_net(rng: &mut impl Rng, dims: &[usize]) -> Network {
    assert!(dims.len() >= 2);
    let mut layers = Vec::new();
    for (k, w) in dims.windows(2).enumerate() {
        let weight = (0..w[0])
            .map(|_| (0..w[1]).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        layers.push(LayerOp::dense(weight));
        layers.push(LayerOp::bias((0..w[1]).map(|_| rng.random_range(-1.0..1.0)).collect()));
        if k + 2 < dims.len() {
            layers.push(LayerOp::Relu);
        }
    }
    Network::from_layers(dims[0], layers).unwrap()
}

/// y = x·W + b.
pub fn affine(weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Network {
    let input_dim = weight.len();
    Network::from_layers(input_dim, vec![LayerOp::dense(weight), LayerOp::bias(bias)]).unwrap()
}

/// The 2-2-1 ReLU net W₁=[[1,1],[1,−1]], W₂=[[1,1]], zero biases.
pub fn two_two_one() -> Network {
    Network::from_layers(
        2,
        vec![
            LayerOp::dense(vec![vec![1.0, 1.0], vec![1.0, -1.0]]),
            LayerOp::bias(vec![0.0, 0.0]),
            LayerOp::Relu,
            LayerOp::dense(vec![vec![1.0], vec![1.0]]),
            LayerOp::bias(vec![0.0]),
        ],
    )
    .unwrap()
}

/// Per-output (min, max) over a `per_dim`-point grid on each axis.
pub fn grid_range(net: &Network, lo: &[f64], hi: &[f64], per_dim: usize) -> Vec<(f64, f64)> {
    let d = lo.len();
    let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); net.output_dim()];
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for i in 0..d {
            let t = idx[i] as f64 / (per_dim - 1) as f64;
            x[i] = if idx[i] == per_dim - 1 {
                hi[i]
            } else {
                lo[i] + t * (hi[i] - lo[i])
            };
        }
        for (o, y) in out.iter_mut().zip(net.infer(&x).unwrap()) {
            o.0 = o.0.min(y);
            o.1 = o.1.max(y);
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            idx[k] += 1;
            if idx[k] < per_dim {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// VNNLIB text declaring `n` inputs and `m` outputs, bounding each input to
/// `[lo_i, hi_i]`, followed by `body` (extra assert forms).
pub fn spec_text(lo: &[f64], hi: &[f64], m: usize, body: &str) -> String {
    let mut s = String::new();
    for i in 0..lo.len() {
        s += &format!("(declare-const X_{i} Real)\n");
    }
    for j in 0..m {
        s += &format!("(declare-const Y_{j} Real)\n");
    }
    for i in 0..lo.len() {
        s += &format!("(assert (>= X_{i} {:?}))\n(assert (<= X_{i} {:?}))\n", lo[i], hi[i]);
    }
    s + body
}

pub fn write_model(dir: &Path, name: &str, net: &Network) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, to_onnx_bytes(net)).unwrap();
    path
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Whether every dimension's strata indices floor(n·(x−lo)/(hi−lo)),
/// clamped to n−1, form a permutation of 0..n. Degenerate dimensions are
/// skipped.
pub fn is_latin(points: &[Vec<f64>], lo: &[f64], hi: &[f64]) -> bool {
    let n = points.len();
    (0..lo.len()).filter(|&i| lo[i] < hi[i]).all(|i| {
        let mut seen = vec![false; n];
        points.iter().all(|p| {
            let s = ((n as f64 * (p[i] - lo[i]) / (hi[i] - lo[i])).floor() as usize).min(n - 1);
            !std::mem::replace(&mut seen[s], true)
        })
    })
}

pub fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            let d: f64 = p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum();
            best = best.min(d.sqrt());
        }
    }
    best
}
