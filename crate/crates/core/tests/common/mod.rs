//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

pub mod strategies;

use nclab::collapse::FeatureMatrix;
use nclab::data::{Dataset, Provenance, Split};
use nclab::network::{backward, cross_entropy_loss, forward, MlpArchitecture, NetworkParams};
use nclab::numerics::{Matrix, Rng};

/// Class means straight from the definition, in plain nested loops.
pub fn oracle_class_means(x: &[Vec<f64>], y: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = x[0].len();
    let mut means = vec![vec![0.0; d]; k];
    for c in 0..k {
        let members: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        for j in 0..d {
            means[c][j] = members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64;
        }
    }
    means
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn centre_spread(centres: &[Vec<f64>]) -> f64 {
    let d = centres[0].len();
    let g: Vec<f64> = (0..d)
        .map(|j| centres.iter().map(|c| c[j]).sum::<f64>() / centres.len() as f64)
        .collect();
    centres.iter().map(|c| dist2(c, &g)).sum::<f64>() / centres.len() as f64
}

/// Within-class over between-class variance, direct definition.
pub fn oracle_variance(x: &[Vec<f64>], y: &[usize], means: &[Vec<f64>]) -> f64 {
    let within = x.iter().zip(y).map(|(r, &c)| dist2(r, &means[c])).sum::<f64>() / x.len() as f64;
    within / centre_spread(means)
}

/// Nearest-centre variance, direct definition.
pub fn oracle_weak_variance(x: &[Vec<f64>], centres: &[Vec<f64>]) -> f64 {
    let within = x
        .iter()
        .map(|r| centres.iter().map(|c| dist2(r, c)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / x.len() as f64;
    within / centre_spread(centres)
}

/// Smallest within-cluster sum of squares over every assignment of the
/// points to `k` labels.
pub fn exhaustive_min_inertia(x: &[Vec<f64>], k: usize) -> f64 {
    let n = x.len();
    let d = x[0].len();
    let mut best = f64::INFINITY;
    let mut assign = vec![0usize; n];
    loop {
        let mut sums = vec![vec![0.0; d]; k];
        let mut sq = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in x.iter().zip(&assign) {
            counts[a] += 1;
            for j in 0..d {
                sums[a][j] += r[j];
                sq[a] += r[j] * r[j];
            }
        }
        let sse: f64 = (0..k)
            .filter(|&c| counts[c] > 0)
            .map(|c| sq[c] - sums[c].iter().map(|s| s * s).sum::<f64>() / counts[c] as f64)
            .sum();
        best = best.min(sse);
        // next assignment in base k; the first point is pinned to label 0 by symmetry
        let mut i = 1;
        loop {
            if i >= n {
                return best.max(0.0);
            }
            assign[i] += 1;
            if assign[i] < k {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

pub fn to_rows(m: &Matrix<f32>) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
}

pub fn rows_f64(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

/// Random features with every class present.
pub fn random_features(rng: &mut Rng, n: usize, d: usize, k: usize, split: Split) -> FeatureMatrix {
    let data: Vec<f32> = (0..n * d).map(|_| (rng.standard_normal() * 3.0) as f32).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.index(k) }).collect();
    rng.shuffle(&mut labels);
    FeatureMatrix::new(Matrix::from_vec(n, d, data).unwrap(), labels, k, 1, 0, split).unwrap()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Largest relative error between backprop gradients and central differences
/// of the mean cross-entropy, in 64-bit, with a 1e-3 floor on the denominator.
pub fn gradient_check(params: &NetworkParams<f64>, x: &Matrix<f64>, y: &[usize], eps: f64) -> f64 {
    let trace = forward(params, x).unwrap();
    let grads = backward(params, &trace, x, y).unwrap();
    let loss = |p: &NetworkParams<f64>| cross_entropy_loss(&forward(p, x).unwrap().logits, y).unwrap().0;
    let mut worst: f64 = 0.0;
    for l in 0..params.layers.len() {
        for which in 0..2 {
            let len = if which == 0 {
                params.layers[l].weights.as_slice().len()
            } else {
                params.layers[l].bias.as_slice().len()
            };
            for i in 0..len {
                let bump = |delta: f64| {
                    let mut p = params.clone();
                    let s = if which == 0 {
                        p.layers[l].weights.as_mut_slice()
                    } else {
                        p.layers[l].bias.as_mut_slice()
                    };
                    s[i] += delta;
                    loss(&p)
                };
                let numeric = (bump(eps) - bump(-eps)) / (2.0 * eps);
                let analytic = if which == 0 {
                    grads.layers[l].weights.as_slice()[i]
                } else {
                    grads.layers[l].bias.as_slice()[i]
                };
                // entries far below 1e-3 carry ~1e-9 of differencing noise, so
                // they are judged on absolute agreement at that scale
                let err = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-3);
                worst = worst.max(err);
            }
        }
    }
    worst
}

/// Smallest |pre-activation| over every hidden unit and sample, computed
/// with plain loops. Central differences are only valid away from the ReLU kink.
pub fn min_abs_preactivation(params: &NetworkParams<f64>, x: &Matrix<f64>) -> f64 {
    let mut closest = f64::INFINITY;
    for row in x.iter_rows() {
        let mut a: Vec<f64> = row.to_vec();
        for layer in &params.layers[..params.layers.len() - 1] {
            let (fan_in, fan_out) = layer.weights.shape();
            let z: Vec<f64> = (0..fan_out)
                .map(|j| layer.bias.get(0, j) + (0..fan_in).map(|i| a[i] * layer.weights.get(i, j)).sum::<f64>())
                .collect();
            closest = z.iter().fold(closest, |m, v| m.min(v.abs()));
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    closest
}

/// Random small net (every width in 1..=5) with random data, biases non-zero
/// so that the bias gradients are exercised away from zero. Nets with a
/// pre-activation within 1e-3 of the ReLU kink are redrawn.
pub fn random_small_net(rng: &mut Rng) -> (NetworkParams<f64>, Matrix<f64>, Vec<usize>) {
    loop {
        let (p, x, y) = draw_small_net(rng);
        if min_abs_preactivation(&p, &x) > 1e-3 {
            return (p, x, y);
        }
    }
}

fn draw_small_net(rng: &mut Rng) -> (NetworkParams<f64>, Matrix<f64>, Vec<usize>) {
    let depth = 1 + rng.index(3);
    let input = 1 + rng.index(5);
    let hidden: Vec<usize> = (0..depth).map(|_| 1 + rng.index(5)).collect();
    let k = 2 + rng.index(4);
    let arch = MlpArchitecture::new(input, hidden, k).unwrap();
    let mut params: NetworkParams<f64> = NetworkParams::zeros(&arch);
    for l in &mut params.layers {
        for v in l.weights.as_mut_slice().iter_mut().chain(l.bias.as_mut_slice()) {
            *v = rng.standard_normal() * 0.8;
        }
    }
    let n = 2 + rng.index(6);
    let x = Matrix::from_vec(n, input, (0..n * input).map(|_| rng.standard_normal()).collect()).unwrap();
    let y = (0..n).map(|_| rng.index(k)).collect();
    (params, x, y)
}

pub fn dataset(x: Matrix<f32>, labels: Vec<usize>, k: usize, split: Split) -> Dataset {
    let n = labels.len();
    Dataset::new(
        x,
        labels,
        k,
        split,
        Provenance {
            source: "test".into(),
            indices: (0..n).collect(),
            fine_labels: None,
        },
    )
    .unwrap()
}

pub const SMOKE: &str = r#"{
  "experiment": "collapse",
  "dataset": {"source": {"kind": "synthetic", "num_classes": 4, "train_per_class": 32, "test_per_class": 25,
                         "dim": 10, "center_spread": 1.0, "noise_std": 1.0}},
  "architecture": {"hidden_dims": [32, 32]},
  "optimizer": {"batch_size": 32, "iterations": 500, "base_lr": 0.05},
  "metrics": {"cadence": {"mode": "every", "every": 50}, "export_features": true},
  "checkpoints": {"mode": "every", "every": 250},
  "seed": 7
}"#;

pub const TRANSFER_SMOKE: &str = r#"{
  "experiment": "transfer",
  "dataset": {"source": {"kind": "synthetic", "num_classes": 4, "train_per_class": 32, "test_per_class": 25,
                         "dim": 10, "center_spread": 1.0, "noise_std": 1.0},
              "train": {"mode": "first", "n": 64}, "test": {"mode": "first", "n": 50},
              "grouping": [0, 1, 0, 1]},
  "architecture": {"hidden_dims": [16, 16]},
  "optimizer": {"batch_size": 32, "iterations": 200, "base_lr": 0.05},
  "metrics": {"cadence": {"mode": "none"}},
  "checkpoints": {"mode": "geometric", "count": 4},
  "transfer": {"finetune_train": {"mode": "range", "offset": 64, "count": 64},
               "finetune_test": {"mode": "range", "offset": 50, "count": 50},
               "lr_grid": {"min": 0.0005, "max": 0.25, "points": 4},
               "finetune_iterations": 50},
  "seed": 3
}"#;

/// A config from JSON text with `output_dir` pointed at `out` plus extra overrides.
pub fn config_in(text: &str, out: &std::path::Path, extra: &[&str]) -> nclab::harness::ExperimentConfig {
    let mut overrides = vec![format!("output_dir={}", serde_json::Value::String(out.display().to_string()))];
    overrides.extend(extra.iter().map(|s| s.to_string()));
    nclab::cli::parse_config_str(text, &overrides).unwrap()
}

/// Every regular file below `dir` except run_info.json, as (relative path, bytes), sorted.
pub fn tree_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if p.file_name().is_some_and(|n| n != "run_info.json" && n != "config.json") {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
