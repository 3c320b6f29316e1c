//! Reference implementations used only to check the library.
#![allow(dead_code)]

use ifclass::influence::LastLayerHessian;
use ifclass::model::{MlpConfig, ModelParams};
use ifclass::numerics::RngStream;

/// Dense `(d_y·d_h)²` Hessian assembled entry by entry from the Kronecker
/// definition.
pub fn dense_hessian(h: &LastLayerHessian) -> Vec<Vec<f64>> {
    let (dy, dh) = (h.output_dim(), h.hidden_dim());
    let dim = dy * dh;
    let n = h.num_examples() as f64;
    let mut m = vec![vec![0.0; dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = h.damping();
    }
    for (p, u) in h.examples() {
        for a in 0..dy {
            for b in 0..dy {
                let s = if a == b { p[a] * (1.0 - p[a]) } else { -p[a] * p[b] };
                for c in 0..dh {
                    for d in 0..dh {
                        m[a * dh + c][b * dh + d] += s * u[c] * u[d] / n;
                    }
                }
            }
        }
    }
    m
}

pub fn dense_matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .zip(b)
        .map(|(r, &bi)| {
            let mut r = r.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}

pub fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Outer product `a bᵀ` flattened row-major.
pub fn outer_flat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Random architecture with 0 to 2 hidden layers.
pub fn random_model(rng: &mut RngStream, seed: u64) -> (MlpConfig, ModelParams) {
    let input = 1 + rng.below(4);
    let depth = rng.below(3);
    let hidden: Vec<usize> = (0..depth).map(|_| 2 + rng.below(5)).collect();
    let output = 2 + rng.below(3);
    let mut cfg = MlpConfig::new(input, hidden, output);
    cfg.bias = rng.below(2) == 0;
    cfg.seed = seed;
    let p = ModelParams::init(&cfg).unwrap();
    // spread the weights beyond the initialization scale
    let flat: Vec<f64> = p.flatten().iter().map(|v| v + 0.5 * rng.normal()).collect();
    let p = p.with_flat(&flat).unwrap();
    (cfg, p)
}

pub fn random_vec(rng: &mut RngStream, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.normal()).collect()
}

/// Central finite-difference gradient of the loss in flattened parameters.
pub fn finite_difference(params: &ModelParams, x: &[f64], label: usize, h: f64) -> Vec<f64> {
    let base = params.flatten();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            plus[k] += h;
            let mut minus = base.clone();
            minus[k] -= h;
            let lp = params.with_flat(&plus).unwrap().loss(x, label).unwrap();
            let lm = params.with_flat(&minus).unwrap().loss(x, label).unwrap();
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

/// True when every hidden pre-activation is at least `margin` from the
/// leaky-ReLU kink.
pub fn away_from_kinks(params: &ModelParams, x: &[f64], margin: f64) -> bool {
    let pass = params.forward(x).unwrap();
    pass.pre_activations.iter().flatten().all(|v| v.abs() >= margin)
}
