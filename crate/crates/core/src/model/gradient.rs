use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{dot_unchecked, norm, Matrix};

use super::mlp::ModelParams;

/// Gradient of the cross-entropy loss with respect to the logits, `ŷ − e_k`.
pub fn logit_gradient(probs: &[f64], label: usize) -> Result<Vec<f64>> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    Ok(logit_gradient_unchecked(probs, label))
}

pub(crate) fn logit_gradient_unchecked(probs: &[f64], label: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    g
}

/// Last-layer weight gradient kept as the rank-1 pair `(∇_a ℓ, u)`,
/// standing for the `d_y × d_h` matrix `∇_a ℓ · uᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredGradient {
    pub logit_grad: Vec<f64>,
    pub activation: Vec<f64>,
}

impl FactoredGradient {
    pub fn new(logit_grad: Vec<f64>, activation: Vec<f64>) -> Self {
        Self { logit_grad, activation }
    }

    pub fn output_dim(&self) -> usize {
        self.logit_grad.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.activation.len()
    }

    /// The outer product `∇_a ℓ · uᵀ`.
    pub fn materialize(&self) -> Matrix {
        Matrix::outer(&self.logit_grad, &self.activation)
    }

    /// Frobenius norm, `‖∇_a ℓ‖ · ‖u‖`.
    pub fn norm(&self) -> f64 {
        norm(&self.logit_grad) * norm(&self.activation)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            logit_grad: self.logit_grad.iter().map(|v| c * v).collect(),
            activation: self.activation.clone(),
        }
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        ensure_len("gradient output dim", self.output_dim(), other.output_dim())?;
        ensure_len("gradient hidden dim", self.hidden_dim(), other.hidden_dim())
    }

    /// `⟨self, other⟩_F = (∇_a ℓ · ∇_a' ℓ)(u · u')`, in `O(d_y + d_h)`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.dot_unchecked(other))
    }

    #[inline]
    pub(crate) fn dot_unchecked(&self, other: &Self) -> f64 {
        dot_unchecked(&self.logit_grad, &other.logit_grad) * dot_unchecked(&self.activation, &other.activation)
    }

    /// `vec(self)ᵀ · m` for a row-major `d_y × d_h` matrix, i.e. `∇_a ℓᵀ M u`.
    pub(crate) fn dot_dense_unchecked(&self, m: &[f64]) -> f64 {
        let h = self.hidden_dim();
        self.logit_grad
            .iter()
            .enumerate()
            .map(|(r, &g)| g * dot_unchecked(&m[r * h..(r + 1) * h], &self.activation))
            .sum()
    }
}

/// Gradient of the loss at `(x, label)` with respect to the final weight
/// matrix, in factored form.
pub fn last_layer_gradient(params: &ModelParams, x: &[f64], label: usize) -> Result<FactoredGradient> {
    let pass = params.forward(x)?;
    let logit_grad = logit_gradient(&pass.probs, label)?;
    Ok(FactoredGradient::new(logit_grad, pass.penultimate().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MlpConfig;
    use crate::numerics::RngStream;

    #[test]
    fn logit_gradient_values() {
        let t = 1.0 / 3.0;
        let g = logit_gradient(&[t, t, t], 0).unwrap();
        assert!((g[0] + 2.0 / 3.0).abs() < 1e-15 && (g[1] - t).abs() < 1e-15);
        assert_eq!(logit_gradient(&[0.0, 1.0, 0.0], 1).unwrap(), vec![0.0; 3]);
        let g = logit_gradient(&[0.9, 0.05, 0.05], 0).unwrap();
        assert!((g[0] + 0.1).abs() < 1e-15);
        assert_eq!(&g[1..], &[0.05, 0.05]);
        assert!(logit_gradient(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn factored_matches_backprop_last_block() {
        let mut rng = RngStream::new(17);
        for seed in 0..20 {
            let mut cfg = MlpConfig::new(3, vec![5, 4], 3);
            cfg.seed = seed;
            let p = ModelParams::init(&cfg).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let label = rng.below(3);
            let fg = last_layer_gradient(&p, &x, label).unwrap();
            let (full, _) = p.backprop(&x, label).unwrap();
            let dense = fg.materialize();
            let block = full.last_layer_weights();
            for (a, b) in dense.as_slice().iter().zip(block.as_slice()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn perfectly_classified_point_has_tiny_gradient() {
        let layer = crate::model::Layer {
            weights: Matrix::from_rows(&[vec![12.0, 0.0], vec![0.0, 0.0], vec![-12.0, 0.0]]).unwrap(),
            bias: None,
        };
        let p = ModelParams::from_layers(vec![layer], 0.01).unwrap();
        let x = [1.0, 0.5];
        let g = last_layer_gradient(&p, &x, 0).unwrap();
        let pass = p.forward(&x).unwrap();
        let eps_conf = 1.0 - pass.probs[0];
        assert!(g.norm() <= 3.0 * eps_conf * norm(&x));
        assert!(eps_conf > 0.0 && g.norm() < 1e-4);
    }

    #[test]
    fn dot_dense_matches_materialized() {
        let a = FactoredGradient::new(vec![0.2, -0.5, 0.3], vec![1.0, 2.0]);
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, -1.0], vec![2.0, 3.0]]).unwrap();
        let expect = a.materialize().frobenius_dot(&m).unwrap();
        assert!((a.dot_dense_unchecked(m.as_slice()) - expect).abs() < 1e-14);
    }
}
