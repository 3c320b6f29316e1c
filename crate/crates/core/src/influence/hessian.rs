use crate::data::LabeledDataset;
use crate::error::{ensure_len, Error, Result};
use crate::model::ModelParams;
use crate::numerics::{dot_unchecked, LinearOperator};

/// Hessian of the training risk with respect to the final weight matrix,
///
/// `H = (1/n) Σ_i (diag(ŷ_i) − ŷ_i ŷ_iᵀ) ⊗ u_i u_iᵀ + λ I`,
///
/// kept as per-example `(ŷ_i, u_i)` pairs and applied matrix-free. Vectors
/// are `d_y × d_h` matrices flattened row-major. The logits are linear in
/// the final weights, so this block is exact rather than a Gauss-Newton
/// approximation.
#[derive(Debug, Clone)]
pub struct LastLayerHessian {
    output_dim: usize,
    hidden_dim: usize,
    damping: f64,
    probs: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
}

impl LastLayerHessian {
    pub fn new(output_dim: usize, hidden_dim: usize, damping: f64) -> Result<Self> {
        if !(damping > 0.0 && damping.is_finite()) {
            return Err(Error::InvalidConfig(format!("damping must be > 0, got {damping}")));
        }
        Ok(Self {
            output_dim,
            hidden_dim,
            damping,
            probs: Vec::new(),
            activations: Vec::new(),
        })
    }

    /// Adds one example's softmax output and penultimate activation.
    pub fn push(&mut self, probs: Vec<f64>, activation: Vec<f64>) -> Result<()> {
        ensure_len("hessian probs", self.output_dim, probs.len())?;
        ensure_len("hessian activation", self.hidden_dim, activation.len())?;
        self.probs.push(probs);
        self.activations.push(activation);
        Ok(())
    }

    /// Builds the Hessian of the risk over `dataset` at `params`.
    pub fn from_dataset(params: &ModelParams, dataset: &LabeledDataset, damping: f64) -> Result<Self> {
        let mut h = Self::new(params.output_dim(), params.penultimate_dim(), damping)?;
        for i in 0..dataset.len() {
            let pass = params.forward(dataset.x(i))?;
            let u = pass.penultimate().to_vec();
            h.push(pass.probs, u)?;
        }
        Ok(h)
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_examples(&self) -> usize {
        self.probs.len()
    }

    pub fn examples(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.probs
            .iter()
            .zip(&self.activations)
            .map(|(p, u)| (p.as_slice(), u.as_slice()))
    }
}

impl LinearOperator for LastLayerHessian {
    fn dim(&self) -> usize {
        self.output_dim * self.hidden_dim
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (dy, dh) = (self.output_dim, self.hidden_dim);
        for (o, x) in out.iter_mut().zip(v) {
            *o = self.damping * x;
        }
        if self.probs.is_empty() {
            return;
        }
        let inv_n = 1.0 / self.probs.len() as f64;
        let mut w = vec![0.0; dy];
        for (p, u) in self.examples() {
            // (S ⊗ u uᵀ) vec(V) = vec(S V u uᵀ), with S = diag(p) − p pᵀ
            for (r, wr) in w.iter_mut().enumerate() {
                *wr = dot_unchecked(&v[r * dh..(r + 1) * dh], u);
            }
            let pw = dot_unchecked(p, &w);
            for r in 0..dy {
                let s = inv_n * p[r] * (w[r] - pw);
                if s != 0.0 {
                    for (o, &uc) in out[r * dh..(r + 1) * dh].iter_mut().zip(u) {
                        *o += s * uc;
                    }
                }
            }
        }
    }
}
