use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_slope() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

/// Update rule used by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
#[derive(Default)]
pub enum Optimizer {
    #[default]
    Sgd,
    /// Adam with bias correction. The L2 term is folded into the gradient.
    Adam {
        #[serde(default = "Optimizer::default_beta1")]
        beta1: f64,
        #[serde(default = "Optimizer::default_beta2")]
        beta2: f64,
        #[serde(default = "Optimizer::default_eps")]
        eps: f64,
    },
}

impl Optimizer {
    fn default_beta1() -> f64 {
        0.9
    }
    fn default_beta2() -> f64 {
        0.999
    }
    fn default_eps() -> f64 {
        1e-8
    }

    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Architecture and training schedule of a leaky-ReLU softmax MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub input_dim: usize,
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "default_true")]
    pub bias: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Coefficient of `(l2 / 2)‖θ‖²` added to the training risk.
    #[serde(default)]
    pub l2: f64,
    #[serde(default)]
    pub seed: u64,
    /// Epochs after which a checkpoint is captured. `None` selects five
    /// evenly spaced epochs plus the final one.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden,
            output_dim,
            leaky_slope: default_slope(),
            bias: true,
            learning_rate: 0.1,
            epochs: 100,
            batch_size: None,
            optimizer: Optimizer::Sgd,
            l2: 0.0,
            seed: 0,
            checkpoints: None,
        }
    }

    /// The toy 3-class setup: 2 inputs, hidden widths 100 and 2, plain SGD at
    /// η = 1e-3 for 1000 epochs.
    pub fn toy_three_class() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 1000,
            ..Self::new(2, vec![100, 2], 3)
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }

    /// Width of the layer feeding the output layer.
    pub fn penultimate_dim(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.output_dim < 2 {
            return bad(format!("output_dim must be >= 2, got {}", self.output_dim));
        }
        if self.input_dim == 0 || self.hidden.contains(&0) {
            return bad("all layer widths must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return bad(format!("leaky_slope must be >= 0, got {}", self.leaky_slope));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad(format!("l2 must be >= 0, got {}", self.l2));
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be >= 1".into());
        }
        if let Some(s) = &self.checkpoints {
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return bad("checkpoint epochs must be strictly increasing".into());
            }
            if s.iter().any(|&t| t > self.epochs) {
                return bad(format!("checkpoint epoch beyond {} epochs", self.epochs));
            }
        }
        Ok(())
    }

    /// The resolved checkpoint schedule.
    pub fn checkpoint_schedule(&self) -> Vec<usize> {
        match &self.checkpoints {
            Some(s) => s.clone(),
            None => {
                let e = self.epochs;
                let mut s: Vec<usize> = (1..=5).map(|k| (e * k + 3) / 6).filter(|&t| t > 0).collect();
                s.push(e);
                s.dedup();
                s
            }
        }
    }
}
