use crate::data::LabeledDataset;
use crate::detection::ReferenceSet;
use crate::error::{Error, Result};
use crate::model::{train, MlpConfig, ModelParams};

/// Mean cross-entropy of `params` over the reference points.
pub fn reference_risk(params: &ModelParams, reference: &ReferenceSet) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    let mut total = 0.0;
    for p in reference.iter() {
        total += params.loss(&p.features, p.label)?;
    }
    Ok(total / reference.len() as f64)
}

/// A convex setup for `dataset`: linear softmax without bias, L2 of `lambda`,
/// full-batch gradient descent. The step is `1/L` for a bound `L` on the
/// risk's curvature, and the epoch count drives the contraction factor
/// `(1 − λ/L)^E` below 1e-12.
pub fn convex_config(dataset: &LabeledDataset, lambda: f64) -> Result<MlpConfig> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("L2 strength must be > 0, got {lambda}")));
    }
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    // the softmax Hessian block has eigenvalues at most 1/2
    let mean_sq = (0..dataset.len())
        .map(|i| dataset.x(i).iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / dataset.len() as f64;
    let lipschitz = 0.5 * mean_sq + lambda;
    let lr = 1.0 / lipschitz;
    let epochs = ((1e12f64).ln() / (lr * lambda)).ceil() as usize;
    let mut cfg = MlpConfig::new(dataset.dim(), vec![], dataset.num_classes());
    cfg.bias = false;
    cfg.l2 = lambda;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    cfg.checkpoints = Some(vec![epochs]);
    Ok(cfg)
}

/// Ground-truth influence by retraining: `s_i = L(Z', θ̂₋ᵢ) − L(Z', θ̂)`,
/// where `θ̂₋ᵢ` is trained on the dataset without point `i` from the same
/// initialization and seed.
#[derive(Debug, Clone)]
pub struct LooOracle<'a> {
    dataset: &'a LabeledDataset,
    reference: &'a ReferenceSet,
    config: MlpConfig,
    base: ModelParams,
    base_risk: f64,
}

impl<'a> LooOracle<'a> {
    pub fn new(dataset: &'a LabeledDataset, reference: &'a ReferenceSet, config: MlpConfig) -> Result<Self> {
        let base = train(dataset, &config)?.params;
        let base_risk = reference_risk(&base, reference)?;
        Ok(Self {
            dataset,
            reference,
            config,
            base,
            base_risk,
        })
    }

    /// Parameters trained on the full dataset.
    pub fn base_params(&self) -> &ModelParams {
        &self.base
    }

    pub fn base_risk(&self) -> f64 {
        self.base_risk
    }

    pub fn score(&self, i: usize) -> Result<f64> {
        let reduced = self.dataset.without(i)?;
        let params = train(&reduced, &self.config)?.params;
        Ok(reference_risk(&params, self.reference)? - self.base_risk)
    }

    /// Scores every point in order.
    pub fn scores(&self) -> Result<Vec<f64>> {
        (0..self.dataset.len()).map(|i| self.score(i)).collect()
    }
}

pub fn loo_retrain_oracle(
    dataset: &LabeledDataset,
    index: usize,
    reference: &ReferenceSet,
    config: &MlpConfig,
) -> Result<f64> {
    if index >= dataset.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: dataset.len(),
        });
    }
    LooOracle::new(dataset, reference, config.clone())?.score(index)
}
