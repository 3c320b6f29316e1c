use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

use super::config::{MlpConfig, Optimizer};
use super::mlp::{ModelParams, ParamGradients};

/// Parameters captured after `epoch` epochs, with the step size in effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub epoch: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub checkpoints: Vec<Checkpoint>,
    /// Regularized training risk per epoch, measured during the epoch.
    pub loss_history: Vec<f64>,
}

fn check_dataset(dataset: &LabeledDataset, config: &MlpConfig) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    crate::error::ensure_len("dataset features", config.input_dim, dataset.dim())?;
    if dataset.num_classes() > config.output_dim {
        return Err(Error::InvalidConfig(format!(
            "dataset has {} classes but the model outputs {}",
            dataset.num_classes(),
            config.output_dim
        )));
    }
    Ok(())
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Trains from the seeded initialization. Deterministic for a given config.
pub fn train(dataset: &LabeledDataset, config: &MlpConfig) -> Result<TrainedModel> {
    config.validate()?;
    check_dataset(dataset, config)?;
    let mut params = ModelParams::init(config)?;
    let schedule = config.checkpoint_schedule();
    let mut checkpoints = Vec::with_capacity(schedule.len());
    let mut next_ckpt = schedule.iter().peekable();
    let eta = config.learning_rate;

    let capture = |params: &ModelParams, epoch: usize, checkpoints: &mut Vec<Checkpoint>| {
        checkpoints.push(Checkpoint {
            params: params.clone(),
            epoch,
            learning_rate: eta,
        });
    };
    if next_ckpt.peek() == Some(&&0) {
        capture(&params, 0, &mut checkpoints);
        next_ckpt.next();
    }

    let n = dataset.len();
    let batch = config.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = RngStream::with_stream(config.seed, 1);
    let mut adam = match config.optimizer {
        Optimizer::Adam { .. } => Some(AdamState {
            m: vec![0.0; params.num_params()],
            v: vec![0.0; params.num_params()],
            step: 0,
        }),
        Optimizer::Sgd => None,
    };
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if batch < n {
            shuffle_rng.shuffle(&mut order);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut grad = ParamGradients::zeros_like(&params);
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &i in chunk {
                let pass = params.forward(dataset.x(i)).map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch, loss: f64::NAN },
                    other => other,
                })?;
                batch_loss += crate::numerics::cross_entropy(&pass.probs, dataset.label(i))?;
                params.backprop_into(&pass, dataset.label(i), scale, &mut grad);
            }
            let reg = 0.5 * config.l2 * params.squared_norm();
            epoch_loss += batch_loss + reg * chunk.len() as f64;
            if config.l2 > 0.0 {
                let as_grad = ParamGradients {
                    layers: params.layers.clone(),
                };
                grad.add_scaled(config.l2, &as_grad);
            }
            match (&mut adam, config.optimizer) {
                (Some(state), Optimizer::Adam { beta1, beta2, eps }) => {
                    state.step += 1;
                    let flat = grad.flatten();
                    let b1t = 1.0 - beta1.powi(state.step);
                    let b2t = 1.0 - beta2.powi(state.step);
                    let mut update = Vec::with_capacity(flat.len());
                    for (k, g) in flat.iter().enumerate() {
                        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g;
                        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g;
                        let mhat = state.m[k] / b1t;
                        let vhat = state.v[k] / b2t;
                        update.push(mhat / (vhat.sqrt() + eps));
                    }
                    let step = ParamGradients {
                        layers: params.with_flat(&update)?.layers,
                    };
                    params.add_scaled(-eta, &step);
                }
                _ => params.add_scaled(-eta, &grad),
            }
        }
        let loss = epoch_loss / n as f64;
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        loss_history.push(loss);
        if next_ckpt.peek() == Some(&&epoch) {
            capture(&params, epoch, &mut checkpoints);
            next_ckpt.next();
        }
    }

    Ok(TrainedModel {
        params,
        checkpoints,
        loss_history,
    })
}

/// Mean cross-entropy over a dataset (no regularization term).
pub fn risk(params: &ModelParams, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("risk dataset"));
    }
    let mut total = 0.0;
    for i in 0..dataset.len() {
        total += params.loss(dataset.x(i), dataset.label(i))?;
    }
    Ok(total / dataset.len() as f64)
}

pub fn accuracy(params: &ModelParams, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("accuracy dataset"));
    }
    let mut hits = 0usize;
    for i in 0..dataset.len() {
        hits += usize::from(params.predict(dataset.x(i))? == dataset.label(i));
    }
    Ok(hits as f64 / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn two_clusters() -> LabeledDataset {
        let mut rng = RngStream::new(1);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let center = if c == 0 { -3.0 } else { 3.0 };
            rows.push(vec![center + 0.5 * rng.normal(), center + 0.5 * rng.normal()]);
            labels.push(c);
        }
        LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap()
    }

    #[test]
    fn checkpoints_follow_schedule() {
        let ds = two_clusters();
        let mut cfg = MlpConfig::new(2, vec![4], 2);
        cfg.epochs = 12;
        cfg.checkpoints = Some(vec![0, 3, 12]);
        let m = train(&ds, &cfg).unwrap();
        assert_eq!(
            m.checkpoints.iter().map(|c| c.epoch).collect::<Vec<_>>(),
            vec![0, 3, 12]
        );
        assert_eq!(m.checkpoints[0].params, ModelParams::init(&cfg).unwrap());
        assert_eq!(m.checkpoints[2].params, m.params);
        assert!(m.checkpoints.iter().all(|c| c.learning_rate == cfg.learning_rate));
        assert_eq!(m.loss_history.len(), 12);
    }

    #[test]
    fn minibatch_and_adam_are_deterministic() {
        let ds = two_clusters();
        let mut cfg = MlpConfig::new(2, vec![4], 2);
        cfg.epochs = 20;
        cfg.batch_size = Some(8);
        cfg.optimizer = Optimizer::adam();
        cfg.learning_rate = 0.01;
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert!(accuracy(&a.params, &ds).unwrap() > 0.9);
    }

    #[test]
    fn divergence_is_reported() {
        let ds = two_clusters();
        let mut cfg = MlpConfig::new(2, vec![8, 8], 2);
        cfg.learning_rate = 1e150;
        cfg.epochs = 50;
        assert!(matches!(train(&ds, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn rejects_incompatible_dataset() {
        let ds = two_clusters();
        let cfg = MlpConfig::new(3, vec![], 2);
        assert!(train(&ds, &cfg).is_err());
    }
}
