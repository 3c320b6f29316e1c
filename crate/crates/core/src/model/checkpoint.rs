//! Versioned JSON persistence for checkpoints and final models.
//!
//! Layer weights are stored as flat row-major arrays together with their
//! shape. Floats are written in shortest round-trip form, so a reload
//! reproduces the parameters bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::config::MlpConfig;
use super::mlp::{Layer, ModelParams};
use super::train::Checkpoint;

pub const CHECKPOINT_FORMAT: &str = "ifclass-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointDocument {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub config_hash: Option<String>,
    pub config: MlpConfig,
    pub epoch: usize,
    pub learning_rate: f64,
    pub leaky_slope: f64,
    layers: Vec<LayerRecord>,
}

impl CheckpointDocument {
    pub fn new(checkpoint: &Checkpoint, config: &MlpConfig, config_hash: Option<String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config_hash,
            config: config.clone(),
            epoch: checkpoint.epoch,
            learning_rate: checkpoint.learning_rate,
            leaky_slope: checkpoint.params.leaky_slope,
            layers: checkpoint
                .params
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weights: l.weights.as_slice().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unknown checkpoint format `{}`",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Unsupported(format!("checkpoint version {}", self.version)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("checkpoint learning_rate must be > 0".into()));
        }
        let layers = self
            .layers
            .iter()
            .map(|r| {
                Ok(Layer {
                    weights: Matrix::from_row_major(r.rows, r.cols, r.weights.clone())?,
                    bias: r.bias.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = ModelParams::from_layers(layers, self.leaky_slope)?;
        let widths: Vec<usize> = std::iter::once(params.input_dim())
            .chain(params.layers.iter().map(Layer::out_dim))
            .collect();
        if widths != self.config.widths() {
            return Err(Error::InvalidConfig(
                "checkpoint layers disagree with its config".into(),
            ));
        }
        Ok(Checkpoint {
            params,
            epoch: self.epoch,
            learning_rate: self.learning_rate,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn save_checkpoint(
    path: &Path,
    checkpoint: &Checkpoint,
    config: &MlpConfig,
    config_hash: Option<String>,
) -> Result<()> {
    let doc = CheckpointDocument::new(checkpoint, config, config_hash);
    std::fs::write(path, doc.to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, MlpConfig)> {
    let text = std::fs::read_to_string(path)?;
    let doc = CheckpointDocument::from_json(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok((doc.to_checkpoint()?, doc.config))
}

pub const MODEL_FILE: &str = "model.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// A final model together with the checkpoints it was trained through.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub params: ModelParams,
    pub checkpoints: Vec<Checkpoint>,
    pub config: MlpConfig,
}

/// Writes `dir/model.json` plus one `dir/checkpoints/epoch_NNNNNN.json` per
/// checkpoint before the final epoch (the final model doubles as the last
/// checkpoint). Stale checkpoint files are removed. Returns the number of
/// checkpoint files written.
pub fn save_model_dir(
    dir: &Path,
    params: &ModelParams,
    checkpoints: &[Checkpoint],
    config: &MlpConfig,
    config_hash: Option<String>,
) -> Result<usize> {
    let ckpt_dir = dir.join(CHECKPOINT_DIR);
    if ckpt_dir.exists() {
        std::fs::remove_dir_all(&ckpt_dir)?;
    }
    std::fs::create_dir_all(&ckpt_dir)?;
    let mut written = 0;
    for c in checkpoints.iter().filter(|c| c.epoch != config.epochs) {
        let name = format!("epoch_{:06}.json", c.epoch);
        save_checkpoint(&ckpt_dir.join(name), c, config, config_hash.clone())?;
        written += 1;
    }
    let last = Checkpoint {
        params: params.clone(),
        epoch: config.epochs,
        learning_rate: config.learning_rate,
    };
    save_checkpoint(&dir.join(MODEL_FILE), &last, config, config_hash)?;
    Ok(written)
}

/// Loads `model.json` (or a directory holding it) and the checkpoints saved
/// next to it. The final model joins the checkpoint list when its epoch is
/// on the schedule.
pub fn load_model_dir(path: &Path) -> Result<SavedModel> {
    let file = if path.is_dir() {
        path.join(MODEL_FILE)
    } else {
        path.to_path_buf()
    };
    let (last, config) = load_checkpoint(&file)?;
    let mut checkpoints = Vec::new();
    let dir = file.parent().unwrap_or(Path::new(".")).join(CHECKPOINT_DIR);
    if dir.is_dir() {
        let mut names: Vec<std::path::PathBuf> = std::fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        names.retain(|p| p.extension().is_some_and(|x| x == "json"));
        names.sort();
        for p in names {
            checkpoints.push(load_checkpoint(&p)?.0);
        }
    }
    if config.checkpoint_schedule().contains(&last.epoch) {
        checkpoints.push(last.clone());
    }
    checkpoints.sort_by_key(|c| c.epoch);
    Ok(SavedModel {
        params: last.params,
        checkpoints,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let mut cfg = MlpConfig::new(2, vec![5], 3);
        cfg.seed = 4;
        let ckpt = Checkpoint {
            params: ModelParams::init(&cfg).unwrap(),
            epoch: 7,
            learning_rate: 0.1,
        };
        let doc = CheckpointDocument::new(&ckpt, &cfg, Some("abc".into()));
        let back = CheckpointDocument::from_json(&doc.to_json().unwrap())
            .unwrap()
            .to_checkpoint()
            .unwrap();
        assert_eq!(back, ckpt);
    }

    #[test]
    fn rejects_bad_documents() {
        let cfg = MlpConfig::new(2, vec![], 3);
        let ckpt = Checkpoint {
            params: ModelParams::init(&cfg).unwrap(),
            epoch: 0,
            learning_rate: 0.1,
        };
        let mut doc = CheckpointDocument::new(&ckpt, &cfg, None);
        doc.version = 99;
        assert!(doc.to_checkpoint().is_err());

        let mut doc = CheckpointDocument::new(&ckpt, &cfg, None);
        doc.config.hidden = vec![4];
        assert!(doc.to_checkpoint().is_err());

        let json = CheckpointDocument::new(&ckpt, &cfg, None).to_json().unwrap();
        let tampered = json.replacen("\"epoch\"", "\"extra\": 1, \"epoch\"", 1);
        assert!(CheckpointDocument::from_json(&tampered).is_err());
    }
}
