use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{DataSource, NoiseSpec, QRule, SweepSpec};
use crate::detection::Algorithm;
use crate::error::{Error, Result};
use crate::influence::{MeasureKind, MeasureSettings};
use crate::model::MlpConfig;
use crate::theory::TheoryGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Clean points sampled per class.
    pub m_k: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rank the reference points as well.
    #[serde(default)]
    pub include_in_ranking: bool,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            m_k: 50,
            seed: 0,
            include_in_ranking: false,
        }
    }
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::new(0.0, 0)
}

fn default_measures() -> Vec<MeasureKind> {
    vec![MeasureKind::Gd]
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Everything a command needs, read from one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Seed for synthetic data in single-run commands.
    #[serde(default)]
    pub data_seed: u64,
    pub model: MlpConfig,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default = "default_measures")]
    pub measures: Vec<MeasureKind>,
    #[serde(default)]
    pub measure_settings: MeasureSettings,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Keep per-class scores in plain rankings too.
    #[serde(default)]
    pub class_scores: bool,
    /// Noise rates for `sweep`; `evaluate` uses `noise.p`.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub q_rule: QRule,
    /// Seeds for `evaluate` and `sweep`.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub theory: Option<TheoryGrid>,
    /// Excluded from the config hash.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config is not valid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::InvalidConfig(reason) => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.noise.validate()?;
        self.measure_settings.validate()?;
        if let DataSource::Blobs(b) = &self.data {
            b.validate()?;
            if b.dim != self.model.input_dim {
                return Err(Error::InvalidConfig(format!(
                    "data has {} features but model.input_dim is {}",
                    b.dim, self.model.input_dim
                )));
            }
            if b.classes > self.model.output_dim {
                return Err(Error::InvalidConfig(format!(
                    "data has {} classes but model.output_dim is {}",
                    b.classes, self.model.output_dim
                )));
            }
        }
        if self.measures.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "measures, algorithms and seeds must be non-empty".into(),
            ));
        }
        if self.reference.m_k == 0 {
            return Err(Error::InvalidConfig("reference.m_k must be at least 1".into()));
        }
        for &p in &self.p_grid {
            NoiseSpec::new(p, 0).validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sweep_spec(&self, p_grid: Vec<f64>) -> SweepSpec {
        SweepSpec {
            data: self.data.clone(),
            model: self.model.clone(),
            p_grid,
            q_rule: self.q_rule.clone(),
            measures: self.measures.clone(),
            measure_settings: self.measure_settings,
            algorithms: self.algorithms.clone(),
            seeds: self.seeds.clone(),
            m_k: self.reference.m_k,
            include_reference: self.reference.include_in_ranking,
        }
    }
}

/// Applies `a.b.c=value`. The value is parsed as a TOML value and falls back
/// to a bare string.
fn apply_override(doc: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{item}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("bad override key `{key}`")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [data]
        kind = "blobs"
        n = 30
        classes = 3
        separation = 4.0

        [model]
        input_dim = 2
        hidden = [8]
        output_dim = 3
        learning_rate = 0.2
        epochs = 20
    "#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml(BASE, &[]).unwrap();
        assert_eq!(c.measures, vec![MeasureKind::Gd]);
        assert_eq!(c.reference.m_k, 50);
        assert_eq!(c.q_rule, QRule::default());
        assert_eq!(c.noise.p, 0.0);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = RunConfig::from_toml(
            BASE,
            &[
                "noise.p=0.2".into(),
                "model.epochs = 7".into(),
                "measures=[\"if\", \"tracin\"]".into(),
                "reference.m_k=3".into(),
                "q_rule=\"equal_p\"".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.noise.p, 0.2);
        assert_eq!(c.model.epochs, 7);
        assert_eq!(c.measures, vec![MeasureKind::If, MeasureKind::TracIn]);
        assert_eq!(c.reference.m_k, 3);
        assert_eq!(c.q_rule, QRule::EqualP);
        assert!(RunConfig::from_toml(BASE, &["bogus=1".into()]).is_err());
        assert!(RunConfig::from_toml(BASE, &["model.nope=1".into()]).is_err());
        assert!(RunConfig::from_toml(BASE, &["noise".into()]).is_err());
        assert!(RunConfig::from_toml(BASE, &["model.input_dim=3".into()]).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::from_toml(BASE, &[]).unwrap();
        let b = RunConfig::from_toml(BASE, &["out_dir=\"elsewhere\"".into()]).unwrap();
        let c = RunConfig::from_toml(BASE, &["data_seed=1".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
