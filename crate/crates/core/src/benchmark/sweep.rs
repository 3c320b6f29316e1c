use std::io::Write;
use std::path::PathBuf;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::detection::{detect_with_scorer, Algorithm, DetectOptions};
use crate::error::{Error, Result};
use crate::influence::{MeasureKind, MeasureSettings, ModelArtifacts, Scorer, SimilarityMeasure};
use crate::model::{train, MlpConfig};
use crate::numerics::stats::{mean, std_dev};
use crate::numerics::RngStream;

use super::{inject_label_noise, precision_at_q, recall_at_q, sample_reference, BlobSpec, NoiseSpec};

/// Percentages selected when no q grid is given.
/// Precision and recall per q for one ranking.
type PrecisionRecall = (Vec<f64>, Vec<f64>);

pub const DEFAULT_Q_GRID: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Fresh blobs per seed.
    Blobs(BlobSpec),
    /// A fixed CSV dataset; only noise, reference and model vary per seed.
    Csv {
        path: PathBuf,
        #[serde(default)]
        num_classes: Option<usize>,
    },
}

impl DataSource {
    pub fn load(&self, seed: u64) -> Result<LabeledDataset> {
        match self {
            DataSource::Blobs(b) => b.generate(seed),
            DataSource::Csv { path, num_classes } => LabeledDataset::load_csv(path, *num_classes),
        }
    }
}

/// How the selection percentage `q` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QRule {
    /// `q = 100·p`.
    EqualP,
    Grid(Vec<f64>),
}

impl Default for QRule {
    fn default() -> Self {
        QRule::Grid(DEFAULT_Q_GRID.to_vec())
    }
}

impl QRule {
    fn grid(&self, p: f64) -> Vec<f64> {
        match self {
            QRule::EqualP => vec![100.0 * p],
            QRule::Grid(g) => g.clone(),
        }
    }
}

/// A full-factorial detection experiment over noise rates and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub data: DataSource,
    /// Its `seed` is replaced by each sweep seed.
    pub model: MlpConfig,
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub q_rule: QRule,
    pub measures: Vec<MeasureKind>,
    #[serde(default)]
    pub measure_settings: MeasureSettings,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub m_k: usize,
    #[serde(default)]
    pub include_reference: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::InvalidConfig(format!("sweep needs at least one {what}")));
        if self.p_grid.is_empty() {
            return empty("noise rate");
        }
        if self.seeds.is_empty() {
            return empty("seed");
        }
        if self.measures.is_empty() {
            return empty("measure");
        }
        if self.algorithms.is_empty() {
            return empty("algorithm");
        }
        if self.m_k == 0 {
            return Err(Error::InvalidConfig("m_k must be at least 1".into()));
        }
        for &p in &self.p_grid {
            NoiseSpec::new(p, 0).validate()?;
            let grid = self.q_rule.grid(p);
            if grid.is_empty() {
                return empty("q value");
            }
            if grid.iter().any(|&q| !(q > 0.0 && q <= 100.0)) {
                return Err(Error::InvalidConfig(format!(
                    "q values must be in (0, 100], got {grid:?} at p={p}"
                )));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig("q grid must be strictly ascending".into()));
            }
        }
        self.measure_settings.validate()?;
        self.model.validate()
    }

    fn cells(&self) -> Vec<(usize, u64)> {
        (0..self.p_grid.len())
            .flat_map(|pi| self.seeds.iter().map(move |&s| (pi, s)))
            .collect()
    }
}

/// Precision and recall at each q for one (p, measure, algorithm), per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub p: f64,
    pub measure: MeasureKind,
    pub algorithm: Algorithm,
    pub q_grid: Vec<f64>,
    /// Seeds whose cell succeeded, in sweep order.
    pub seeds: Vec<u64>,
    /// `precision[qi][si]`.
    pub precision: Vec<Vec<f64>>,
    pub recall: Vec<Vec<f64>>,
    pub precision_mean: Vec<f64>,
    pub precision_std: Vec<f64>,
    pub recall_mean: Vec<f64>,
    pub recall_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub p: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub spec: SweepSpec,
    pub reports: Vec<EvalReport>,
    pub failures: Vec<CellFailure>,
}

impl SweepOutcome {
    pub fn report(&self, p: f64, measure: MeasureKind, algorithm: Algorithm) -> Option<&EvalReport> {
        self.reports
            .iter()
            .find(|r| r.p == p && r.measure == measure && r.algorithm == algorithm)
    }

    pub fn to_json(&self, config_hash: Option<&str>) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            config_hash: Option<&'a str>,
            #[serde(flatten)]
            outcome: &'a SweepOutcome,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            config_hash,
            outcome: self,
        })?)
    }

    /// Long-format table: one row per (p, measure, algorithm, q, seed), plus
    /// `mean` and `std` rows.
    pub fn write_csv<W: Write>(&self, out: W, provenance: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(p) = provenance {
            writeln!(out, "# {p}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "measure", "algorithm", "q", "seed", "precision", "recall"])?;
        for r in &self.reports {
            for (qi, q) in r.q_grid.iter().enumerate() {
                let head = [
                    r.p.to_string(),
                    r.measure.to_string(),
                    r.algorithm.to_string(),
                    q.to_string(),
                ];
                for (si, seed) in r.seeds.iter().enumerate() {
                    let mut rec = head.to_vec();
                    rec.extend([
                        seed.to_string(),
                        r.precision[qi][si].to_string(),
                        r.recall[qi][si].to_string(),
                    ]);
                    w.write_record(&rec)?;
                }
                for (tag, p, rc) in [
                    ("mean", r.precision_mean[qi], r.recall_mean[qi]),
                    ("std", r.precision_std[qi], r.recall_std[qi]),
                ] {
                    let mut rec = head.to_vec();
                    rec.extend([tag.to_string(), p.to_string(), rc.to_string()]);
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `[measure][algorithm] -> (precision per q, recall per q)`
type CellResult = Vec<Vec<(Vec<f64>, Vec<f64>)>>;

fn derived_seed(seed: u64, stream: u64) -> u64 {
    RngStream::with_stream(seed, stream).next_u64()
}

fn run_cell(spec: &SweepSpec, fixed: Option<&LabeledDataset>, pi: usize, seed: u64) -> Result<CellResult> {
    let p = spec.p_grid[pi];
    let base = match fixed {
        Some(d) => d.clone(),
        None => spec.data.load(seed)?,
    };
    let (noisy, mask) = match base.mask() {
        Some(m) if p == 0.0 => {
            let m = m.clone();
            (base, m)
        }
        Some(_) => {
            return Err(Error::InvalidConfig(
                "dataset already carries a corruption mask; use p = 0".into(),
            ))
        }
        None => inject_label_noise(&base, &NoiseSpec::new(p, derived_seed(seed, 100 + pi as u64)))?,
    };
    let mut cfg = spec.model.clone();
    cfg.seed = seed;
    let artifacts: ModelArtifacts = train(&noisy, &cfg)?.into();
    let reference = sample_reference(&noisy, &mask, spec.m_k, derived_seed(seed, 200 + pi as u64))?;
    let options = DetectOptions {
        include_reference: spec.include_reference,
        class_scores: false,
    };
    let q_grid = spec.q_rule.grid(p);
    spec.measures
        .iter()
        .map(|&kind| {
            let scorer = Scorer::new(
                SimilarityMeasure::with_settings(kind, spec.measure_settings),
                &artifacts,
                &noisy,
            )?;
            spec.algorithms
                .iter()
                .map(|&alg| {
                    let ranked = detect_with_scorer(alg, &noisy, &reference, &scorer, options)?;
                    let prec = q_grid
                        .iter()
                        .map(|&q| precision_at_q(&ranked, &mask, q))
                        .collect::<Result<_>>()?;
                    let rec = q_grid
                        .iter()
                        .map(|&q| recall_at_q(&ranked, &mask, q))
                        .collect::<Result<_>>()?;
                    Ok((prec, rec))
                })
                .collect()
        })
        .collect()
}

/// Runs every (p, seed) cell, in parallel, and aggregates per
/// (p, measure, algorithm). Failed cells are reported, not fatal.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let fixed = match &spec.data {
        DataSource::Csv { .. } => Some(spec.data.load(0)?),
        DataSource::Blobs(b) => {
            b.validate()?;
            None
        }
    };
    let cells = spec.cells();
    let results: Vec<Result<CellResult>> = cells
        .par_iter()
        .map(|&(pi, seed)| run_cell(spec, fixed.as_ref(), pi, seed))
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (pi, &p) in spec.p_grid.iter().enumerate() {
        let q_grid = spec.q_rule.grid(p);
        let mut ok: Vec<(u64, &CellResult)> = Vec::new();
        for ((cpi, seed), res) in cells.iter().zip(&results) {
            if *cpi != pi {
                continue;
            }
            match res {
                Ok(r) => ok.push((*seed, r)),
                Err(e) => failures.push(CellFailure {
                    p,
                    seed: *seed,
                    error: e.to_string(),
                }),
            }
        }
        if ok.is_empty() {
            continue;
        }
        for (mi, &measure) in spec.measures.iter().enumerate() {
            for (ai, &algorithm) in spec.algorithms.iter().enumerate() {
                let per_q = |pick: fn(&PrecisionRecall) -> &Vec<f64>| -> Vec<Vec<f64>> {
                    (0..q_grid.len())
                        .map(|qi| ok.iter().map(|(_, r)| pick(&r[mi][ai])[qi]).collect())
                        .collect()
                };
                let precision = per_q(|c| &c.0);
                let recall = per_q(|c| &c.1);
                reports.push(EvalReport {
                    p,
                    measure,
                    algorithm,
                    q_grid: q_grid.clone(),
                    seeds: ok.iter().map(|(s, _)| *s).collect(),
                    precision_mean: precision.iter().map(|v| mean(v)).collect(),
                    precision_std: precision.iter().map(|v| std_dev(v)).collect(),
                    recall_mean: recall.iter().map(|v| mean(v)).collect(),
                    recall_std: recall.iter().map(|v| std_dev(v)).collect(),
                    precision,
                    recall,
                });
            }
        }
    }
    Ok(SweepOutcome {
        spec: spec.clone(),
        reports,
        failures,
    })
}
