//! Synthetic benchmark plumbing: blob datasets, label-noise injection,
//! reference sampling, precision/recall metrics, score distributions, the
//! leave-one-out oracle and the factorial sweep harness.

mod distributions;
mod loo;
mod sweep;

pub use distributions::{score_distributions, DistributionSummary, Pairing};
pub use loo::{convex_config, loo_retrain_oracle, reference_risk, LooOracle};
pub use sweep::{run_sweep, CellFailure, DataSource, EvalReport, QRule, SweepOutcome, SweepSpec, DEFAULT_Q_GRID};

use serde::{Deserialize, Serialize};

use crate::data::{CorruptionMask, LabeledDataset};
use crate::detection::{RankedDataset, ReferenceSet};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Isotropic Gaussian clusters in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub n: usize,
    pub classes: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Distance of each cluster center from the origin.
    pub separation: f64,
    /// Per-coordinate standard deviation within a cluster.
    #[serde(default = "default_std")]
    pub std: f64,
}

fn default_dim() -> usize {
    2
}

fn default_std() -> f64 {
    1.0
}

impl BlobSpec {
    pub fn new(n: usize, classes: usize, dim: usize, separation: f64) -> Self {
        Self {
            n,
            classes,
            dim,
            separation,
            std: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "blobs need at least one class and one dimension".into(),
            ));
        }
        if self.n < self.classes {
            return Err(Error::InvalidConfig(format!(
                "blobs need n >= classes, got n={} classes={}",
                self.n, self.classes
            )));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "separation must be > 0, got {}",
                self.separation
            )));
        }
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return Err(Error::InvalidConfig(format!("std must be >= 0, got {}", self.std)));
        }
        Ok(())
    }

    /// Cluster centers. In two or more dimensions they sit evenly on a circle
    /// in the first two coordinates; in one dimension they are spaced
    /// `separation` apart.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|k| {
                let mut c = vec![0.0; self.dim];
                if self.dim == 1 {
                    c[0] = self.separation * k as f64;
                } else {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / self.classes as f64;
                    c[0] = self.separation * t.cos();
                    c[1] = self.separation * t.sin();
                }
                c
            })
            .collect()
    }

    /// Point `i` belongs to class `i mod C`, so class counts differ by at most one.
    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        self.validate()?;
        let centers = self.centers();
        let mut rng = RngStream::new(seed);
        let mut data = Vec::with_capacity(self.n * self.dim);
        let mut labels = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let k = i % self.classes;
            data.extend(centers[k].iter().map(|c| c + self.std * rng.normal()));
            labels.push(k);
        }
        LabeledDataset::new(Matrix::from_row_major(self.n, self.dim, data)?, labels, self.classes)
    }
}

pub fn make_blobs(n: usize, classes: usize, dim: usize, separation: f64, seed: u64) -> Result<LabeledDataset> {
    BlobSpec::new(n, classes, dim, separation).generate(seed)
}

/// Uniform label flipping: `round(p·n)` points get a label drawn uniformly
/// from the other `C − 1` classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(p: f64, seed: u64) -> Self {
        Self { p, seed }
    }

    /// Number of flips for `n` points, rounding half up.
    pub fn flips(&self, n: usize) -> usize {
        (self.p * n as f64 + 0.5).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::InvalidConfig(format!(
                "noise fraction must be in [0, 1), got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Returns the noisy dataset (with its mask attached) and the mask.
pub fn inject_label_noise(dataset: &LabeledDataset, spec: &NoiseSpec) -> Result<(LabeledDataset, CorruptionMask)> {
    spec.validate()?;
    let n = dataset.len();
    let flips = spec.flips(n);
    if flips > 0 && flips >= n {
        return Err(Error::InvalidConfig(format!(
            "{flips} flips would corrupt all {n} points"
        )));
    }
    let classes = dataset.num_classes();
    if flips > 0 && classes < 2 {
        return Err(Error::InvalidConfig("label noise needs at least two classes".into()));
    }
    let original = dataset.labels().to_vec();
    let mut labels = original.clone();
    let mut corrupted = vec![false; n];
    let mut rng = RngStream::new(spec.seed);
    let mut chosen = rng.sample_indices(n, flips);
    chosen.sort_unstable();
    for i in chosen {
        let other = rng.below(classes - 1);
        labels[i] = if other >= original[i] { other + 1 } else { other };
        corrupted[i] = true;
    }
    let mask = CorruptionMask {
        corrupted,
        original_labels: original,
    };
    let noisy = dataset.relabeled(labels, mask.clone())?;
    Ok((noisy, mask))
}

/// Samples `m_k` clean points per class without replacement.
pub fn sample_reference(
    dataset: &LabeledDataset,
    mask: &CorruptionMask,
    m_k: usize,
    seed: u64,
) -> Result<ReferenceSet> {
    sample_reference_sizes(dataset, mask, &vec![m_k; dataset.num_classes()], seed)
}

/// Like [`sample_reference`] with a separate size per class.
pub fn sample_reference_sizes(
    dataset: &LabeledDataset,
    mask: &CorruptionMask,
    sizes: &[usize],
    seed: u64,
) -> Result<ReferenceSet> {
    crate::error::ensure_len("reference sizes", dataset.num_classes(), sizes.len())?;
    crate::error::ensure_len("corruption mask", dataset.len(), mask.len())?;
    let mut indices = Vec::new();
    for (class, &want) in sizes.iter().enumerate() {
        let clean: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.label(i) == class && !mask.is_corrupted(i))
            .collect();
        if clean.len() < want {
            return Err(Error::InsufficientClean {
                class,
                needed: want,
                available: clean.len(),
            });
        }
        let mut rng = RngStream::with_stream(seed, class as u64);
        let mut picked: Vec<usize> = rng
            .sample_indices(clean.len(), want)
            .into_iter()
            .map(|j| clean[j])
            .collect();
        picked.sort_unstable();
        indices.extend(picked);
    }
    ReferenceSet::from_indices(dataset, &indices)
}

/// Size of the top-`q`% prefix of `n` ranked points, `ceil(q·n/100)`.
pub fn selection_size(n: usize, q: f64) -> usize {
    // the slack absorbs representation error in products like 0.2·100
    let k = (q * n as f64 / 100.0 - 1e-9).ceil();
    (k.max(0.0) as usize).min(n)
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::InvalidConfig(format!("q must be in (0, 100], got {q}")));
    }
    Ok(())
}

/// Fraction of corrupted points among the first `ceil(q·n/100)` of `order`.
pub fn precision_of_order(order: &[usize], mask: &CorruptionMask, q: f64) -> Result<f64> {
    check_q(q)?;
    if order.is_empty() {
        return Err(Error::Empty("ranking"));
    }
    let k = selection_size(order.len(), q).max(1);
    let hits = count_corrupted(&order[..k], mask)?;
    Ok(hits as f64 / k as f64)
}

/// Fraction of the corrupted points in `order` found in its top `q`%.
/// Zero when `order` holds no corrupted point.
pub fn recall_of_order(order: &[usize], mask: &CorruptionMask, q: f64) -> Result<f64> {
    check_q(q)?;
    if order.is_empty() {
        return Err(Error::Empty("ranking"));
    }
    let total = count_corrupted(order, mask)?;
    if total == 0 {
        return Ok(0.0);
    }
    let k = selection_size(order.len(), q).max(1);
    Ok(count_corrupted(&order[..k], mask)? as f64 / total as f64)
}

fn count_corrupted(indices: &[usize], mask: &CorruptionMask) -> Result<usize> {
    let mut hits = 0;
    for &i in indices {
        if i >= mask.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: mask.len(),
            });
        }
        hits += usize::from(mask.is_corrupted(i));
    }
    Ok(hits)
}

pub fn precision_at_q(ranked: &RankedDataset, mask: &CorruptionMask, q: f64) -> Result<f64> {
    precision_of_order(&ranked.order(), mask, q)
}

pub fn recall_at_q(ranked: &RankedDataset, mask: &CorruptionMask, q: f64) -> Result<f64> {
    recall_of_order(&ranked.order(), mask, q)
}
