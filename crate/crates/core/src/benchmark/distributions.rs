use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::influence::{ScoreFlag, Scorer};
use crate::numerics::stats::{mean, quantile_sorted};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    SameClass,
    CrossClass,
}

/// Summary of pairwise scores over clean pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub pairing: Pairing,
    pub pairs: usize,
    pub mean: f64,
    pub median: f64,
    /// `(level, value)` at levels 0.05, 0.25, 0.5, 0.75 and 0.95.
    pub quantiles: Vec<(f64, f64)>,
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    pub zero_fraction: f64,
    /// Pairs scored 0 because a gradient vanished (cosine measures).
    pub degenerate: usize,
}

const LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Scores unordered pairs `i < j` of clean points that share (or do not
/// share) a label. At most `max_pairs` pairs are used, sampled uniformly
/// without replacement when there are more.
pub fn score_distributions(
    dataset: &LabeledDataset,
    scorer: &Scorer<'_>,
    pairing: Pairing,
    max_pairs: usize,
    seed: u64,
) -> Result<DistributionSummary> {
    let clean: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.mask().is_none_or(|m| !m.is_corrupted(i)))
        .collect();
    let mut counts = vec![0usize; dataset.num_classes()];
    for &i in &clean {
        counts[dataset.label(i)] += 1;
    }
    match pairing {
        Pairing::SameClass if counts.iter().all(|&c| c < 2) => {
            return Err(Error::InvalidConfig(
                "same-class pairs need a class with two clean points".into(),
            ))
        }
        Pairing::CrossClass if counts.iter().filter(|&&c| c > 0).count() < 2 => {
            return Err(Error::InvalidConfig(
                "cross-class pairs need two classes with clean points".into(),
            ))
        }
        _ => {}
    }

    let mut pairs = Vec::new();
    for (a, &i) in clean.iter().enumerate() {
        for &j in &clean[a + 1..] {
            let same = dataset.label(i) == dataset.label(j);
            if same == (pairing == Pairing::SameClass) {
                pairs.push((i, j));
            }
        }
    }
    if pairs.len() > max_pairs {
        let mut rng = RngStream::new(seed);
        let mut keep = rng.sample_indices(pairs.len(), max_pairs);
        keep.sort_unstable();
        pairs = keep.into_iter().map(|k| pairs[k]).collect();
    }
    if pairs.is_empty() {
        return Err(Error::Empty("pair sample"));
    }

    // every clean point is prepared once and serves as both sides
    let mut slot = vec![usize::MAX; dataset.len()];
    let mut points = Vec::new();
    for &(i, j) in &pairs {
        for k in [i, j] {
            if slot[k] == usize::MAX {
                slot[k] = points.len();
                points.push((dataset.x(k), dataset.label(k)));
            }
        }
    }
    let prepared = scorer.prepare_all(&points)?;
    let mut degenerate = 0;
    let mut values: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| {
            let s = scorer.similarity(&prepared[slot[i]].gradient, &prepared[slot[j]]);
            degenerate += usize::from(s.flag == ScoreFlag::Degenerate);
            s.value
        })
        .collect();

    let n = values.len() as f64;
    let frac = |f: &dyn Fn(f64) -> bool| values.iter().filter(|&&v| f(v)).count() as f64 / n;
    let positive_fraction = frac(&|v| v > 0.0);
    let negative_fraction = frac(&|v| v < 0.0);
    let zero_fraction = frac(&|v| v == 0.0);
    let avg = mean(&values);
    values.sort_by(f64::total_cmp);
    Ok(DistributionSummary {
        pairing,
        pairs: values.len(),
        mean: avg,
        median: quantile_sorted(&values, 0.5),
        quantiles: LEVELS.iter().map(|&l| (l, quantile_sorted(&values, l))).collect(),
        positive_fraction,
        negative_fraction,
        zero_fraction,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::{MeasureKind, ModelArtifacts, SimilarityMeasure};
    use crate::model::{train, MlpConfig};
    use crate::numerics::Matrix;

    #[test]
    fn duplicated_points_have_non_negative_same_class_gd() {
        let rows = vec![vec![1.0, 0.5], vec![1.0, 0.5], vec![-1.0, 2.0], vec![-1.0, 2.0]];
        let ds = LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), vec![0, 0, 1, 1], 2).unwrap();
        let mut cfg = MlpConfig::new(2, vec![4], 2);
        cfg.epochs = 5;
        let art: ModelArtifacts = train(&ds, &cfg).unwrap().into();
        let scorer = Scorer::new(SimilarityMeasure::new(MeasureKind::Gd), &art, &ds).unwrap();
        let s = score_distributions(&ds, &scorer, Pairing::SameClass, 100, 0).unwrap();
        assert_eq!(s.pairs, 2);
        assert_eq!(s.negative_fraction, 0.0);
        assert!(s.quantiles[0].1 >= 0.0);

        let c = score_distributions(&ds, &scorer, Pairing::CrossClass, 3, 0).unwrap();
        assert_eq!(c.pairs, 3);
        let again = score_distributions(&ds, &scorer, Pairing::CrossClass, 3, 0).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_unpairable_data() {
        let ds = LabeledDataset::new(Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(), vec![0, 1], 2).unwrap();
        let cfg = MlpConfig::new(1, vec![], 2);
        let art: ModelArtifacts = train(&ds, &cfg).unwrap().into();
        let scorer = Scorer::new(SimilarityMeasure::new(MeasureKind::Gd), &art, &ds).unwrap();
        assert!(score_distributions(&ds, &scorer, Pairing::SameClass, 10, 0).is_err());
        assert!(score_distributions(&ds, &scorer, Pairing::CrossClass, 10, 0).is_ok());
    }
}
