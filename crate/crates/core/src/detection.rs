//! Ranking training points by harmfulness.
//!
//! * [`Algorithm::Plain`]: the score of `z_i` is its mean similarity to the
//!   whole reference set.
//! * [`Algorithm::ClassBased`]: the mean similarity is taken per reference
//!   class and the minimum over classes is the score.
//!
//! Both evaluate the similarity exactly `m = |Z'|` times per point. Output is
//! sorted ascending (most harmful first), ties broken by original index.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{ensure_len, Error, Result};
use crate::influence::{ModelArtifacts, PreparedReference, ScoreAccumulator, Scorer, SimilarityMeasure};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub features: Vec<f64>,
    pub label: usize,
    /// Position of this point in the scored dataset, if drawn from it.
    pub source_index: Option<usize>,
}

/// Clean reference points grouped by class.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    groups: Vec<Vec<ReferencePoint>>,
}

impl ReferenceSet {
    /// Groups points by label; `num_classes` fixes the number of groups.
    pub fn from_points(points: Vec<ReferencePoint>, num_classes: usize) -> Result<Self> {
        let mut groups = vec![Vec::new(); num_classes];
        for p in points {
            let g = groups.get_mut(p.label).ok_or(Error::LabelOutOfRange {
                label: p.label,
                classes: num_classes,
            })?;
            g.push(p);
        }
        Ok(Self { groups })
    }

    /// Reference points taken from `dataset` at the given indices.
    pub fn from_indices(dataset: &LabeledDataset, indices: &[usize]) -> Result<Self> {
        let points = indices
            .iter()
            .map(|&i| {
                if i >= dataset.len() {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        len: dataset.len(),
                    });
                }
                Ok(ReferencePoint {
                    features: dataset.x(i).to_vec(),
                    label: dataset.label(i),
                    source_index: Some(i),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(points, dataset.num_classes())
    }

    pub fn num_classes(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, class: usize) -> &[ReferencePoint] {
        &self.groups[class]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Total size `m`.
    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view in class order.
    pub fn iter(&self) -> impl Iterator<Item = &ReferencePoint> {
        self.groups.iter().flatten()
    }

    pub fn source_indices(&self) -> Vec<usize> {
        self.iter().filter_map(|p| p.source_index).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Plain,
    #[serde(rename = "class")]
    ClassBased,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Plain, Algorithm::ClassBased];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Plain => "plain",
            Algorithm::ClassBased => "class",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Algorithm::Plain),
            "class" | "class_based" => Ok(Algorithm::ClassBased),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectOptions {
    /// Also rank the points that make up the reference set.
    #[serde(default)]
    pub include_reference: bool,
    /// Keep per-class mean scores for plain runs too.
    #[serde(default)]
    pub class_scores: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub index: usize,
    pub label: usize,
    pub score: f64,
    pub class_scores: Option<Vec<f64>>,
    pub corrupted: Option<bool>,
}

/// Dataset indices sorted ascending by score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDataset {
    pub entries: Vec<RankedEntry>,
    pub num_classes: usize,
    pub algorithm: Algorithm,
    /// Pairwise similarity evaluations performed.
    pub sim_calls: u64,
    /// Reference pairs skipped for near-zero gradients (cosine measures).
    pub skipped_pairs: u64,
    pub unconverged_pairs: u64,
}

impl RankedDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Original indices in ranked order.
    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    /// Writes `index,original_label,score,s_1..s_C[,corrupted]`. Per-class
    /// cells are empty when not computed.
    pub fn write_csv<W: Write>(&self, out: W, provenance: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(p) = provenance {
            writeln!(out, "# {p}")?;
        }
        let with_truth = self.entries.iter().any(|e| e.corrupted.is_some());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string(), "original_label".into(), "score".into()];
        header.extend((1..=self.num_classes).map(|k| format!("s_{k}")));
        if with_truth {
            header.push("corrupted".into());
        }
        w.write_record(&header)?;
        for e in &self.entries {
            let mut rec = vec![e.index.to_string(), e.label.to_string(), e.score.to_string()];
            match &e.class_scores {
                Some(s) => rec.extend(s.iter().map(f64::to_string)),
                None => rec.extend(std::iter::repeat_n(String::new(), self.num_classes)),
            }
            if with_truth {
                rec.push(e.corrupted.map_or(String::new(), |c| u8::from(c).to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of pairwise similarity evaluations a detection run performed.
pub fn sim_call_count(run: &RankedDataset) -> u64 {
    run.sim_calls
}

/// Scores `dataset` with an existing scorer.
pub fn detect_with_scorer(
    algorithm: Algorithm,
    dataset: &LabeledDataset,
    reference: &ReferenceSet,
    scorer: &Scorer<'_>,
    options: DetectOptions,
) -> Result<RankedDataset> {
    if reference.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    let classes = reference.num_classes();
    if algorithm == Algorithm::ClassBased {
        if let Some(k) = reference.group_sizes().iter().position(|&s| s == 0) {
            return Err(Error::MissingClassGroup(k));
        }
    }
    if classes < dataset.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "reference set covers {classes} classes, dataset has {}",
            dataset.num_classes()
        )));
    }

    let points: Vec<(&[f64], usize)> = reference.iter().map(|p| (p.features.as_slice(), p.label)).collect();
    for (x, _) in &points {
        ensure_len("reference features", dataset.dim(), x.len())?;
    }
    let prepared = scorer.prepare_all(&points)?;
    let mut grouped: Vec<&[PreparedReference]> = Vec::with_capacity(classes);
    let mut start = 0;
    for size in reference.group_sizes() {
        grouped.push(&prepared[start..start + size]);
        start += size;
    }

    let excluded: HashSet<usize> = if options.include_reference {
        HashSet::new()
    } else {
        reference.source_indices().into_iter().collect()
    };
    let candidates: Vec<usize> = (0..dataset.len()).filter(|i| !excluded.contains(i)).collect();
    let kind = scorer.measure().kind;
    let keep_class_scores = algorithm == Algorithm::ClassBased || options.class_scores;

    struct Scored {
        entry: RankedEntry,
        calls: u64,
        skipped: u64,
        unconverged: u64,
    }

    let scored: Vec<Scored> = candidates
        .par_iter()
        .map(|&i| -> Result<Scored> {
            let g = scorer.gradient(dataset.x(i), dataset.label(i))?;
            let mut flat = ScoreAccumulator::default();
            let mut per_class = Vec::with_capacity(classes);
            let mut calls = 0u64;
            for group in &grouped {
                let mut acc = ScoreAccumulator::default();
                for r in group.iter() {
                    let s = scorer.similarity(&g, r);
                    calls += 1;
                    acc.add(kind, s, r);
                    flat.add(kind, s, r);
                }
                per_class.push(acc.finish());
            }
            let flat = flat.finish();
            let score = match algorithm {
                Algorithm::Plain => flat.value,
                Algorithm::ClassBased => per_class.iter().map(|a| a.value).fold(f64::INFINITY, f64::min),
            };
            Ok(Scored {
                entry: RankedEntry {
                    index: i,
                    label: dataset.label(i),
                    score,
                    class_scores: keep_class_scores.then(|| per_class.iter().map(|a| a.value).collect()),
                    corrupted: dataset.mask().map(|m| m.is_corrupted(i)),
                },
                calls,
                skipped: flat.skipped as u64,
                unconverged: flat.unconverged as u64,
            })
        })
        .collect::<Result<_>>()?;

    let sim_calls = scored.iter().map(|s| s.calls).sum();
    let skipped_pairs = scored.iter().map(|s| s.skipped).sum();
    let unconverged_pairs = scored.iter().map(|s| s.unconverged).sum();
    let mut entries: Vec<RankedEntry> = scored.into_iter().map(|s| s.entry).collect();
    entries.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
    Ok(RankedDataset {
        entries,
        num_classes: classes,
        algorithm,
        sim_calls,
        skipped_pairs,
        unconverged_pairs,
    })
}

/// Builds a scorer for a model trained on `dataset` and runs `algorithm`.
pub fn detect(
    algorithm: Algorithm,
    dataset: &LabeledDataset,
    reference: &ReferenceSet,
    measure: SimilarityMeasure,
    artifacts: &ModelArtifacts,
    options: DetectOptions,
) -> Result<RankedDataset> {
    let scorer = Scorer::new(measure, artifacts, dataset)?;
    detect_with_scorer(algorithm, dataset, reference, &scorer, options)
}

/// Baseline detection: mean similarity to the flat reference set.
pub fn detect_plain(
    dataset: &LabeledDataset,
    reference: &ReferenceSet,
    measure: SimilarityMeasure,
    artifacts: &ModelArtifacts,
    options: DetectOptions,
) -> Result<RankedDataset> {
    detect(Algorithm::Plain, dataset, reference, measure, artifacts, options)
}

/// Class-based detection: minimum over classes of the per-class mean.
pub fn detect_class_based(
    dataset: &LabeledDataset,
    reference: &ReferenceSet,
    measure: SimilarityMeasure,
    artifacts: &ModelArtifacts,
    options: DetectOptions,
) -> Result<RankedDataset> {
    detect(Algorithm::ClassBased, dataset, reference, measure, artifacts, options)
}
