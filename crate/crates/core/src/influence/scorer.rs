use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{last_layer_gradient, Checkpoint, FactoredGradient, ModelParams};
use crate::numerics::{cg_solve, dot_unchecked, norm};

use super::{GradientScope, LastLayerHessian, MeasureKind, Score, ScoreFlag, SimilarityMeasure, NORM_EPS};

/// A trained model and the checkpoints captured while training it.
#[derive(Debug, Clone)]
pub struct ModelArtifacts {
    pub params: ModelParams,
    pub checkpoints: Vec<Checkpoint>,
}

impl ModelArtifacts {
    pub fn new(params: ModelParams, checkpoints: Vec<Checkpoint>) -> Self {
        Self { params, checkpoints }
    }
}

impl From<crate::model::TrainedModel> for ModelArtifacts {
    fn from(m: crate::model::TrainedModel) -> Self {
        Self::new(m.params, m.checkpoints)
    }
}

/// A gradient either in last-layer factored form or as a flat full-parameter
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientVector {
    Factored(FactoredGradient),
    Dense(Vec<f64>),
}

impl GradientVector {
    fn dot(&self, other: &GradientVector) -> f64 {
        match (self, other) {
            (GradientVector::Factored(a), GradientVector::Factored(b)) => a.dot_unchecked(b),
            (GradientVector::Dense(a), GradientVector::Dense(b)) => dot_unchecked(a, b),
            _ => unreachable!("a scorer never mixes gradient scopes"),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            GradientVector::Factored(g) => g.norm(),
            GradientVector::Dense(v) => norm(v),
        }
    }
}

/// Gradient representation of one point under a given measure: a single
/// gradient at the final parameters, or one per checkpoint with weight `η_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGradient {
    pub parts: Vec<(f64, GradientVector)>,
}

impl PointGradient {
    fn inner(&self, other: &PointGradient) -> f64 {
        self.parts
            .iter()
            .zip(&other.parts)
            .map(|((w, a), (_, b))| w * a.dot(b))
            .sum()
    }

    /// Norm of the (first) gradient; used by the cosine measures.
    pub fn norm(&self) -> f64 {
        self.parts.first().map_or(0.0, |(_, g)| g.norm())
    }
}

/// A reference point with everything the measure can precompute: its
/// gradient, norm, and for IF the solve `H⁻¹ g`.
#[derive(Debug, Clone)]
pub struct PreparedReference {
    pub gradient: PointGradient,
    pub norm: f64,
    solved: Option<Vec<f64>>,
    converged: bool,
}

impl PreparedReference {
    pub fn is_degenerate(&self) -> bool {
        self.norm <= NORM_EPS
    }
}

/// Evaluates one similarity measure against prepared reference points.
///
/// Preparation (including the Hessian solves for IF) happens up front; the
/// scorer is read-only afterwards apart from an atomic call counter, so it
/// can be shared across threads.
#[derive(Debug)]
pub struct Scorer<'a> {
    measure: SimilarityMeasure,
    artifacts: &'a ModelArtifacts,
    hessian: Option<LastLayerHessian>,
    calls: AtomicU64,
}

impl<'a> Scorer<'a> {
    /// `training` is the dataset the model was fit on; it defines the
    /// Hessian used by IF.
    pub fn new(measure: SimilarityMeasure, artifacts: &'a ModelArtifacts, training: &LabeledDataset) -> Result<Self> {
        let scope = measure.settings.scope;
        let hessian = match measure.kind {
            MeasureKind::If => {
                measure.settings.validate()?;
                if scope == GradientScope::Full {
                    return Err(Error::Unsupported(
                        "the influence-function measure requires last-layer gradients".into(),
                    ));
                }
                Some(LastLayerHessian::from_dataset(
                    &artifacts.params,
                    training,
                    measure.settings.damping,
                )?)
            }
            MeasureKind::TracIn if artifacts.checkpoints.is_empty() => {
                return Err(Error::Empty("TracIn checkpoint list"));
            }
            _ => None,
        };
        Ok(Self {
            measure,
            artifacts,
            hessian,
            calls: AtomicU64::new(0),
        })
    }

    pub fn measure(&self) -> SimilarityMeasure {
        self.measure
    }

    pub fn hessian(&self) -> Option<&LastLayerHessian> {
        self.hessian.as_ref()
    }

    fn gradient_at(&self, params: &ModelParams, x: &[f64], label: usize) -> Result<GradientVector> {
        Ok(match self.measure.settings.scope {
            GradientScope::LastLayer => GradientVector::Factored(last_layer_gradient(params, x, label)?),
            GradientScope::Full => GradientVector::Dense(params.backprop(x, label)?.0.flatten()),
        })
    }

    pub fn gradient(&self, x: &[f64], label: usize) -> Result<PointGradient> {
        let parts = match self.measure.kind {
            MeasureKind::TracIn => self
                .artifacts
                .checkpoints
                .iter()
                .map(|c| Ok((c.learning_rate, self.gradient_at(&c.params, x, label)?)))
                .collect::<Result<Vec<_>>>()?,
            _ => vec![(1.0, self.gradient_at(&self.artifacts.params, x, label)?)],
        };
        Ok(PointGradient { parts })
    }

    pub fn prepare(&self, x: &[f64], label: usize) -> Result<PreparedReference> {
        let gradient = self.gradient(x, label)?;
        let norm = gradient.norm();
        let (solved, converged) = match (&self.hessian, gradient.parts.first()) {
            (Some(h), Some((_, GradientVector::Factored(g)))) => {
                let rhs = g.materialize().into_vec();
                let out = cg_solve(h, &rhs, self.measure.settings.cg_tol, self.measure.settings.cg_max_iter)?;
                (Some(out.x), out.converged)
            }
            _ => (None, true),
        };
        Ok(PreparedReference {
            gradient,
            norm,
            solved,
            converged,
        })
    }

    /// Prepares many points in parallel, preserving order.
    pub fn prepare_all(&self, points: &[(&[f64], usize)]) -> Result<Vec<PreparedReference>> {
        points.par_iter().map(|&(x, y)| self.prepare(x, y)).collect()
    }

    /// One pairwise evaluation `sim(candidate, reference)`.
    pub fn similarity(&self, candidate: &PointGradient, reference: &PreparedReference) -> Score {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match self.measure.kind {
            MeasureKind::Gd | MeasureKind::TracIn => Score::ok(candidate.inner(&reference.gradient)),
            MeasureKind::Gc => {
                let ni = candidate.norm();
                if ni <= NORM_EPS || reference.is_degenerate() {
                    return Score::degenerate();
                }
                Score::ok((candidate.inner(&reference.gradient) / (ni * reference.norm)).clamp(-1.0, 1.0))
            }
            MeasureKind::GcPartial => {
                if reference.is_degenerate() {
                    return Score::degenerate();
                }
                Score::ok(candidate.inner(&reference.gradient) / reference.norm)
            }
            MeasureKind::If => {
                let solved = reference.solved.as_ref().expect("IF references carry a solve");
                let value = match &candidate.parts[0].1 {
                    GradientVector::Factored(g) => g.dot_dense_unchecked(solved),
                    GradientVector::Dense(v) => dot_unchecked(v, solved),
                };
                Score {
                    value,
                    flag: if reference.converged {
                        ScoreFlag::Ok
                    } else {
                        ScoreFlag::NotConverged
                    },
                }
            }
        }
    }

    /// Number of pairwise evaluations performed so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

/// Mean of pairwise scores against a set of references.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AverageScore {
    pub value: f64,
    /// References that entered the mean.
    pub used: usize,
    /// Near-zero-norm references skipped (cosine measures only).
    pub skipped: usize,
    /// Pairs scored as 0 because the candidate gradient vanished.
    pub degenerate: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ScoreAccumulator {
    sum: f64,
    stats: AverageScore,
}

impl ScoreAccumulator {
    pub(crate) fn add(&mut self, kind: MeasureKind, score: Score, reference: &PreparedReference) {
        if kind.is_cosine_family() && reference.is_degenerate() {
            self.stats.skipped += 1;
            return;
        }
        match score.flag {
            ScoreFlag::Degenerate => self.stats.degenerate += 1,
            ScoreFlag::NotConverged => self.stats.unconverged += 1,
            ScoreFlag::Ok => {}
        }
        self.sum += score.value;
        self.stats.used += 1;
    }

    pub(crate) fn finish(self) -> AverageScore {
        let mut out = self.stats;
        out.value = if out.used == 0 { 0.0 } else { self.sum / out.used as f64 };
        out
    }
}

/// Influence of one candidate on a reference set: the arithmetic mean of its
/// pairwise scores.
pub fn average_influence(
    scorer: &Scorer<'_>,
    candidate: &PointGradient,
    references: &[PreparedReference],
) -> Result<AverageScore> {
    if references.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    let mut acc = ScoreAccumulator::default();
    for r in references {
        let s = scorer.similarity(candidate, r);
        acc.add(scorer.measure().kind, s, r);
    }
    Ok(acc.finish())
}
