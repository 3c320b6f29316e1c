//! Pairwise influence measures between training points: influence function
//! (IF), gradient dot product (GD), gradient cosine (GC), partially
//! normalized cosine (GC-partial) and TracIn, plus reference-set averaging.
//!
//! All measures drop the constant `1/n` factor; rankings are unaffected.
//! Gradients are taken with respect to the final weight matrix unless
//! [`GradientScope::Full`] is selected.

mod hessian;
mod scorer;

pub use hessian::LastLayerHessian;
pub(crate) use scorer::ScoreAccumulator;
pub use scorer::{
    average_influence, AverageScore, GradientVector, ModelArtifacts, PointGradient, PreparedReference, Scorer,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{last_layer_gradient, Checkpoint, FactoredGradient};
use crate::numerics::cg_solve;

/// Gradient norms at or below this are treated as zero by the cosine measures.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    If,
    Gd,
    Gc,
    GcPartial,
    #[serde(rename = "tracin")]
    TracIn,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 5] = [
        MeasureKind::If,
        MeasureKind::Gd,
        MeasureKind::Gc,
        MeasureKind::GcPartial,
        MeasureKind::TracIn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::If => "if",
            MeasureKind::Gd => "gd",
            MeasureKind::Gc => "gc",
            MeasureKind::GcPartial => "gc_partial",
            MeasureKind::TracIn => "tracin",
        }
    }

    /// Whether degenerate (near-zero) reference gradients are skipped.
    pub fn is_cosine_family(self) -> bool {
        matches!(self, MeasureKind::Gc | MeasureKind::GcPartial)
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown measure `{s}`")))
    }
}

/// Which parameters the gradients cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientScope {
    #[default]
    LastLayer,
    Full,
}

fn default_damping() -> f64 {
    0.01
}
fn default_cg_tol() -> f64 {
    1e-10
}
fn default_cg_max_iter() -> usize {
    1000
}

/// Parameters shared by the measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSettings {
    /// `λ` added to the Hessian diagonal (IF only).
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
    #[serde(default)]
    pub scope: GradientScope,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        Self {
            damping: default_damping(),
            cg_tol: default_cg_tol(),
            cg_max_iter: default_cg_max_iter(),
            scope: GradientScope::LastLayer,
        }
    }
}

impl MeasureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "damping must be > 0, got {}",
                self.damping
            )));
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(Error::InvalidConfig("cg_tol and cg_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// A measure together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityMeasure {
    pub kind: MeasureKind,
    pub settings: MeasureSettings,
}

impl SimilarityMeasure {
    pub fn new(kind: MeasureKind) -> Self {
        Self {
            kind,
            settings: MeasureSettings::default(),
        }
    }

    pub fn with_settings(kind: MeasureKind, settings: MeasureSettings) -> Self {
        Self { kind, settings }
    }
}

/// Condition attached to a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    Ok,
    /// A gradient norm was at or below [`NORM_EPS`]; the score is defined as 0.
    Degenerate,
    /// The Hessian solve hit its iteration cap; the score is best effort.
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub flag: ScoreFlag,
}

impl Score {
    pub(crate) fn ok(value: f64) -> Self {
        Self {
            value,
            flag: ScoreFlag::Ok,
        }
    }

    pub(crate) fn degenerate() -> Self {
        Self {
            value: 0.0,
            flag: ScoreFlag::Degenerate,
        }
    }
}

/// Gradient dot product `⟨g_i, g_j⟩`, evaluated in factored form.
pub fn gd(gi: &FactoredGradient, gj: &FactoredGradient) -> Result<f64> {
    gi.dot(gj)
}

/// Gradient cosine `⟨g_i, g_j⟩ / (‖g_i‖ ‖g_j‖)`.
pub fn gc(gi: &FactoredGradient, gj: &FactoredGradient) -> Result<Score> {
    let dot = gi.dot(gj)?;
    let (ni, nj) = (gi.norm(), gj.norm());
    if ni <= NORM_EPS || nj <= NORM_EPS {
        return Ok(Score::degenerate());
    }
    Ok(Score::ok((dot / (ni * nj)).clamp(-1.0, 1.0)))
}

/// Partially normalized cosine `⟨g_i, g_j⟩ / ‖g_j‖`: only the reference
/// gradient is normalized, so the magnitude of `g_i` is kept.
pub fn gc_partial(gi: &FactoredGradient, reference: &FactoredGradient) -> Result<Score> {
    let dot = gi.dot(reference)?;
    let nj = reference.norm();
    if nj <= NORM_EPS {
        return Ok(Score::degenerate());
    }
    Ok(Score::ok(dot / nj))
}

/// Influence-function score `g_iᵀ H⁻¹ g_j`, with `H⁻¹ g_j` obtained by
/// conjugate gradients.
pub fn if_score(
    gi: &FactoredGradient,
    gj: &FactoredGradient,
    hessian: &LastLayerHessian,
    cg_tol: f64,
    cg_max_iter: usize,
) -> Result<Score> {
    gi.check_compatible(gj)?;
    crate::error::ensure_len("if_score output dim", hessian.output_dim(), gi.output_dim())?;
    crate::error::ensure_len("if_score hidden dim", hessian.hidden_dim(), gi.hidden_dim())?;
    let rhs = gj.materialize().into_vec();
    let solved = cg_solve(hessian, &rhs, cg_tol, cg_max_iter)?;
    let value = gi.dot_dense_unchecked(&solved.x);
    Ok(Score {
        value,
        flag: if solved.converged {
            ScoreFlag::Ok
        } else {
            ScoreFlag::NotConverged
        },
    })
}

/// TracIn: `Σ_t η_t ⟨∇ℓ(z_i; θ_t), ∇ℓ(z_j; θ_t)⟩` over the checkpoints,
/// using last-layer gradients.
pub fn tracin(checkpoints: &[Checkpoint], (xi, yi): (&[f64], usize), (xj, yj): (&[f64], usize)) -> Result<f64> {
    if checkpoints.is_empty() {
        return Err(Error::Empty("TracIn checkpoint list"));
    }
    let mut total = 0.0;
    for c in checkpoints {
        let gi = last_layer_gradient(&c.params, xi, yi)?;
        let gj = last_layer_gradient(&c.params, xj, yj)?;
        total += c.learning_rate * gi.dot(&gj)?;
    }
    Ok(total)
}
