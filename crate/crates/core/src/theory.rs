//! Gradient geometry under a symmetric-confidence softmax output.
//!
//! With probability `α` on the predicted class and `β = (1−α)/(d_y−1)` on
//! every other class, logit gradients of confidently classified points give
//!
//! * same class: `∇ℓ·∇ℓ' = (1−α)² + (d_y−1)β²`
//! * different classes: `∇ℓ·∇ℓ' = −d_y(1−α)²/(d_y−1)²`
//!
//! so the cross-class product vanishes quadratically as `α → 1` and the
//! same-class product is exactly `d_y − 1` times larger in magnitude. Both
//! gradients use the `ŷ − e_k` sign; the products are sign-invariant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{CorruptionMask, LabeledDataset};
use crate::error::{ensure_len, Error, Result};
use crate::model::{last_layer_gradient, logit_gradient, ModelParams};
use crate::numerics::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricProfile {
    alpha: f64,
    classes: usize,
    predicted: usize,
}

impl SymmetricProfile {
    pub fn new(alpha: f64, classes: usize, predicted: usize) -> Result<Self> {
        check_profile(alpha, classes)?;
        if predicted >= classes {
            return Err(Error::LabelOutOfRange {
                label: predicted,
                classes,
            });
        }
        Ok(Self {
            alpha,
            classes,
            predicted,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn predicted(&self) -> usize {
        self.predicted
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.alpha) / (self.classes - 1) as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        let b = self.beta();
        (0..self.classes)
            .map(|k| if k == self.predicted { self.alpha } else { b })
            .collect()
    }
}

fn check_profile(alpha: f64, classes: usize) -> Result<()> {
    if classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least two classes, got {classes}"
        )));
    }
    let lo = 1.0 / classes as f64;
    if !(alpha > lo && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence must lie in ({lo}, 1) for {classes} classes, got {alpha}"
        )));
    }
    Ok(())
}

/// `ŷ − e_k` for a point labeled with its predicted class.
pub fn symmetric_logit_gradient(profile: &SymmetricProfile) -> Vec<f64> {
    let mut g = profile.probs();
    g[profile.predicted] -= 1.0;
    g
}

/// `−d_y(1−α)²/(d_y−1)²`
pub fn cross_class_product(alpha: f64, classes: usize) -> Result<f64> {
    check_profile(alpha, classes)?;
    let d = classes as f64;
    let e = 1.0 - alpha;
    Ok(-d * e * e / ((d - 1.0) * (d - 1.0)))
}

/// `(1−α)² + (d_y−1)β²`
pub fn same_class_product(alpha: f64, classes: usize) -> Result<f64> {
    check_profile(alpha, classes)?;
    let d = classes as f64;
    let e = 1.0 - alpha;
    let b = e / (d - 1.0);
    Ok(e * e + (d - 1.0) * b * b)
}

/// Direct dot product of the logit gradients of two points predicted (and
/// labeled) as classes 0 and 1.
pub fn numeric_cross_class_product(alpha: f64, classes: usize) -> Result<f64> {
    let a = symmetric_logit_gradient(&SymmetricProfile::new(alpha, classes, 0)?);
    let b = symmetric_logit_gradient(&SymmetricProfile::new(alpha, classes, 1)?);
    dot(&a, &b)
}

/// Direct dot product of two identical class-0 logit gradients.
pub fn numeric_same_class_product(alpha: f64, classes: usize) -> Result<f64> {
    let a = symmetric_logit_gradient(&SymmetricProfile::new(alpha, classes, 0)?);
    dot(&a, &a)
}

/// Both sides of the last-layer factorization for one pair of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    /// `∇_a ℓ · ∇_a' ℓ`
    pub logit_product: f64,
    /// `u · u'`
    pub activation_product: f64,
    pub factored: f64,
    /// Dot product of the two flattened `d_y × d_h` gradient matrices.
    pub materialized: f64,
    pub abs_error: f64,
}

impl FactorizationReport {
    pub fn agrees(&self, tol: f64) -> bool {
        self.abs_error <= tol
    }
}

pub fn verify_factorization(
    params: &ModelParams,
    a: (&[f64], usize),
    b: (&[f64], usize),
) -> Result<FactorizationReport> {
    ensure_len("first point", params.input_dim(), a.0.len())?;
    ensure_len("second point", params.input_dim(), b.0.len())?;
    let ga = last_layer_gradient(params, a.0, a.1)?;
    let gb = last_layer_gradient(params, b.0, b.1)?;
    let logit_product = dot(&ga.logit_grad, &gb.logit_grad)?;
    let activation_product = dot(&ga.activation, &gb.activation)?;
    let factored = logit_product * activation_product;
    let materialized = dot(ga.materialize().as_slice(), gb.materialize().as_slice())?;
    Ok(FactorizationReport {
        logit_product,
        activation_product,
        factored,
        materialized,
        abs_error: (factored - materialized).abs(),
    })
}

/// One row of a point's last-layer gradient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientPatternRow {
    pub point_id: usize,
    pub class: usize,
    pub corrupted: bool,
    pub row_index: usize,
    pub values: Vec<f64>,
}

/// Each point contributes `d_y` rows of `d_h` values. `class` is the
/// observed label.
pub fn export_gradient_pattern(
    params: &ModelParams,
    dataset: &LabeledDataset,
    mask: Option<&CorruptionMask>,
) -> Result<Vec<GradientPatternRow>> {
    let mask = mask.or(dataset.mask());
    if let Some(m) = mask {
        ensure_len("corruption mask", dataset.len(), m.len())?;
    }
    let mut rows = Vec::with_capacity(dataset.len() * params.output_dim());
    for i in 0..dataset.len() {
        let g: Matrix = last_layer_gradient(params, dataset.x(i), dataset.label(i))?.materialize();
        for r in 0..g.rows() {
            rows.push(GradientPatternRow {
                point_id: i,
                class: dataset.label(i),
                corrupted: mask.is_some_and(|m| m.is_corrupted(i)),
                row_index: r,
                values: g.row(r).to_vec(),
            });
        }
    }
    Ok(rows)
}

/// Writes `point_id,class,corrupted,row_index,g0..g{d_h−1}`.
pub fn write_gradient_pattern_csv<W: Write>(
    rows: &[GradientPatternRow],
    out: W,
    provenance: Option<&str>,
) -> Result<()> {
    let mut out = out;
    if let Some(p) = provenance {
        writeln!(out, "# {p}")?;
    }
    let width = rows.first().map_or(0, |r| r.values.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "point_id".to_string(),
        "class".into(),
        "corrupted".into(),
        "row_index".into(),
    ];
    header.extend((0..width).map(|j| format!("g{j}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.point_id.to_string(),
            r.class.to_string(),
            u8::from(r.corrupted).to_string(),
            r.row_index.to_string(),
        ];
        rec.extend(r.values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parameter grid for [`run_theory_checks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryGrid {
    pub alphas: Vec<f64>,
    pub classes: Vec<usize>,
    /// Decay is checked at `ε = 2^-k` for each listed `k`; dyadic `ε` keeps
    /// `1 − ε` and `1 − 2ε` exact.
    pub decay_exponents: Vec<u32>,
    /// Agreement tolerance between closed forms and direct products.
    pub tolerance: f64,
}

impl Default for TheoryGrid {
    fn default() -> Self {
        Self {
            alphas: vec![0.5, 0.9, 0.99, 0.999],
            classes: vec![2, 3, 5, 10],
            decay_exponents: (3..=30).collect(),
            tolerance: 1e-12,
        }
    }
}

pub type ClosedForm = Box<dyn Fn(f64, usize) -> Result<f64> + Send + Sync>;

/// The closed forms under test; swapping one out gives a negative control.
pub struct ClosedForms {
    pub cross: ClosedForm,
    pub same: ClosedForm,
}

impl Default for ClosedForms {
    fn default() -> Self {
        Self {
            cross: Box::new(cross_class_product),
            same: Box::new(same_class_product),
        }
    }
}

impl ClosedForms {
    /// The cross-class form scaled by `1 + rel`, for negative controls.
    pub fn with_perturbed_cross(rel: f64) -> Self {
        Self {
            cross: Box::new(move |a, d| Ok(cross_class_product(a, d)? * (1.0 + rel))),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheck {
    pub name: String,
    pub alpha: f64,
    pub classes: usize,
    pub expected: f64,
    pub actual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub classes: usize,
    pub alpha: f64,
    pub same: f64,
    pub cross: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub checks: Vec<TheoryCheck>,
    pub ratio_table: Vec<RatioRow>,
    /// Grid points outside the profile domain `α > 1/d_y`.
    pub skipped: Vec<(f64, usize)>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TheoryCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Plain-text table of the checks and the same/cross ratios.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let fails = self.failures().count();
        s.push_str(&format!(
            "closed-form checks: {} run, {} failed\n",
            self.checks.len(),
            fails
        ));
        for c in self.failures() {
            s.push_str(&format!(
                "FAIL {} alpha={} d_y={} expected={} actual={}\n",
                c.name, c.alpha, c.classes, c.expected, c.actual
            ));
        }
        s.push_str("d_y\talpha\tsame\tcross\tsame/|cross|\n");
        for r in &self.ratio_table {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.classes, r.alpha, r.same, r.cross, r.ratio
            ));
        }
        for (a, d) in &self.skipped {
            s.push_str(&format!("skipped alpha={a} d_y={d}: outside (1/d_y, 1)\n"));
        }
        s
    }
}

/// Relative distance in units of machine epsilon.
fn ulps_apart(a: f64, b: f64) -> f64 {
    (a - b).abs() / (f64::EPSILON * b.abs().max(f64::MIN_POSITIVE))
}

/// Checks `forms` against direct products over `grid`: agreement within
/// `grid.tolerance`, the `d_y − 1` magnitude ratio (to a few ulps of
/// rounding), `|cross| ≤ same`, and the exact quarter ratio of the
/// quadratic decay.
pub fn run_theory_checks(grid: &TheoryGrid, forms: &ClosedForms) -> Result<TheoryReport> {
    let mut checks = Vec::new();
    let mut ratio_table = Vec::new();
    let mut skipped = Vec::new();
    let mut push = |name: &str, alpha: f64, classes: usize, expected: f64, actual: f64, passed: bool| {
        checks.push(TheoryCheck {
            name: name.to_string(),
            alpha,
            classes,
            expected,
            actual,
            passed,
        })
    };

    for &d in &grid.classes {
        for &a in &grid.alphas {
            if check_profile(a, d).is_err() {
                skipped.push((a, d));
                continue;
            }
            let cross = (forms.cross)(a, d)?;
            let same = (forms.same)(a, d)?;
            let nc = numeric_cross_class_product(a, d)?;
            let ns = numeric_same_class_product(a, d)?;
            push(
                "cross_vs_numeric",
                a,
                d,
                nc,
                cross,
                (cross - nc).abs() <= grid.tolerance,
            );
            push("same_vs_numeric", a, d, ns, same, (same - ns).abs() <= grid.tolerance);
            let ratio = same / cross.abs();
            let want = (d - 1) as f64;
            push(
                "same_over_cross_ratio",
                a,
                d,
                want,
                ratio,
                ulps_apart(ratio, want) <= 4.0,
            );
            push("cross_not_larger", a, d, same, cross.abs(), cross.abs() <= same);
            ratio_table.push(RatioRow {
                classes: d,
                alpha: a,
                same,
                cross,
                ratio,
            });
        }
        for &k in &grid.decay_exponents {
            let eps = 2f64.powi(-(k as i32));
            let (near, far) = (1.0 - eps, 1.0 - 2.0 * eps);
            if check_profile(far, d).is_err() {
                continue;
            }
            let ratio = (forms.cross)(near, d)? / (forms.cross)(far, d)?;
            push("quadratic_decay", near, d, 0.25, ratio, ratio == 0.25);
        }
    }
    Ok(TheoryReport {
        checks,
        ratio_table,
        skipped,
    })
}

/// Logit-gradient products of real points, for comparison with the
/// symmetric closed forms.
pub fn logit_product(params: &ModelParams, a: (&[f64], usize), b: (&[f64], usize)) -> Result<f64> {
    let pa = params.forward(a.0)?.probs;
    let pb = params.forward(b.0)?.probs;
    dot(&logit_gradient(&pa, a.1)?, &logit_gradient(&pb, b.1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Layer, MlpConfig};
    use crate::numerics::RngStream;

    #[test]
    fn worked_values() {
        assert!((cross_class_product(0.9, 3).unwrap() + 0.0075).abs() < 1e-15);
        assert!((same_class_product(0.9, 3).unwrap() - 0.015).abs() < 1e-15);
        assert!(cross_class_product(0.3, 3).is_err());
        assert!(cross_class_product(1.0, 3).is_err());
        assert!(same_class_product(0.9, 1).is_err());
    }

    #[test]
    fn profile_invariants() {
        for d in [2, 3, 5, 10] {
            let p = SymmetricProfile::new(0.95, d, d - 1).unwrap();
            let s: f64 = p.probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            assert!(p.beta() < p.alpha());
            assert!((p.alpha() + (d - 1) as f64 * p.beta() - 1.0).abs() < 1e-15);
        }
        assert!(SymmetricProfile::new(0.9, 3, 3).is_err());
    }

    #[test]
    fn default_grid_passes_and_reports_ratio_table() {
        let r = run_theory_checks(&TheoryGrid::default(), &ClosedForms::default()).unwrap();
        assert!(r.passed(), "{}", r.render());
        assert_eq!(r.skipped, vec![(0.5, 2)]);
        assert_eq!(r.ratio_table.len(), 15);
        assert!(r.checks.iter().any(|c| c.name == "quadratic_decay"));
    }

    #[test]
    fn perturbed_closed_form_is_caught() {
        let forms = ClosedForms::with_perturbed_cross(1e-6);
        let r = run_theory_checks(&TheoryGrid::default(), &forms).unwrap();
        assert!(!r.passed());
        assert!(r.failures().any(|c| c.name == "same_over_cross_ratio"));
        assert!(r.render().contains("FAIL"));
    }

    #[test]
    fn factorization_matches_materialized() {
        let mut rng = RngStream::new(8);
        for seed in 0..50 {
            let mut cfg = MlpConfig::new(3, vec![6, 4], 3);
            cfg.seed = seed;
            let p = ModelParams::init(&cfg).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let r = verify_factorization(&p, (&x, rng.below(3)), (&y, rng.below(3))).unwrap();
            assert!(r.agrees(1e-10));
            let s = verify_factorization(&p, (&x, 1), (&x, 1)).unwrap();
            assert!(s.logit_product >= 0.0 && s.activation_product >= 0.0);
        }
        let p = ModelParams::init(&MlpConfig::new(3, vec![], 2)).unwrap();
        assert!(verify_factorization(&p, (&[1.0, 2.0], 0), (&[1.0, 2.0, 3.0], 0)).is_err());
    }

    #[test]
    fn gradient_pattern_for_toy_shape() {
        // 3 classes, 2 hidden units: a 3x2 gradient matrix per point
        let cfg = MlpConfig::toy_three_class();
        let p = ModelParams::init(&cfg).unwrap();
        let ds = LabeledDataset::new(
            Matrix::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.0]]).unwrap(),
            vec![0, 2],
            3,
        )
        .unwrap();
        let mask = CorruptionMask {
            corrupted: vec![false, true],
            original_labels: vec![0, 1],
        };
        let rows = export_gradient_pattern(&p, &ds, Some(&mask)).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.values.len() == 2));
        assert!(rows[3].corrupted && !rows[0].corrupted);
        let mut buf = Vec::new();
        write_gradient_pattern_csv(&rows, &mut buf, Some("x")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# x\npoint_id,class,corrupted,row_index,g0,g1\n0,0,0,0,"));
    }

    #[test]
    fn perfectly_fit_point_is_near_origin() {
        let layer = Layer {
            weights: Matrix::from_rows(&[vec![15.0, 0.0], vec![0.0, 0.0], vec![-15.0, 0.0]]).unwrap(),
            bias: None,
        };
        let p = ModelParams::from_layers(vec![layer], 0.01).unwrap();
        let ds = LabeledDataset::new(Matrix::from_rows(&[vec![1.0, 0.2]]).unwrap(), vec![0], 3).unwrap();
        let rows = export_gradient_pattern(&p, &ds, None).unwrap();
        for r in rows {
            assert!(r.values.iter().all(|v| v.abs() < 1e-6));
        }
    }
}
