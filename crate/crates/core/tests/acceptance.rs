//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use ifclass::benchmark::{
    convex_config, inject_label_noise, run_sweep, score_distributions, BlobSpec, DataSource, LooOracle, NoiseSpec,
    Pairing, QRule, SweepSpec,
};
use ifclass::data::LabeledDataset;
use ifclass::detection::{detect, Algorithm, DetectOptions, ReferencePoint, ReferenceSet};
use ifclass::influence::{
    average_influence, gc, gd, if_score, tracin, LastLayerHessian, MeasureKind, MeasureSettings, ModelArtifacts,
    Scorer, SimilarityMeasure,
};
use ifclass::model::{last_layer_gradient, train, Checkpoint, FactoredGradient, MlpConfig};
use ifclass::numerics::stats::{median, spearman};
use ifclass::numerics::{softmax, LinearOperator, RngStream};
use ifclass::theory::{run_theory_checks, ClosedForms, TheoryGrid};

use common::*;

type Check = Result<(bool, String), String>;

fn lift<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Benchmark blobs: three well-separated clusters in the plane.
fn bench_blobs() -> BlobSpec {
    BlobSpec::new(600, 3, 2, 5.0)
}

/// Benchmark classifier: one hidden layer of 32 units, full-batch SGD.
fn bench_model() -> MlpConfig {
    let mut c = MlpConfig::new(2, vec![32], 3);
    c.learning_rate = 0.1;
    c.epochs = 500;
    c
}

fn closed_forms() -> Check {
    let report = lift(run_theory_checks(&TheoryGrid::default(), &ClosedForms::default()))?;
    let failed = report.failures().count();
    let max_ratio_err = report
        .ratio_table
        .iter()
        .map(|r| (r.ratio - (r.classes - 1) as f64).abs())
        .fold(0.0, f64::max);
    Ok((
        report.passed(),
        format!(
            "{} checks, {failed} failed; max |ratio - (d_y-1)| = {max_ratio_err:e}",
            report.checks.len()
        ),
    ))
}

fn gradient_correctness() -> Check {
    let mut rng = RngStream::new(2024);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    let mut seed = 0;
    while pairs < 120 {
        seed += 1;
        let (cfg, params) = random_model(&mut rng, seed);
        let x = random_vec(&mut rng, cfg.input_dim, 1.5);
        if !away_from_kinks(&params, &x, 1e-3) {
            continue;
        }
        let label = rng.below(cfg.output_dim);
        let analytic = lift(params.backprop(&x, label))?.0.flatten();
        let numeric = finite_difference(&params, &x, label, 1e-5);
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = naive_dot(&analytic, &analytic)
            .sqrt()
            .max(naive_dot(&numeric, &numeric).sqrt())
            .max(1e-8);
        worst = worst.max(diff / scale);
        pairs += 1;
    }
    let mut worst_gd = 0.0f64;
    for _ in 0..1500 {
        let dy = 2 + rng.below(8);
        let dh = 1 + rng.below(40);
        let a = FactoredGradient::new(random_vec(&mut rng, dy, 1.0), random_vec(&mut rng, dh, 1.0));
        let b = FactoredGradient::new(random_vec(&mut rng, dy, 1.0), random_vec(&mut rng, dh, 1.0));
        let fast = lift(gd(&a, &b))?;
        let slow = naive_dot(
            &outer_flat(&a.logit_grad, &a.activation),
            &outer_flat(&b.logit_grad, &b.activation),
        );
        worst_gd = worst_gd.max((fast - slow).abs() / slow.abs().max(1.0));
    }
    Ok((
        worst <= 1e-4 && worst_gd <= 1e-10,
        format!("backprop vs FD worst rel err {worst:.2e} over {pairs} pairs; factored GD worst err {worst_gd:.2e} over 1500 pairs"),
    ))
}

fn random_hessian(
    rng: &mut RngStream,
    dy: usize,
    dh: usize,
    n: usize,
    damping: f64,
) -> Result<LastLayerHessian, String> {
    let mut h = lift(LastLayerHessian::new(dy, dh, damping))?;
    for _ in 0..n {
        let logits = random_vec(rng, dy, 2.0);
        lift(h.push(lift(softmax(&logits))?, random_vec(rng, dh, 1.0)))?;
    }
    Ok(h)
}

fn hessian_suite() -> Check {
    let mut rng = RngStream::new(77);
    let mut apply_err = 0.0f64;
    let mut if_err = 0.0f64;
    for (dy, dh) in [(2, 3), (3, 8), (5, 10), (7, 7), (10, 5), (2, 25)] {
        let h = random_hessian(&mut rng, dy, dh, 20, 0.01)?;
        let dense = dense_hessian(&h);
        for _ in 0..5 {
            let v = random_vec(&mut rng, dy * dh, 1.0);
            let mut out = vec![0.0; dy * dh];
            h.apply(&v, &mut out);
            let want = dense_matvec(&dense, &v);
            for (a, b) in out.iter().zip(&want) {
                apply_err = apply_err.max((a - b).abs());
            }
        }
        for _ in 0..10 {
            let gi = FactoredGradient::new(random_vec(&mut rng, dy, 1.0), random_vec(&mut rng, dh, 1.0));
            let gj = FactoredGradient::new(random_vec(&mut rng, dy, 1.0), random_vec(&mut rng, dh, 1.0));
            let s = lift(if_score(&gi, &gj, &h, 1e-12, 10_000))?;
            let x = dense_solve(&dense, &outer_flat(&gj.logit_grad, &gj.activation));
            let want = naive_dot(&outer_flat(&gi.logit_grad, &gi.activation), &x);
            if_err = if_err.max((s.value - want).abs() / want.abs().max(1.0));
        }
    }
    let mut damp_err = 0.0f64;
    for lambda in [0.01, 0.5, 3.0] {
        let h = lift(LastLayerHessian::new(4, 6, lambda))?;
        for _ in 0..20 {
            let gi = FactoredGradient::new(random_vec(&mut rng, 4, 1.0), random_vec(&mut rng, 6, 1.0));
            let gj = FactoredGradient::new(random_vec(&mut rng, 4, 1.0), random_vec(&mut rng, 6, 1.0));
            let s = lift(if_score(&gi, &gj, &h, 1e-12, 100))?.value;
            let want = lift(gd(&gi, &gj))? / lambda;
            damp_err = damp_err.max((s - want).abs() / want.abs().max(1.0));
        }
    }
    Ok((
        apply_err <= 1e-10 && if_err <= 1e-8 && damp_err <= 1e-10,
        format!("apply err {apply_err:.2e}, IF vs dense solve {if_err:.2e}, damping-only vs gd/λ {damp_err:.2e}"),
    ))
}

fn loo_oracle() -> Check {
    let lambda = MeasureSettings::default().damping;
    let mut rhos = Vec::new();
    for seed in 0..5u64 {
        let spec = BlobSpec::new(32, 3, 2, 2.0);
        let ds = lift(spec.generate(seed))?;
        let (noisy, _) = lift(inject_label_noise(&ds, &NoiseSpec::new(0.2, seed + 7)))?;
        // clean reference points drawn independently from the same clusters
        let src = lift(BlobSpec::new(30, 3, 2, 2.0).generate(seed + 1000))?;
        let reference = lift(ReferenceSet::from_indices(&src, &(0..30).collect::<Vec<_>>()))?;
        let cfg = lift(convex_config(&noisy, lambda))?;
        let oracle = lift(LooOracle::new(&noisy, &reference, cfg))?;
        let truth = lift(oracle.scores())?;
        let art = ModelArtifacts::new(oracle.base_params().clone(), vec![]);
        let scorer = lift(Scorer::new(SimilarityMeasure::new(MeasureKind::If), &art, &noisy))?;
        let points: Vec<(&[f64], usize)> = reference.iter().map(|r| (r.features.as_slice(), r.label)).collect();
        let prepared = lift(scorer.prepare_all(&points))?;
        let mut estimate = Vec::new();
        for i in 0..noisy.len() {
            let g = lift(scorer.gradient(noisy.x(i), noisy.label(i)))?;
            estimate.push(lift(average_influence(&scorer, &g, &prepared))?.value);
        }
        rhos.push(spearman(&estimate, &truth));
    }
    let med = median(&rhos);
    Ok((med >= 0.7, format!("median Spearman {med:.4} over seeds {rhos:.3?}")))
}

fn gradient_geometry() -> Check {
    let mut lines = Vec::new();
    let mut all = true;
    for seed in 0..5u64 {
        let ds = lift(bench_blobs().generate(seed))?;
        let (noisy, _) = lift(inject_label_noise(&ds, &NoiseSpec::new(0.2, seed + 100)))?;
        let mut cfg = bench_model();
        cfg.seed = seed;
        let art: ModelArtifacts = lift(train(&noisy, &cfg))?.into();
        let scorer = lift(Scorer::new(SimilarityMeasure::new(MeasureKind::Gd), &art, &noisy))?;
        let same = lift(score_distributions(&noisy, &scorer, Pairing::SameClass, 20_000, seed))?;
        let cross = lift(score_distributions(&noisy, &scorer, Pairing::CrossClass, 20_000, seed))?;
        let ratio = cross.median.abs() / same.median;
        let ok = same.positive_fraction >= 0.95 && ratio <= 0.1;
        all &= ok;
        lines.push(format!("s{seed}: pos {:.3} ratio {ratio:.4}", same.positive_fraction));
    }
    Ok((all, lines.join("; ")))
}

fn detection_reproduction() -> Check {
    let spec = SweepSpec {
        data: DataSource::Blobs(bench_blobs()),
        model: bench_model(),
        p_grid: vec![0.2],
        q_rule: QRule::EqualP,
        measures: MeasureKind::ALL.to_vec(),
        measure_settings: MeasureSettings::default(),
        algorithms: Algorithm::ALL.to_vec(),
        seeds: vec![0, 1, 2, 3, 4],
        m_k: 50,
        include_reference: false,
    };
    let out = lift(run_sweep(&spec))?;
    if !out.failures.is_empty() {
        return Err(format!("failed cells: {:?}", out.failures));
    }
    let get = |m, a| out.report(0.2, m, a).ok_or_else(|| format!("missing report {m}/{a}"));
    let gd_plain = get(MeasureKind::Gd, Algorithm::Plain)?;
    let gd_class = get(MeasureKind::Gd, Algorithm::ClassBased)?;
    let (pm, cm) = (gd_plain.precision_mean[0], gd_class.precision_mean[0]);
    let mut lower_std = 0;
    for m in MeasureKind::ALL {
        if get(m, Algorithm::ClassBased)?.precision_std[0] <= get(m, Algorithm::Plain)?.precision_std[0] {
            lower_std += 1;
        }
    }
    Ok((
        cm >= pm && pm >= 0.6 && cm >= 0.6 && lower_std >= 3,
        format!(
            "GD {pm:.4}±{:.4}, GD-class {cm:.4}±{:.4}; class std <= plain std for {lower_std}/5 measures",
            gd_plain.precision_std[0], gd_class.precision_std[0]
        ),
    ))
}

fn complexity_parity() -> Check {
    let mut rng = RngStream::new(31);
    let mut details = Vec::new();
    let mut all = true;
    for trial in 0..10u64 {
        let classes = 2 + rng.below(3);
        let n = 20 + rng.below(40);
        let ds = lift(BlobSpec::new(n, classes, 2, 3.0).generate(trial))?;
        let mut cfg = MlpConfig::new(2, vec![4], classes);
        cfg.epochs = 10;
        cfg.seed = trial;
        let art: ModelArtifacts = lift(train(&ds, &cfg))?.into();
        let sizes: Vec<usize> = (0..classes).map(|_| 1 + rng.below(3)).collect();
        let mut idx = Vec::new();
        for (k, &m) in sizes.iter().enumerate() {
            idx.extend((0..n).filter(|i| i % classes == k).take(m));
        }
        let reference = lift(ReferenceSet::from_indices(&ds, &idx))?;
        let kind = MeasureKind::ALL[rng.below(5)];
        let opts = DetectOptions {
            include_reference: rng.below(2) == 0,
            class_scores: false,
        };
        let m = SimilarityMeasure::new(kind);
        let plain = lift(detect(Algorithm::Plain, &ds, &reference, m, &art, opts))?;
        let class = lift(detect(Algorithm::ClassBased, &ds, &reference, m, &art, opts))?;
        let expected = (plain.len() * reference.len()) as u64;
        let ok = plain.sim_calls == expected && class.sim_calls == expected;
        all &= ok;
        details.push(format!("{}", plain.sim_calls));
    }
    Ok((all, format!("counts {} all equal n·m", details.join(","))))
}

fn degenerate_identities() -> Check {
    let ds = lift(BlobSpec::new(45, 3, 2, 4.0).generate(5))?;
    let mut cfg = MlpConfig::new(2, vec![6], 3);
    cfg.epochs = 50;
    let trained = lift(train(&ds, &cfg))?;
    let reference = lift(ReferenceSet::from_indices(&ds, &[0, 1, 2, 3, 4, 5]))?;

    // TracIn over one final checkpoint with unit step is GD
    let single = vec![Checkpoint {
        params: trained.params.clone(),
        epoch: cfg.epochs,
        learning_rate: 1.0,
    }];
    let art = ModelArtifacts::new(trained.params.clone(), single.clone());
    let opts = DetectOptions::default();
    let t = lift(detect(
        Algorithm::Plain,
        &ds,
        &reference,
        SimilarityMeasure::new(MeasureKind::TracIn),
        &art,
        opts,
    ))?;
    let g = lift(detect(
        Algorithm::Plain,
        &ds,
        &reference,
        SimilarityMeasure::new(MeasureKind::Gd),
        &art,
        opts,
    ))?;
    let mut tracin_ok = t == g;
    for i in 0..10 {
        let a = (ds.x(i), ds.label(i));
        let b = (ds.x(i + 10), ds.label(i + 10));
        let ga = lift(last_layer_gradient(&trained.params, a.0, a.1))?;
        let gb = lift(last_layer_gradient(&trained.params, b.0, b.1))?;
        tracin_ok &= lift(tracin(&single, a, b))? == lift(gd(&ga, &gb))?;
    }

    // one class: the class-based minimum is over a single mean
    let one = lift(LabeledDataset::new(ds.features().clone(), vec![0; ds.len()], 1))?;
    let art1: ModelArtifacts = lift(train(&one, &cfg))?.into();
    let points = (0..5)
        .map(|i| ReferencePoint {
            features: one.x(i).to_vec(),
            label: 0,
            source_index: Some(i),
        })
        .collect();
    let ref1 = lift(ReferenceSet::from_points(points, 1))?;
    let mut c1_ok = true;
    for kind in MeasureKind::ALL {
        let m = SimilarityMeasure::new(kind);
        let opts = DetectOptions {
            include_reference: false,
            class_scores: true,
        };
        let p = lift(detect(Algorithm::Plain, &one, &ref1, m, &art1, opts))?;
        let mut c = lift(detect(Algorithm::ClassBased, &one, &ref1, m, &art1, opts))?;
        c.algorithm = p.algorithm;
        c1_ok &= p == c;
    }

    let mut rng = RngStream::new(4);
    let mut gc_err = 0.0f64;
    for _ in 0..200 {
        let v = FactoredGradient::new(random_vec(&mut rng, 3, 1.0), random_vec(&mut rng, 5, 1.0));
        let c = (2.0 * rng.normal()).exp();
        gc_err = gc_err.max((lift(gc(&v, &v.scaled(c)))?.value - 1.0).abs());
    }
    Ok((
        tracin_ok && c1_ok && gc_err <= 1e-12,
        format!("TracIn==GD: {tracin_ok}; C=1 class==plain: {c1_ok}; max |gc(g, c·g) - 1| = {gc_err:.1e}"),
    ))
}

fn determinism() -> Check {
    let dir = lift(tempfile::tempdir())?;
    let config = r#"
        p_grid = [0.1, 0.2]
        seeds = [0, 1, 2]
        measures = ["gd", "if", "tracin"]
        q_rule = "equal_p"

        [data]
        kind = "blobs"
        n = 300
        classes = 3
        separation = 5.0

        [model]
        input_dim = 2
        hidden = [16]
        output_dim = 3
        learning_rate = 0.1
        epochs = 200

        [reference]
        m_k = 20
    "#;
    let path = dir.path().join("run.toml");
    lift(std::fs::write(&path, config))?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let code = ifclass::cli::main_with_args([
            "ifclass",
            "sweep",
            "--config",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        if code != 0 {
            return Err(format!("sweep run {run} exited with {code}"));
        }
        outputs.push((
            lift(std::fs::read(out.join("sweep.csv")))?,
            lift(std::fs::read(out.join("sweep.json")))?,
        ));
    }
    let same = outputs[0] == outputs[1];
    Ok((
        same,
        format!(
            "sweep.csv {} bytes, sweep.json {} bytes, identical: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    ))
}

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "closed-form suite",
            limit: Some(Duration::from_secs(1)),
            run: closed_forms,
        },
        Criterion {
            id: 2,
            name: "gradient correctness",
            limit: Some(Duration::from_secs(30)),
            run: gradient_correctness,
        },
        Criterion {
            id: 3,
            name: "Hessian/IF suite",
            limit: None,
            run: hessian_suite,
        },
        Criterion {
            id: 4,
            name: "LOO oracle",
            limit: Some(Duration::from_secs(300)),
            run: loo_oracle,
        },
        Criterion {
            id: 5,
            name: "gradient geometry",
            limit: Some(Duration::from_secs(120)),
            run: gradient_geometry,
        },
        Criterion {
            id: 6,
            name: "detection reproduction",
            limit: Some(Duration::from_secs(300)),
            run: detection_reproduction,
        },
        Criterion {
            id: 7,
            name: "complexity parity",
            limit: None,
            run: complexity_parity,
        },
        Criterion {
            id: 8,
            name: "degenerate-measure identities",
            limit: None,
            run: degenerate_identities,
        },
        Criterion {
            id: 9,
            name: "determinism",
            limit: None,
            run: determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, d)) => (ok, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = c.limit.is_none_or(|l| took <= l);
        let pass = ok && in_time;
        failed += usize::from(!pass);
        let limit = c.limit.map_or(String::new(), |l| format!(" (limit {:.0?})", l));
        println!(
            "criterion {} [{}]: {} - {detail}; {:.2?}{limit}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            took
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
