use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::benchmark::{inject_label_noise, run_sweep, sample_reference, SweepOutcome};
use crate::data::{CorruptionMask, LabeledDataset};
use crate::detection::{detect_with_scorer, DetectOptions};
use crate::error::{Error, Result};
use crate::influence::{ModelArtifacts, Scorer, SimilarityMeasure};
use crate::model::{load_model_dir, save_model_dir, train};
use crate::theory::{export_gradient_pattern, run_theory_checks, write_gradient_pattern_csv, ClosedForms, TheoryGrid};

use super::{Cli, Command, RunConfig};

struct Context {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let path = cli
            .config
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("this command needs --config".into()))?;
        let cfg = RunConfig::load(path, &cli.overrides)?;
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("ifclass-out"));
        fs::create_dir_all(&out)?;
        Ok(Self {
            hash: cfg.hash(),
            cfg,
            out,
        })
    }

    fn provenance(&self) -> String {
        format!("config_sha256={}", self.hash)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// The configured dataset with noise applied, or a CSV given on the
    /// command line (with its own mask, if any).
    fn dataset(&self, data: Option<&Path>) -> Result<(LabeledDataset, CorruptionMask)> {
        let base = match data {
            Some(p) => LabeledDataset::load_csv(p, None)?,
            None => self.cfg.data.load(self.cfg.data_seed)?,
        };
        match base.mask() {
            Some(m) => {
                let m = m.clone();
                Ok((base, m))
            }
            None if data.is_some() => {
                let m = CorruptionMask::clean(base.labels());
                Ok((base.with_mask(m.clone())?, m))
            }
            None => inject_label_noise(&base, &self.cfg.noise),
        }
    }

    fn model(&self, dataset: &LabeledDataset, model: Option<&Path>) -> Result<ModelArtifacts> {
        match model {
            Some(p) => load_model(p),
            None => Ok(train(dataset, &self.cfg.model)?.into()),
        }
    }

    fn write_json(&self, name: &str, payload: serde_json::Value) -> Result<()> {
        let doc = json!({
            "config_hash": self.hash,
            "config": self.cfg,
            "result": payload,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    fn write_with<F>(&self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>, &str) -> Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf, &self.provenance())?;
        fs::write(self.path(name), buf)?;
        Ok(())
    }
}

pub(crate) fn load_model(path: &Path) -> Result<ModelArtifacts> {
    let saved = load_model_dir(path)?;
    Ok(ModelArtifacts::new(saved.params, saved.checkpoints))
}

pub(crate) fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Generate => generate(&Context::new(cli)?),
        Command::Train { data } => train_cmd(&Context::new(cli)?, data.as_deref()),
        Command::Detect { data, model } => detect(&Context::new(cli)?, data.as_deref(), model.as_deref()),
        Command::Evaluate => {
            let ctx = Context::new(cli)?;
            sweep_cmd(&ctx, vec![ctx.cfg.noise.p], "evaluate")
        }
        Command::Sweep => {
            let ctx = Context::new(cli)?;
            if ctx.cfg.p_grid.is_empty() {
                return Err(Error::InvalidConfig("sweep needs a non-empty p_grid".into()));
            }
            sweep_cmd(&ctx, ctx.cfg.p_grid.clone(), "sweep")
        }
        Command::TheoryCheck { perturb } => theory_check(cli, *perturb),
        Command::ExportGradients { data, model } => {
            export_gradients(&Context::new(cli)?, data.as_deref(), model.as_deref())
        }
    }
}

fn generate(ctx: &Context) -> Result<u8> {
    let (ds, mask) = ctx.dataset(None)?;
    ctx.write_with("dataset.csv", |w, p| ds.write_csv(w, Some(p)))?;
    ctx.write_with("mask.csv", |w, p| {
        use std::io::Write;
        writeln!(w, "# {p}")?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["index", "corrupted", "original_label"])?;
        for i in 0..mask.len() {
            c.write_record([
                i.to_string(),
                u8::from(mask.is_corrupted(i)).to_string(),
                mask.original_labels[i].to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    println!(
        "wrote {} points ({} corrupted, class counts {:?}) to {}",
        ds.len(),
        mask.num_corrupted(),
        ds.class_counts(),
        ctx.out.display()
    );
    Ok(0)
}

fn train_cmd(ctx: &Context, data: Option<&Path>) -> Result<u8> {
    let (ds, _) = ctx.dataset(data)?;
    let cfg = &ctx.cfg.model;
    let trained = train(&ds, cfg)?;
    let model_dir = ctx.path("model");
    let written = save_model_dir(
        &model_dir,
        &trained.params,
        &trained.checkpoints,
        cfg,
        Some(ctx.hash.clone()),
    )?;
    ctx.write_with("train_loss.csv", |w, p| {
        use std::io::Write;
        writeln!(w, "# {p}")?;
        writeln!(w, "epoch,loss")?;
        for (e, l) in trained.loss_history.iter().enumerate() {
            writeln!(w, "{},{l}", e + 1)?;
        }
        Ok(())
    })?;
    println!(
        "trained {} epochs, final loss {}; wrote {} checkpoints + final model to {}",
        cfg.epochs,
        trained.loss_history.last().copied().unwrap_or(f64::NAN),
        written,
        model_dir.display()
    );
    Ok(0)
}

fn detect(ctx: &Context, data: Option<&Path>, model: Option<&Path>) -> Result<u8> {
    let (ds, mask) = ctx.dataset(data)?;
    let artifacts = ctx.model(&ds, model)?;
    let reference = sample_reference(&ds, &mask, ctx.cfg.reference.m_k, ctx.cfg.reference.seed)?;
    let options = DetectOptions {
        include_reference: ctx.cfg.reference.include_in_ranking,
        class_scores: ctx.cfg.class_scores,
    };
    let mut runs = Vec::new();
    for &kind in &ctx.cfg.measures {
        let scorer = Scorer::new(
            SimilarityMeasure::with_settings(kind, ctx.cfg.measure_settings),
            &artifacts,
            &ds,
        )?;
        for &alg in &ctx.cfg.algorithms {
            let ranked = detect_with_scorer(alg, &ds, &reference, &scorer, options)?;
            let name = format!("ranking_{kind}_{alg}.csv");
            ctx.write_with(&name, |w, p| ranked.write_csv(w, Some(p)))?;
            let expected = (ranked.len() * reference.len()) as u64;
            eprintln!(
                "{kind}/{alg}: {} similarity calls (n·m = {}·{} = {expected})",
                ranked.sim_calls,
                ranked.len(),
                reference.len()
            );
            runs.push(json!({
                "measure": kind,
                "algorithm": alg,
                "file": name,
                "ranked": ranked.len(),
                "reference_size": reference.len(),
                "sim_calls": ranked.sim_calls,
                "skipped_pairs": ranked.skipped_pairs,
                "unconverged_pairs": ranked.unconverged_pairs,
            }));
        }
    }
    ctx.write_json("detect.json", json!({ "runs": runs }))?;
    Ok(0)
}

fn sweep_cmd(ctx: &Context, p_grid: Vec<f64>, stem: &str) -> Result<u8> {
    let spec = ctx.cfg.sweep_spec(p_grid);
    let outcome: SweepOutcome = run_sweep(&spec)?;
    ctx.write_json(&format!("{stem}.json"), serde_json::to_value(&outcome)?)?;
    ctx.write_with(&format!("{stem}.csv"), |w, p| outcome.write_csv(w, Some(p)))?;
    for r in &outcome.reports {
        let cells: Vec<String> = r
            .q_grid
            .iter()
            .zip(r.precision_mean.iter().zip(&r.precision_std))
            .map(|(q, (m, s))| format!("q={q}: {m:.3}±{s:.3}"))
            .collect();
        println!("p={} {}/{}: {}", r.p, r.measure, r.algorithm, cells.join(", "));
    }
    if outcome.failures.is_empty() {
        return Ok(0);
    }
    for f in &outcome.failures {
        eprintln!("failed cell p={} seed={}: {}", f.p, f.seed, f.error);
    }
    Ok(2)
}

fn theory_check(cli: &Cli, perturb: Option<f64>) -> Result<u8> {
    let ctx = match &cli.config {
        Some(_) => Some(Context::new(cli)?),
        None => None,
    };
    let grid = ctx
        .as_ref()
        .and_then(|c| c.cfg.theory.clone())
        .unwrap_or_else(TheoryGrid::default);
    let forms = match perturb {
        Some(rel) => ClosedForms::with_perturbed_cross(rel),
        None => ClosedForms::default(),
    };
    let report = run_theory_checks(&grid, &forms)?;
    print!("{}", report.render());
    let value = serde_json::to_value(&report)?;
    match &ctx {
        Some(c) => c.write_json("theory.json", value)?,
        None => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("ifclass-out"));
            fs::create_dir_all(&out)?;
            let mut text = serde_json::to_string_pretty(&json!({ "result": value }))?;
            text.push('\n');
            fs::write(out.join("theory.json"), text)?;
        }
    }
    Ok(if report.passed() { 0 } else { 2 })
}

fn export_gradients(ctx: &Context, data: Option<&Path>, model: Option<&Path>) -> Result<u8> {
    let (ds, mask) = ctx.dataset(data)?;
    let artifacts = ctx.model(&ds, model)?;
    let rows = export_gradient_pattern(&artifacts.params, &ds, Some(&mask))?;
    ctx.write_with("gradients.csv", |w, p| write_gradient_pattern_csv(&rows, w, Some(p)))?;
    println!("wrote {} gradient rows for {} points", rows.len(), ds.len());
    Ok(0)
}
