//! Command-line front end. Every command reads a TOML [`RunConfig`], is
//! deterministic for that config, and stamps its outputs with the config's
//! SHA-256.

mod commands;
mod config;

pub use config::{ReferenceSpec, RunConfig};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "ifclass",
    version,
    about = "Influence scores and mislabeled-data detection for small classifiers"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set noise.p=0.1`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads for scoring and sweep cells.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true, env = "IFCLASS_OUT_DIR", value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the (noisy) dataset and its corruption mask.
    Generate,
    /// Train on the noisy dataset and write checkpoints.
    Train {
        /// Dataset CSV to use instead of the configured source.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Rank training points for every configured measure and algorithm.
    Detect {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Trained model (`model.json` or its directory); trains afresh if absent.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Precision/recall at q over the configured seeds at `noise.p`.
    Evaluate,
    /// Full factorial over `p_grid` and seeds.
    Sweep,
    /// Check the symmetric-confidence closed forms.
    TheoryCheck {
        /// Scale the cross-class closed form by `1 + REL` (negative control).
        #[arg(long, value_name = "REL")]
        perturb: Option<f64>,
    },
    /// Write last-layer gradient rows for every point.
    ExportGradients {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

/// Runs a parsed command line. `Ok(0)` means everything succeeded; a
/// nonzero `Ok` code means the run finished with failed checks or cells.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.jobs {
        Some(0) => Err(Error::InvalidConfig("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| commands::dispatch(&cli)),
        None => commands::dispatch(&cli),
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => i32::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
