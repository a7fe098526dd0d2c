use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use lpembed_cli::config::{apply_overrides, load_config, split_overrides, OUT_DIR_ENV};
use lpembed_cli::{execute, ExperimentConfig, ExperimentKind};

/// Likelihood-preserving embedding experiments.
///
/// Any `--key value` not listed below overrides the matching key of the
/// config file's `[experiment]` table.
#[derive(Parser)]
#[command(name = "lpembed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise error vs ratio distortion for Gaussian m = 1, 2.
    Validate(Common),
    /// Gaussian moment embeddings for m = 1..4.
    PhaseTransition(Common),
    /// Cauchy quantile embeddings for m = 1..8.
    CauchyDecay(Common),
    /// Train and calibrate a neural embedding of a 10-d Gaussian mixture.
    TrainGmm(Common),
    /// Power curves of the multi-site trial.
    ClinicalTrial(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file with an `[experiment]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every random stream derives from it.
    #[arg(long)]
    seed: u64,
    /// Output directory (default: $LPEMBED_OUT_DIR, then ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run() -> Result<bool> {
    let args: Vec<String> = std::env::args().collect();
    let (args, overrides) = split_overrides(&args)?;
    // usage errors exit 1 like any other operational error; 2 means a bound failed
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            e.print()?;
            std::process::exit(1);
        }
    };
    let (kind, common) = match cli.command {
        Command::Validate(c) => (ExperimentKind::PointwiseValidation, c),
        Command::PhaseTransition(c) => (ExperimentKind::PhaseTransition, c),
        Command::CauchyDecay(c) => (ExperimentKind::CauchyDecay, c),
        Command::TrainGmm(c) => (ExperimentKind::TrainGmm, c),
        Command::ClinicalTrial(c) => (ExperimentKind::ClinicalTrial, c),
    };
    let mut table = match &common.config {
        Some(path) => load_config(path)?,
        None => Default::default(),
    };
    apply_overrides(&mut table, &overrides);
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let config = ExperimentConfig::resolve(kind, common.seed, table, env_out, common.out)?;
    let report = execute(&config, common.threads)?;
    for f in &report.outputs {
        println!("wrote {} ({} bytes, sha256 {})", report.out_dir.join(&f.name).display(), f.bytes, f.sha256);
    }
    for v in &report.bound_violations {
        eprintln!("bound violated: {v}");
    }
    Ok(report.bounds_hold())
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
