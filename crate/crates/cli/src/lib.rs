//! Experiment harness for the `lpembed` toolkit.
//!
//! Every run writes its CSV/JSON artifacts atomically into one output
//! directory together with a `manifest.json` listing checksums.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use lpembed::neural::TrainLog;

pub use config::{ExperimentConfig, ExperimentKind, ExperimentParams};
use experiments::GmmOutcome;
use output::{timestamp, write_atomic, OutputFile, RunManifest, MANIFEST_NAME};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub outputs: Vec<OutputFile>,
    pub bound_violations: Vec<String>,
}

impl RunReport {
    pub fn bounds_hold(&self) -> bool {
        self.bound_violations.is_empty()
    }
}

struct Artifacts {
    files: Vec<(String, String)>,
    violations: Vec<String>,
}

fn produce(config: &ExperimentConfig) -> Result<Artifacts> {
    use ExperimentParams as P;
    let seed = config.seed;
    Ok(match (&config.kind, &config.params) {
        (ExperimentKind::PointwiseValidation, P::Gaussian(p)) => {
            let s = experiments::run_pointwise_validation(p, seed)?;
            Artifacts {
                files: vec![
                    ("pointwise_validation.csv".into(), s.validation_csv()),
                    ("pointwise_validation_datasets.csv".into(), s.datasets_csv()),
                ],
                violations: s.violations,
            }
        }
        (ExperimentKind::PhaseTransition, P::Gaussian(p)) => {
            let s = experiments::run_phase_transition(p, seed)?;
            Artifacts {
                files: vec![("phase_transition.csv".into(), s.decay_csv()), ("phase_transition_datasets.csv".into(), s.datasets_csv())],
                violations: s.violations,
            }
        }
        (ExperimentKind::CauchyDecay, P::Cauchy(p)) => {
            let s = experiments::run_cauchy_decay(p, seed)?;
            Artifacts {
                files: vec![("cauchy_decay.csv".into(), s.decay_csv()), ("cauchy_decay_datasets.csv".into(), s.datasets_csv())],
                violations: s.violations,
            }
        }
        (ExperimentKind::TrainGmm, P::Gmm(p)) => {
            let o = experiments::run_train_gmm(p, seed)?;
            Artifacts { files: gmm_files(&o), violations: o.violations }
        }
        (ExperimentKind::ClinicalTrial, P::Trial(t)) => {
            let curve = experiments::run_clinical_trial(t)?;
            Artifacts {
                files: vec![
                    ("power_curve.csv".into(), curve.to_csv()),
                    ("trial_report.json".into(), experiments::trial_report_json(t, &curve)),
                ],
                violations: Vec::new(),
            }
        }
        (kind, _) => anyhow::bail!("parameters do not match experiment {kind}"),
    })
}

fn gmm_files(o: &GmmOutcome) -> Vec<(String, String)> {
    vec![
        ("gmm_weights.json".into(), experiments::gmm_weights_json(o)),
        ("gmm_train_log.csv".into(), o.log.to_csv()),
        ("gmm_calibration.json".into(), o.calibration_json()),
        ("gmm_loglik_points.csv".into(), GmmOutcome::points_csv(&o.loglik, &o.loglik_calibration)),
        ("gmm_ratio_points.csv".into(), GmmOutcome::points_csv(&o.ratios, &o.ratio_calibration)),
    ]
}

/// Runs one experiment on a pool of `threads` workers (all cores when
/// `None`) and writes its artifacts and manifest.
pub fn execute(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunReport> {
    let started = timestamp();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build().context("building worker pool")?;
    let workers = pool.current_num_threads();
    let produced = pool.install(|| produce(config));
    let artifacts = match produced {
        Ok(a) => a,
        Err(e) => {
            // keep what training logged before it diverged
            if let Some(lpembed::Error::Diverged { partial_log, .. }) = e.downcast_ref::<lpembed::Error>() {
                let log: &TrainLog = partial_log;
                write_atomic(&config.out_dir, "gmm_train_log.csv", log.to_csv().as_bytes())?;
            }
            return Err(e.context(format!("{} failed", config.kind)));
        }
    };
    let mut outputs = Vec::new();
    for (name, body) in &artifacts.files {
        outputs.push(write_atomic(&config.out_dir, name, body.as_bytes())?);
    }
    let manifest = RunManifest {
        experiment: config.kind.to_string(),
        seed: config.seed,
        toolkit_version: VERSION.to_string(),
        started,
        finished: timestamp(),
        threads: workers,
        config: serde_json::to_value(&config.params)?,
        outputs: outputs.clone(),
        bound_violations: artifacts.violations.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    write_atomic(&config.out_dir, MANIFEST_NAME, text.as_bytes())?;
    Ok(RunReport { out_dir: config.out_dir.clone(), outputs, bound_violations: artifacts.violations })
}
