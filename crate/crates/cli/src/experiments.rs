//! The five experiments. Each returns typed results; the crate root turns
//! them into the files written for a run.

use anyhow::{bail, Context, Result};
use lpembed::embeddings::{
    cauchy_quantile_encoder, gaussian_moment_encoder, CauchyQuantileDecoder, Decoder, Encoder, GaussianAnalyticDecoder,
};
use lpembed::federated::{power_curve, PowerCurve, TrialConfig};
use lpembed::metrics::{bound_violations, distortion_report, profile, DistortionReport, ThetaGrid, BOUND_SLACK};
use lpembed::models::{sample, CauchyFamily, GaussianFamily, GmmFamily};
use lpembed::neural::{calibrate_linear, train, weights_to_json, Architecture, Calibration, EncoderDecoderPair, TrainConfig, TrainLog};
use lpembed::rng::{derive_path, stream};
use lpembed::stats::{format_float, mean, std_error};
use lpembed::{Dataset, ModelFamily, ParamVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CauchySweepParams, GaussianSweepParams, GmmParams};

/// Averages over the datasets of one embedding dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub datasets: usize,
    pub epsilon_n: f64,
    pub epsilon_se: f64,
    /// Mean ratio distortion on the log-likelihood scale.
    pub delta_n: f64,
    pub delta_per_sample: f64,
    pub delta_per_sample_se: f64,
    pub bound_2n_eps: f64,
    /// `mean delta / mean (2 n eps)`; `None` when every bound is zero.
    pub tightness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Per-dataset reports, `reports[row][dataset]`.
    pub reports: Vec<Vec<DistortionReport>>,
    pub violations: Vec<String>,
}

impl Sweep {
    pub fn row(&self, m: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.m == m)
    }

    pub fn validation_csv(&self) -> String {
        let mut out = String::from("m,epsilon_n,delta_n,bound_2n_eps,tightness\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.m,
                format_float(r.epsilon_n),
                format_float(r.delta_n),
                format_float(r.bound_2n_eps),
                r.tightness.map(format_float).unwrap_or_default()
            ));
        }
        out
    }

    /// Per-sample series: `m, epsilon_n, epsilon_se, delta_n, delta_se`.
    pub fn decay_csv(&self) -> String {
        let mut out = String::from("m,epsilon_n,epsilon_se,delta_n,delta_se\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.m,
                format_float(r.epsilon_n),
                format_float(r.epsilon_se),
                format_float(r.delta_per_sample),
                format_float(r.delta_per_sample_se)
            ));
        }
        out
    }

    pub fn datasets_csv(&self) -> String {
        let mut out = format!("m,dataset,{}\n", DistortionReport::CSV_HEADER);
        for (row, reports) in self.rows.iter().zip(&self.reports) {
            for (d, r) in reports.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", row.m, d, r.to_csv_row()));
            }
        }
        out
    }
}

/// Draws `datasets` datasets, each from a parameter uniform over the grid's
/// box, and pairs each with its nearest grid point as the test null.
fn draw_datasets(family: &dyn ModelFamily, grid: &ThetaGrid, n: usize, datasets: usize, seed: u64) -> Result<Vec<(Dataset, usize)>> {
    (0..datasets)
        .into_par_iter()
        .map(|d| {
            let mut r = stream(derive_path(seed, &[d as u64, 0]));
            let theta = ParamVector(family.domain().iter().map(|&(lo, hi)| r.random_range(lo..=hi)).collect());
            let data = sample(family, &theta, n, derive_path(seed, &[d as u64, 1]))?;
            let nearest = (0..grid.len())
                .min_by(|&a, &b| grid.points[a].distance(&theta).total_cmp(&grid.points[b].distance(&theta)))
                .expect("grid is non-empty");
            Ok((data, nearest))
        })
        .collect()
}

fn sweep<E: Encoder>(
    family: &dyn ModelFamily,
    grid: &ThetaGrid,
    datasets: &[(Dataset, usize)],
    m_values: &[usize],
    encoder: impl Fn(usize) -> lpembed::Result<E>,
    decoder: &dyn Decoder,
) -> Result<Sweep> {
    let mut rows = Vec::new();
    let mut all = Vec::new();
    let mut violations = Vec::new();
    for &m in m_values {
        let enc = encoder(m)?;
        let reports = datasets
            .par_iter()
            .map(|(data, i0)| distortion_report(family, data, &enc, decoder, grid, *i0))
            .collect::<lpembed::Result<Vec<_>>>()
            .with_context(|| format!("m = {m}"))?;
        for (d, r) in reports.iter().enumerate() {
            for v in bound_violations(r) {
                violations.push(format!("m={m} dataset {d}: {v}"));
            }
        }
        let n = datasets.first().map(|(d, _)| d.n()).unwrap_or(1) as f64;
        let eps: Vec<f64> = reports.iter().map(|r| r.epsilon_n).collect();
        let delta: Vec<f64> = reports.iter().map(|r| r.delta_n).collect();
        let per_sample: Vec<f64> = delta.iter().map(|d| d / n).collect();
        let bound = mean(&reports.iter().map(|r| r.bound_2n_eps).collect::<Vec<_>>());
        rows.push(SweepRow {
            m,
            datasets: reports.len(),
            epsilon_n: mean(&eps),
            epsilon_se: std_error(&eps),
            delta_n: mean(&delta),
            delta_per_sample: mean(&per_sample),
            delta_per_sample_se: std_error(&per_sample),
            bound_2n_eps: bound,
            tightness: (bound > 0.0).then(|| mean(&delta) / bound),
        });
        all.push(reports);
    }
    Ok(Sweep { rows, reports: all, violations })
}

fn check_sweep(n: usize, datasets: usize, m_values: &[usize]) -> Result<()> {
    if n == 0 || datasets == 0 || m_values.is_empty() {
        bail!("n, datasets and m_values must be non-empty");
    }
    Ok(())
}

/// Gaussian sweep with moment encoders and the analytic decoder.
pub fn run_gaussian_sweep(p: &GaussianSweepParams, seed: u64) -> Result<Sweep> {
    check_sweep(p.n, p.datasets, &p.m_values)?;
    let fam = GaussianFamily::new(p.mu_range, p.sigma_range)?;
    let grid = ThetaGrid::axes(fam.domain(), &p.grid_resolution)?;
    let data = draw_datasets(&fam, &grid, p.n, p.datasets, seed)?;
    sweep(&fam, &grid, &data, &p.m_values, gaussian_moment_encoder, &GaussianAnalyticDecoder)
}

pub fn run_pointwise_validation(p: &GaussianSweepParams, seed: u64) -> Result<Sweep> {
    run_gaussian_sweep(p, seed)
}

pub fn run_phase_transition(p: &GaussianSweepParams, seed: u64) -> Result<Sweep> {
    run_gaussian_sweep(p, seed)
}

/// Cauchy sweep with quantile encoders and the plug-in decoder.
pub fn run_cauchy_decay(p: &CauchySweepParams, seed: u64) -> Result<Sweep> {
    check_sweep(p.n, p.datasets, &p.m_values)?;
    let fam = CauchyFamily::new(p.theta_range)?;
    let grid = ThetaGrid::axes(fam.domain(), &[p.grid_points])?;
    let data = draw_datasets(&fam, &grid, p.n, p.datasets, seed)?;
    sweep(&fam, &grid, &data, &p.m_values, cauchy_quantile_encoder, &CauchyQuantileDecoder)
}

#[derive(Debug, Clone)]
pub struct GmmOutcome {
    pub pair: EncoderDecoderPair,
    pub log: TrainLog,
    pub theta0: ParamVector,
    pub pool: Vec<ParamVector>,
    /// `(true, surrogate)` log-likelihood per pool point on the evaluation dataset.
    pub loglik: Vec<(f64, f64)>,
    /// `(true, surrogate)` log-likelihood ratio per unordered pool pair.
    pub ratios: Vec<(f64, f64)>,
    pub loglik_calibration: Calibration,
    pub ratio_calibration: Calibration,
    pub epsilon_n: f64,
    pub delta_n: f64,
    pub n: usize,
    pub violations: Vec<String>,
}

#[derive(Serialize)]
struct GmmSummary<'a> {
    loglik: &'a Calibration,
    ratio: &'a Calibration,
    points: usize,
    pairs: usize,
    epsilon_n: f64,
    delta_n_per_sample: f64,
    delta_n: f64,
    bound_2n_eps: f64,
    iterations: usize,
    final_loss: Option<f64>,
}

impl GmmOutcome {
    pub fn delta_per_sample(&self) -> f64 {
        self.delta_n / self.n as f64
    }

    pub fn calibration_json(&self) -> String {
        let s = GmmSummary {
            loglik: &self.loglik_calibration,
            ratio: &self.ratio_calibration,
            points: self.loglik.len(),
            pairs: self.ratios.len(),
            epsilon_n: self.epsilon_n,
            delta_n_per_sample: self.delta_per_sample(),
            delta_n: self.delta_n,
            bound_2n_eps: 2.0 * self.n as f64 * self.epsilon_n,
            iterations: self.log.checkpoints.last().map(|c| c.iteration).unwrap_or(0),
            final_loss: self.log.checkpoints.last().map(|c| c.loss),
        };
        serde_json::to_string_pretty(&s).expect("summary serializes") + "\n"
    }

    pub fn points_csv(points: &[(f64, f64)], calibration: &Calibration) -> String {
        let mut out = String::from("true,surrogate,calibrated\n");
        for &(t, s) in points {
            out.push_str(&format!("{},{},{}\n", format_float(t), format_float(s), format_float(calibration.apply(s))));
        }
        out
    }
}

const GMM_STREAM_MEANS: u64 = 0;
const GMM_STREAM_POOL: u64 = 1;
const GMM_STREAM_TRAIN: u64 = 2;
const GMM_STREAM_EVAL: u64 = 3;

/// True means, the perturbation pool and the training configuration.
pub fn gmm_setup(p: &GmmParams, seed: u64) -> Result<(GmmFamily, ParamVector, Vec<ParamVector>, TrainConfig)> {
    if p.pool_size < 3 {
        bail!("pool_size must be at least 3 for calibration");
    }
    let fam = GmmFamily::default();
    let mut r = stream(derive_path(seed, &[GMM_STREAM_MEANS]));
    let theta0 = ParamVector(
        (0..fam.param_dim())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                p.mean_scale * z
            })
            .collect(),
    );
    let mut r = stream(derive_path(seed, &[GMM_STREAM_POOL]));
    let pool: Vec<ParamVector> = (0..p.pool_size)
        .map(|_| {
            ParamVector(
                theta0
                    .0
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(&mut r);
                        m + p.pool_scale * z
                    })
                    .collect(),
            )
        })
        .collect();
    let cfg = TrainConfig {
        objective: p.objective,
        iterations: p.iterations,
        learning_rate: p.learning_rate,
        n: p.n,
        theta_pool: pool.clone(),
        eval_grid: None,
        seed: derive_path(seed, &[GMM_STREAM_TRAIN]),
        checkpoint_every: p.checkpoint_every,
        theta_batch: p.theta_batch,
        architecture: Architecture {
            embed_dim: p.embed_dim,
            encoder_hidden: p.encoder_hidden.clone(),
            decoder_hidden: p.decoder_hidden.clone(),
            activation: p.activation,
        },
        ..TrainConfig::default()
    };
    Ok((fam, theta0, pool, cfg))
}

/// Trains on the mixture and calibrates the surrogate on a fresh dataset.
pub fn run_train_gmm(p: &GmmParams, seed: u64) -> Result<GmmOutcome> {
    let (fam, theta0, pool, cfg) = gmm_setup(p, seed)?;
    let (pair, log) = train(&cfg, &fam, &theta0)?;
    let grid = ThetaGrid::new(pool.clone(), "gmm perturbation pool")?;
    let data = sample(&fam, &theta0, p.n, derive_path(seed, &[GMM_STREAM_EVAL]))?;
    let prof = profile(&fam, &data, &pair.as_encoder(), &pair.as_decoder(), &grid)?;
    let surr: Vec<f64> = (0..grid.len()).map(|g| prof.surrogate(g)).collect();
    let loglik: Vec<(f64, f64)> = prof.log_lik.iter().copied().zip(surr.iter().copied()).collect();
    let mut ratios = Vec::with_capacity(grid.len() * (grid.len() - 1) / 2);
    for a in 0..grid.len() {
        for b in a + 1..grid.len() {
            ratios.push((prof.log_lik[a] - prof.log_lik[b], surr[a] - surr[b]));
        }
    }
    let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
    let (lt, ls) = split(&loglik);
    let (rt, rs) = split(&ratios);
    let loglik_calibration = calibrate_linear(&lt, &ls)?;
    let ratio_calibration = calibrate_linear(&rt, &rs)?;
    let (epsilon_n, _) = prof.epsilon();
    let (delta_n, _, _) = prof.delta();
    let mut violations = Vec::new();
    if delta_n > 2.0 * p.n as f64 * epsilon_n + BOUND_SLACK {
        violations.push("evaluation: delta <= 2 n eps".to_string());
    }
    for c in log.checkpoints.iter().filter(|c| !c.bound_holds) {
        violations.push(format!("checkpoint {}: delta <= 2 n eps", c.iteration));
    }
    Ok(GmmOutcome {
        pair,
        log,
        theta0,
        pool,
        loglik,
        ratios,
        loglik_calibration,
        ratio_calibration,
        epsilon_n,
        delta_n,
        n: p.n,
        violations,
    })
}

pub fn gmm_weights_json(outcome: &GmmOutcome) -> String {
    weights_to_json(&outcome.pair)
}

#[derive(Serialize)]
struct TrialReport<'a> {
    config: &'a TrialConfig,
    /// `site_seeds[sim][site]`, shared by every effect size and method.
    site_seeds: Vec<Vec<u64>>,
    rows: &'a [lpembed::federated::PowerRow],
}

pub fn run_clinical_trial(cfg: &TrialConfig) -> Result<PowerCurve> {
    Ok(power_curve(cfg)?)
}

pub fn trial_report_json(cfg: &TrialConfig, curve: &PowerCurve) -> String {
    let site_seeds = (0..cfg.n_sims).map(|s| (0..cfg.sites).map(|k| cfg.site_seed(s, k)).collect()).collect();
    let report = TrialReport { config: cfg, site_seeds, rows: &curve.rows };
    serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
}
