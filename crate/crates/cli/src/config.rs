//! Experiment configuration: a TOML file with one `[experiment]` table,
//! overridden key by key from the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lpembed::federated::TrialConfig;
use lpembed::neural::{Activation, Objective};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const OUT_DIR_ENV: &str = "LPEMBED_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PointwiseValidation,
    PhaseTransition,
    CauchyDecay,
    TrainGmm,
    ClinicalTrial,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::PointwiseValidation,
        ExperimentKind::PhaseTransition,
        ExperimentKind::CauchyDecay,
        ExperimentKind::TrainGmm,
        ExperimentKind::ClinicalTrial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PointwiseValidation => "pointwise_validation",
            ExperimentKind::PhaseTransition => "phase_transition",
            ExperimentKind::CauchyDecay => "cauchy_decay",
            ExperimentKind::TrainGmm => "train_gmm",
            ExperimentKind::ClinicalTrial => "clinical_trial",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gaussian sweeps: pointwise validation and the phase transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSweepParams {
    pub n: usize,
    pub datasets: usize,
    pub m_values: Vec<usize>,
    /// Grid points along (mu, sigma).
    pub grid_resolution: [usize; 2],
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
}

impl GaussianSweepParams {
    pub fn validation() -> Self {
        Self { m_values: vec![1, 2], ..Self::phase_transition() }
    }

    pub fn phase_transition() -> Self {
        Self {
            n: 100,
            datasets: 100,
            m_values: vec![1, 2, 3, 4],
            grid_resolution: [21, 21],
            mu_range: (-2.0, 2.0),
            sigma_range: (0.6, 1.6),
        }
    }
}

impl Default for GaussianSweepParams {
    fn default() -> Self {
        Self::phase_transition()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CauchySweepParams {
    pub n: usize,
    pub datasets: usize,
    pub m_values: Vec<usize>,
    pub grid_points: usize,
    pub theta_range: (f64, f64),
}

impl Default for CauchySweepParams {
    fn default() -> Self {
        Self { n: 100, datasets: 100, m_values: (1..=8).collect(), grid_points: 121, theta_range: (-3.0, 3.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmParams {
    pub n: usize,
    pub embed_dim: usize,
    pub pool_size: usize,
    /// Standard deviation of the pool perturbations around the true means.
    pub pool_scale: f64,
    /// True means are `mean_scale * N(0, 1)` per coordinate.
    pub mean_scale: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub objective: Objective,
    pub checkpoint_every: usize,
    /// Parameter draws averaged per optimizer step.
    pub theta_batch: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            n: 1000,
            embed_dim: 16,
            pool_size: 50,
            pool_scale: 0.3,
            mean_scale: 2.0,
            iterations: 3000,
            learning_rate: 1e-3,
            objective: Objective::LrPair,
            checkpoint_every: 100,
            theta_batch: 32,
            encoder_hidden: vec![64, 64],
            decoder_hidden: vec![128, 64],
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentParams {
    Gaussian(GaussianSweepParams),
    Cauchy(CauchySweepParams),
    Gmm(GmmParams),
    Trial(TrialConfig),
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub params: ExperimentParams,
}

impl ExperimentConfig {
    /// Defaults for `kind` with no file and no overrides.
    pub fn defaults(kind: ExperimentKind, seed: u64, out_dir: PathBuf) -> Self {
        Self::resolve(kind, seed, Table::new(), None, Some(out_dir)).expect("defaults are valid")
    }

    /// Builds the configuration from the `[experiment]` table (already merged
    /// with overrides) and the command-line output directory.
    pub fn resolve(kind: ExperimentKind, seed: u64, mut table: Table, env_out: Option<PathBuf>, cli_out: Option<PathBuf>) -> Result<Self> {
        if let Some(v) = table.remove("kind") {
            let named = v.as_str().ok_or_else(|| anyhow!("`kind` must be a string"))?;
            if named != kind.as_str() {
                bail!("config is for `{named}` but the `{kind}` subcommand was run");
            }
        }
        if table.contains_key("seed") {
            bail!("`seed` is not a config key; pass --seed");
        }
        let file_out = match table.remove("out") {
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => bail!("`out` must be a string, got {other}"),
            None => None,
        };
        let out_dir = cli_out.or(file_out).or(env_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let params = match kind {
            ExperimentKind::PointwiseValidation => ExperimentParams::Gaussian(params_from(table, GaussianSweepParams::validation())?),
            ExperimentKind::PhaseTransition => ExperimentParams::Gaussian(params_from(table, GaussianSweepParams::phase_transition())?),
            ExperimentKind::CauchyDecay => ExperimentParams::Cauchy(params_from(table, CauchySweepParams::default())?),
            ExperimentKind::TrainGmm => ExperimentParams::Gmm(params_from(table, GmmParams::default())?),
            ExperimentKind::ClinicalTrial => {
                let mut t: TrialConfig = params_from(table, TrialConfig::default())?;
                t.seed = seed;
                t.validate()?;
                ExperimentParams::Trial(t)
            }
        };
        Ok(Self { kind, seed, out_dir, params })
    }
}

/// Deserializes `table` over `defaults`, rejecting unknown keys.
fn params_from<T: Serialize + DeserializeOwned>(table: Table, defaults: T) -> Result<T> {
    let mut base = match Value::try_from(&defaults)? {
        Value::Table(t) => t,
        _ => unreachable!("parameter structs serialize to tables"),
    };
    for (k, v) in table {
        if !base.contains_key(&k) {
            let known: Vec<&str> = base.keys().map(String::as_str).collect();
            bail!("unknown config key `{k}` (expected one of: kind, out, {})", known.join(", "));
        }
        base.insert(k, v);
    }
    Value::Table(base).try_into().map_err(|e: toml::de::Error| anyhow!("invalid config value: {}", e.message()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Table,
}

/// Parses a config document; everything must live under `[experiment]`.
pub fn parse_config(text: &str) -> Result<Table> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| anyhow!("config: {}", e.message()))?;
    Ok(file.experiment)
}

pub fn load_config(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// Interprets an override value as TOML (`3`, `0.5`, `[1, 2]`, `true`),
/// falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

pub fn apply_overrides(table: &mut Table, overrides: &[(String, String)]) {
    for (k, v) in overrides {
        table.insert(k.replace('-', "_"), parse_value(v));
    }
}

/// Flags handled by the argument parser itself; anything else of the form
/// `--key value` or `--key=value` is a config override.
const RESERVED: [&str; 8] = ["--config", "--seed", "--out", "--threads", "--help", "-h", "--version", "-V"];

/// `(key, raw value)` pairs taken from the command line.
pub type Overrides = Vec<(String, String)>;

pub fn split_overrides(args: &[String]) -> Result<(Vec<String>, Overrides)> {
    let mut kept = Vec::new();
    let mut overrides = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let name = a.split('=').next().unwrap_or(a);
        if i == 0 || !a.starts_with("--") || RESERVED.contains(&name) {
            kept.push(a.clone());
            // the value of a reserved flag is never an override
            if RESERVED.contains(&name) && !a.contains('=') && i + 1 < args.len() && !matches!(name, "--help" | "-h" | "--version" | "-V") {
                kept.push(args[i + 1].clone());
                i += 1;
            }
            i += 1;
            continue;
        }
        let key = &a[2..];
        if let Some((k, v)) = key.split_once('=') {
            overrides.push((k.to_string(), v.to_string()));
            i += 1;
        } else {
            let v = args.get(i + 1).ok_or_else(|| anyhow!("override `{a}` needs a value"))?;
            overrides.push((key.to_string(), v.clone()));
            i += 2;
        }
    }
    Ok((kept, overrides))
}
