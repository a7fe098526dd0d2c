//! Stochastic training loop.
//!
//! Each iteration draws a parameter (or a pair) uniformly from the pool,
//! draws a fresh dataset from the data-generating parameter, and takes one
//! Adam step on the selected loss. Every random choice comes from a stream
//! derived from the config seed, so runs are reproducible bit for bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{backprop_batch, Activation, Adam, EncoderDecoderPair, LossCase, MlpWeights};
use crate::error::{Error, Result};
use crate::metrics::{profile, ThetaGrid, BOUND_SLACK};
use crate::models::{log_likelihood, sample, ModelFamily, ParamVector};
use crate::rng::{derive_path, derive_seed, stream};
use crate::stats::format_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Pointwise,
    LrPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub embed_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { embed_dim: 2, encoder_hidden: vec![64, 64], decoder_hidden: vec![128, 64], activation: Activation::Tanh }
    }
}

impl Architecture {
    pub fn init(&self, data_dim: usize, param_dim: usize, seed: u64) -> Result<EncoderDecoderPair> {
        if self.embed_dim == 0 || self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut enc = vec![data_dim];
        enc.extend(&self.encoder_hidden);
        enc.push(self.embed_dim);
        let mut dec = vec![param_dim + self.embed_dim];
        dec.extend(&self.decoder_hidden);
        dec.push(1);
        EncoderDecoderPair::new(
            MlpWeights::init(&enc, self.activation, derive_seed(seed, 0)),
            MlpWeights::init(&dec, self.activation, derive_seed(seed, 1)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Observations per training draw.
    pub n: usize,
    /// Support of the parameter distribution sampled during training.
    pub theta_pool: Vec<ParamVector>,
    /// Grid for held-out evaluation; the pool is used when absent.
    pub eval_grid: Option<Vec<ParamVector>>,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// Parameter draws (or pairs) averaged per step; all share the step's dataset.
    pub theta_batch: usize,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Pointwise,
            iterations: 1000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            n: 100,
            theta_pool: Vec::new(),
            eval_grid: None,
            seed: 0,
            checkpoint_every: 100,
            theta_batch: 1,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.theta_pool.is_empty() {
            return Err(Error::Config("theta_pool must not be empty".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.theta_batch == 0 {
            return Err(Error::Config("theta_batch must be at least 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    /// Mean training loss since the previous checkpoint.
    pub loss: f64,
    /// Per-sample pointwise error on the held-out dataset and grid.
    pub eps_heldout: f64,
    /// Ratio distortion on the held-out dataset and grid.
    pub delta_heldout: f64,
    /// Whether `delta <= 2 n eps` held at this checkpoint.
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub checkpoints: Vec<Checkpoint>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "iteration,loss,eps_heldout,delta_heldout";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.checkpoints {
            out.push_str(&format!(
                "{},{},{},{}\n",
                c.iteration,
                format_float(c.loss),
                format_float(c.eps_heldout),
                format_float(c.delta_heldout)
            ));
        }
        out
    }
}

const STREAM_INIT: u64 = 10;
const STREAM_PILOT: u64 = 11;
const STREAM_HELDOUT: u64 = 12;
const STREAM_THETA: u64 = 13;
const STREAM_DATA: u64 = 14;

/// Trains an encoder/decoder pair against `family` with data drawn from `theta0`.
pub fn train(config: &TrainConfig, family: &dyn ModelFamily, theta0: &ParamVector) -> Result<(EncoderDecoderPair, TrainLog)> {
    config.validate()?;
    family.check_param(theta0)?;
    for t in &config.theta_pool {
        family.check_param(t)?;
    }
    let mut pair = config.architecture.init(family.data_dim(), family.param_dim(), derive_seed(config.seed, STREAM_INIT))?;

    // start the decoder output near the typical per-sample log-likelihood
    let pilot = sample(family, theta0, config.n, derive_seed(config.seed, STREAM_PILOT))?;
    let mut level = 0.0;
    for t in &config.theta_pool {
        level += log_likelihood(family, &pilot, t)? / pilot.n() as f64;
    }
    pair.decoder.layers.last_mut().expect("decoder has layers").bias[0] = level / config.theta_pool.len() as f64;

    let grid = ThetaGrid::new(config.eval_grid.clone().unwrap_or_else(|| config.theta_pool.clone()), "evaluation grid")?;
    let heldout = sample(family, theta0, config.n, derive_seed(config.seed, STREAM_HELDOUT))?;

    let mut adam = Adam::new(
        pair.encoder.param_count() + pair.decoder.param_count(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_epsilon,
    );
    let mut theta_rng = stream(derive_seed(config.seed, STREAM_THETA));
    let mut log = TrainLog::default();
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let pool = &config.theta_pool;

    for it in 1..=config.iterations {
        let data = sample(family, theta0, config.n, derive_path(config.seed, &[STREAM_DATA, it as u64]))?;
        let mut cases = Vec::with_capacity(config.theta_batch);
        for _ in 0..config.theta_batch {
            cases.push(match config.objective {
                Objective::Pointwise => LossCase::pointwise(family, &pool[theta_rng.random_range(0..pool.len())], &data)?,
                Objective::LrPair => {
                    let a = theta_rng.random_range(0..pool.len());
                    let b = theta_rng.random_range(0..pool.len());
                    LossCase::lr_pair(family, &pool[a], &pool[b], &data)?
                }
            });
        }
        let (value, grads) = match backprop_batch(&pair, &cases, &data) {
            Ok(v) => v,
            Err(Error::Domain(reason)) => return Err(diverged(it, reason, log)),
            Err(e) => return Err(e),
        };
        if !value.is_finite() {
            return Err(diverged(it, format!("loss is {value}"), log));
        }
        let mut params = pair.flat();
        adam.update(&mut params, &grads.flat());
        if params.iter().any(|v| !v.is_finite()) {
            return Err(diverged(it, "non-finite weights after update".into(), log));
        }
        pair.set_flat(&params)?;
        loss_sum += value;
        loss_count += 1;

        if it % config.checkpoint_every == 0 || it == config.iterations {
            let prof = match profile(family, &heldout, &pair.as_encoder(), &pair.as_decoder(), &grid) {
                Ok(p) => p,
                Err(Error::Domain(reason)) => return Err(diverged(it, reason, log)),
                Err(e) => return Err(e),
            };
            let (eps, _) = prof.epsilon();
            let (delta, _, _) = prof.delta();
            log.checkpoints.push(Checkpoint {
                iteration: it,
                loss: loss_sum / loss_count as f64,
                eps_heldout: eps,
                delta_heldout: delta,
                bound_holds: delta <= 2.0 * heldout.n() as f64 * eps + BOUND_SLACK,
            });
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    Ok((pair, log))
}

fn diverged(iteration: usize, reason: String, log: TrainLog) -> Error {
    Error::Diverged { iteration, reason, partial_log: Box::new(log) }
}
