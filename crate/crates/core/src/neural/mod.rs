//! Learned encoder/decoder pairs.
//!
//! The encoder is an MLP applied to each observation and mean-aggregated;
//! the decoder is an MLP applied to `[theta; S]`. Gradients are computed by
//! hand, including the `1/n`-weighted flow through the mean aggregation back
//! into the encoder.

mod adam;
mod calibrate;
mod io;
mod mlp;
mod train;

pub use adam::Adam;
pub use calibrate::{calibrate_linear, Calibration};
pub use io::{load_weights, parse_weights, save_weights, weights_to_json};
pub use mlp::{mlp_forward, Activation, Layer, MlpWeights, Trace};
pub use train::{train, Architecture, Checkpoint, Objective, TrainConfig, TrainLog};

use crate::embeddings::{DatasetEmbedding, Decoder, Encoder, EncoderMode};
use crate::error::{Error, Result};
use crate::models::{log_likelihood, Dataset, ModelFamily, ParamVector};

/// Encoder `d -> ... -> m` and decoder `(p + m) -> ... -> 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoderPair {
    pub encoder: MlpWeights,
    pub decoder: MlpWeights,
}

/// Gradient of a loss with respect to every weight of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: MlpWeights,
    pub decoder: MlpWeights,
}

impl Gradients {
    /// Encoder parameters then decoder parameters, matching [`EncoderDecoderPair::flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.encoder.flat();
        v.extend(self.decoder.flat());
        v
    }
}

impl EncoderDecoderPair {
    pub fn new(encoder: MlpWeights, decoder: MlpWeights) -> Result<Self> {
        if decoder.input_dim() <= encoder.output_dim() {
            return Err(Error::Shape(format!(
                "decoder input {} must exceed the embedding dimension {}",
                decoder.input_dim(),
                encoder.output_dim()
            )));
        }
        if decoder.output_dim() != 1 {
            return Err(Error::Shape(format!("decoder must emit one value, emits {}", decoder.output_dim())));
        }
        Ok(Self { encoder, decoder })
    }

    pub fn data_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn param_dim(&self) -> usize {
        self.decoder.input_dim() - self.encoder.output_dim()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.encoder.flat();
        v.extend(self.decoder.flat());
        v
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let k = self.encoder.param_count();
        if values.len() != k + self.decoder.param_count() {
            return Err(Error::Shape("flat parameter length mismatch".into()));
        }
        self.encoder.set_flat(&values[..k])?;
        self.decoder.set_flat(&values[k..])
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { encoder: self.encoder.zeros_like(), decoder: self.decoder.zeros_like() }
    }

    fn check(&self, data: &Dataset, theta: &ParamVector) -> Result<()> {
        if data.dim() != self.data_dim() {
            return Err(Error::Shape(format!("data dimension {} but encoder takes {}", data.dim(), self.data_dim())));
        }
        if theta.len() != self.param_dim() {
            return Err(Error::Shape(format!("theta has {} values but decoder takes {}", theta.len(), self.param_dim())));
        }
        Ok(())
    }

    /// Mean of encoder outputs over the rows of `data`.
    pub fn embed(&self, data: &Dataset) -> Result<DatasetEmbedding> {
        if data.dim() != self.data_dim() {
            return Err(Error::Shape(format!("data dimension {} but encoder takes {}", data.dim(), self.data_dim())));
        }
        let (s, _) = self.embed_traced(data);
        DatasetEmbedding::new(s, data.n())
    }

    fn embed_traced(&self, data: &Dataset) -> (Vec<f64>, Vec<Trace>) {
        let m = self.embed_dim();
        let mut sum = vec![0.0; m];
        let mut traces = Vec::with_capacity(data.n());
        for x in data.rows() {
            let mut t = Trace::default();
            self.encoder.forward_traced(x, &mut t);
            for (a, v) in sum.iter_mut().zip(t.output()) {
                *a += v;
            }
            traces.push(t);
        }
        let n = data.n() as f64;
        (sum.into_iter().map(|v| v / n).collect(), traces)
    }

    fn decoder_input(theta: &ParamVector, s: &[f64]) -> Vec<f64> {
        let mut z = theta.0.clone();
        z.extend_from_slice(s);
        z
    }

    /// `h(theta, S)`.
    pub fn decode(&self, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
        if theta.len() != self.param_dim() || s.dim() != self.embed_dim() {
            return Err(Error::Shape("decoder input dimensions do not match the pair".into()));
        }
        Ok(self.decoder.forward(&Self::decoder_input(theta, &s.s))?[0])
    }

    pub fn as_encoder(&self) -> NeuralEncoder<'_> {
        NeuralEncoder(self)
    }

    pub fn as_decoder(&self) -> NeuralDecoder<'_> {
        NeuralDecoder(self)
    }
}

/// [`Encoder`] view of a trained pair.
pub struct NeuralEncoder<'a>(&'a EncoderDecoderPair);

impl Encoder for NeuralEncoder<'_> {
    fn name(&self) -> String {
        format!("mlp_encoder_m{}", self.0.embed_dim())
    }
    fn output_dim(&self) -> usize {
        self.0.embed_dim()
    }
    fn mode(&self) -> EncoderMode {
        EncoderMode::PerSample
    }
    fn encode_sample(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.encoder.forward(x)
    }
    fn embed(&self, data: &Dataset) -> Result<DatasetEmbedding> {
        self.0.embed(data)
    }
}

/// [`Decoder`] view of a trained pair.
pub struct NeuralDecoder<'a>(&'a EncoderDecoderPair);

impl Decoder for NeuralDecoder<'_> {
    fn name(&self) -> String {
        "mlp_decoder".into()
    }
    fn decode(&self, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
        self.0.decode(theta, s)
    }
}

/// Loss inputs, with the exact log-likelihood targets already evaluated.
#[derive(Debug, Clone)]
pub enum LossCase {
    /// Per-sample target `(1/n) L_n(theta)`.
    Pointwise { theta: ParamVector, target: f64 },
    /// Exact log-likelihood difference `L_n(theta) - L_n(theta')`.
    LrPair { theta: ParamVector, theta_prime: ParamVector, target_diff: f64 },
}

impl LossCase {
    pub fn pointwise(family: &dyn ModelFamily, theta: &ParamVector, data: &Dataset) -> Result<Self> {
        let target = log_likelihood(family, data, theta)? / data.n() as f64;
        Ok(LossCase::Pointwise { theta: theta.clone(), target })
    }

    pub fn lr_pair(family: &dyn ModelFamily, theta: &ParamVector, theta_prime: &ParamVector, data: &Dataset) -> Result<Self> {
        let target_diff = log_likelihood(family, data, theta)? - log_likelihood(family, data, theta_prime)?;
        Ok(LossCase::LrPair { theta: theta.clone(), theta_prime: theta_prime.clone(), target_diff })
    }
}

/// `((1/n) L_n(theta) - h(theta, S))^2`.
pub fn pointwise_loss(pair: &EncoderDecoderPair, family: &dyn ModelFamily, theta: &ParamVector, data: &Dataset) -> Result<f64> {
    pair.check(data, theta)?;
    loss(pair, &LossCase::pointwise(family, theta, data)?, data)
}

/// `((L_n(theta) - L_n(theta')) - (L~_n(theta) - L~_n(theta')))^2`.
pub fn lr_pair_loss(
    pair: &EncoderDecoderPair,
    family: &dyn ModelFamily,
    theta: &ParamVector,
    theta_prime: &ParamVector,
    data: &Dataset,
) -> Result<f64> {
    pair.check(data, theta)?;
    pair.check(data, theta_prime)?;
    loss(pair, &LossCase::lr_pair(family, theta, theta_prime, data)?, data)
}

/// Loss value for a prepared case.
pub fn loss(pair: &EncoderDecoderPair, case: &LossCase, data: &Dataset) -> Result<f64> {
    loss_batch(pair, std::slice::from_ref(case), data)
}

/// Mean loss over several cases sharing one dataset.
pub fn loss_batch(pair: &EncoderDecoderPair, cases: &[LossCase], data: &Dataset) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::Empty("no loss cases".into()));
    }
    let s = pair.embed(data)?;
    let n = data.n() as f64;
    let mut total = 0.0;
    for case in cases {
        total += match case {
            LossCase::Pointwise { theta, target } => (target - pair.decode(theta, &s)?).powi(2),
            LossCase::LrPair { theta, theta_prime, target_diff } => {
                let surrogate_diff = n * (pair.decode(theta, &s)? - pair.decode(theta_prime, &s)?);
                (target_diff - surrogate_diff).powi(2)
            }
        };
    }
    Ok(total / cases.len() as f64)
}

/// Loss and its gradient with respect to every encoder and decoder weight.
pub fn backprop(pair: &EncoderDecoderPair, case: &LossCase, data: &Dataset) -> Result<(f64, Gradients)> {
    backprop_batch(pair, std::slice::from_ref(case), data)
}

/// Gradient of [`loss_batch`]. The encoder runs once for the whole batch.
pub fn backprop_batch(pair: &EncoderDecoderPair, cases: &[LossCase], data: &Dataset) -> Result<(f64, Gradients)> {
    if cases.is_empty() {
        return Err(Error::Empty("no loss cases".into()));
    }
    for case in cases {
        match case {
            LossCase::Pointwise { theta, .. } => pair.check(data, theta)?,
            LossCase::LrPair { theta, theta_prime, .. } => {
                pair.check(data, theta)?;
                pair.check(data, theta_prime)?;
            }
        }
    }
    let n = data.n() as f64;
    let scale = 1.0 / cases.len() as f64;
    let p = pair.param_dim();
    let (s, traces) = pair.embed_traced(data);
    let mut grads = pair.zero_gradients();
    let mut grad_s = vec![0.0; s.len()];
    let mut t = Trace::default();

    // each decoder evaluation contributes d loss / d h to the decoder and to S
    let mut through_decoder = |theta: &ParamVector, grads: &mut Gradients, dl_dh: f64| {
        let z = EncoderDecoderPair::decoder_input(theta, &s);
        pair.decoder.forward_traced(&z, &mut t);
        let dz = pair.decoder.backward(&t, &[dl_dh], &mut grads.decoder);
        for (g, d) in grad_s.iter_mut().zip(&dz[p..]) {
            *g += d;
        }
    };

    let mut value = 0.0;
    for case in cases {
        value += match case {
            LossCase::Pointwise { theta, target } => {
                let pred = pair.decoder.forward(&EncoderDecoderPair::decoder_input(theta, &s))?[0];
                let resid = target - pred;
                through_decoder(theta, &mut grads, -2.0 * resid * scale);
                resid * resid
            }
            LossCase::LrPair { theta, theta_prime, target_diff } => {
                let h1 = pair.decoder.forward(&EncoderDecoderPair::decoder_input(theta, &s))?[0];
                let h2 = pair.decoder.forward(&EncoderDecoderPair::decoder_input(theta_prime, &s))?[0];
                let resid = target_diff - n * (h1 - h2);
                through_decoder(theta, &mut grads, -2.0 * resid * n * scale);
                through_decoder(theta_prime, &mut grads, 2.0 * resid * n * scale);
                resid * resid
            }
        };
    }

    // S is the mean of encoder outputs, so each row receives grad_s / n
    let per_row: Vec<f64> = grad_s.iter().map(|g| g / n).collect();
    for t in &traces {
        pair.encoder.backward(t, &per_row, &mut grads.encoder);
    }
    Ok((value * scale, grads))
}
