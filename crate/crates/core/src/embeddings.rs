//! Encoders, mean aggregation and analytic decoders.
//!
//! An [`Encoder`] turns a dataset into a [`DatasetEmbedding`]; a [`Decoder`]
//! maps `(theta, embedding)` to an estimate of the per-sample
//! log-likelihood `(1/n) L_n(theta)`. Per-sample encoders are aggregated by
//! the empirical mean, which keeps embeddings mergeable across shards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{cauchy_log_density, Dataset, ParamVector};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    /// A function of one observation, aggregated by the mean.
    PerSample,
    /// A permutation-invariant function of the whole dataset.
    DatasetStatistic,
}

/// Compressed substitute for a dataset: `m` reals and the sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEmbedding {
    pub s: Vec<f64>,
    pub n: usize,
}

impl DatasetEmbedding {
    pub fn new(s: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("embedding sample count must be at least 1".into()));
        }
        if let Some(j) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("embedding coordinate {j} is not finite")));
        }
        Ok(Self { s, n })
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// Embedding of the union of two shards under mean aggregation.
    pub fn merge(&self, other: &DatasetEmbedding) -> Result<DatasetEmbedding> {
        if self.dim() != other.dim() {
            return Err(Error::Shape(format!("merge of dims {} and {}", self.dim(), other.dim())));
        }
        let (a, b) = (self.n as f64, other.n as f64);
        let s = self.s.iter().zip(&other.s).map(|(x, y)| (a * x + b * y) / (a + b)).collect();
        DatasetEmbedding::new(s, self.n + other.n)
    }
}

pub trait Encoder: Send + Sync {
    fn name(&self) -> String;
    fn output_dim(&self) -> usize;
    fn mode(&self) -> EncoderMode;

    /// Encoding of a single observation. Only per-sample encoders support it.
    fn encode_sample(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Config(format!("{} is not a per-sample encoder", self.name())))
    }

    fn embed(&self, data: &Dataset) -> Result<DatasetEmbedding> {
        aggregate(self, data)
    }
}

pub trait Decoder: Send + Sync {
    fn name(&self) -> String;
    /// Estimate of the per-sample log-likelihood at `theta`.
    fn decode(&self, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64>;
}

/// Mean aggregation `s = (1/n) sum_i T(x_i)`.
pub fn aggregate<E: Encoder + ?Sized>(encoder: &E, data: &Dataset) -> Result<DatasetEmbedding> {
    if encoder.mode() != EncoderMode::PerSample {
        return Err(Error::Config(format!("{} cannot be mean-aggregated", encoder.name())));
    }
    let m = encoder.output_dim();
    let mut sum = vec![0.0; m];
    for x in data.rows() {
        let t = encoder.encode_sample(x)?;
        if t.len() != m {
            return Err(Error::Shape(format!("{} produced {} outputs, declared {m}", encoder.name(), t.len())));
        }
        for (acc, v) in sum.iter_mut().zip(&t) {
            *acc += v;
        }
    }
    let n = data.n();
    DatasetEmbedding::new(sum.into_iter().map(|v| v / n as f64).collect(), n)
}

/// `L~_n(theta) = n * h(theta, S)`.
pub fn surrogate_log_likelihood<D: Decoder + ?Sized>(decoder: &D, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
    Ok(s.n as f64 * decoder.decode(theta, s)?)
}

/// Raw moments `x -> (x, x^2, x^3, x^4)` truncated to `m` coordinates.
#[derive(Debug, Clone, Copy)]
pub struct GaussianMomentEncoder {
    m: usize,
}

pub fn gaussian_moment_encoder(m: usize) -> Result<GaussianMomentEncoder> {
    if !(1..=4).contains(&m) {
        return Err(Error::Config(format!("moment encoder dimension {m} outside 1..=4")));
    }
    Ok(GaussianMomentEncoder { m })
}

impl Encoder for GaussianMomentEncoder {
    fn name(&self) -> String {
        format!("gaussian_moments_m{}", self.m)
    }
    fn output_dim(&self) -> usize {
        self.m
    }
    fn mode(&self) -> EncoderMode {
        EncoderMode::PerSample
    }
    fn encode_sample(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 1 {
            return Err(Error::Shape(format!("moment encoder expects scalar rows, got {}", x.len())));
        }
        let mut out = Vec::with_capacity(self.m);
        let mut p = 1.0;
        for _ in 0..self.m {
            p *= x[0];
            out.push(p);
        }
        Ok(out)
    }
}

/// Gaussian per-sample log-likelihood written in terms of the first two raw
/// moments. With a single moment the second is replaced by `s1^2 + 1`, the
/// value it takes when the sample variance is one.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianAnalyticDecoder;

pub fn gaussian_analytic_decoder(theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
    GaussianAnalyticDecoder.decode(theta, s)
}

impl Decoder for GaussianAnalyticDecoder {
    fn name(&self) -> String {
        "gaussian_analytic".into()
    }
    fn decode(&self, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
        if theta.len() != 2 {
            return Err(Error::Shape(format!("gaussian decoder needs (mu, sigma), got {} values", theta.len())));
        }
        let (mu, sigma) = (theta.0[0], theta.0[1]);
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
        }
        let s1 = *s.s.first().ok_or_else(|| Error::Shape("gaussian decoder needs m >= 1".into()))?;
        let s2 = s.s.get(1).copied().unwrap_or(s1 * s1 + 1.0);
        Ok(-sigma.ln() - HALF_LN_2PI - (s2 - 2.0 * mu * s1 + mu * mu) / (2.0 * sigma * sigma))
    }
}

/// Empirical quantile at `level` of sorted data, with the order statistic
/// at 1-based position `n * level + 1/2` and linear interpolation between
/// neighbours (clamped to the extremes).
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let mut h = n as f64 * level + 0.5;
    if (h - h.round()).abs() <= 1e-9 {
        h = h.round();
    }
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor();
    let frac = h - lo;
    let i = lo as usize - 1;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Empirical quantiles at levels `(j - 0.5) / m`, `j = 1..=m`.
#[derive(Debug, Clone, Copy)]
pub struct CauchyQuantileEncoder {
    m: usize,
}

pub fn cauchy_quantile_encoder(m: usize) -> Result<CauchyQuantileEncoder> {
    if m == 0 {
        return Err(Error::Config("quantile encoder needs m >= 1".into()));
    }
    Ok(CauchyQuantileEncoder { m })
}

impl Encoder for CauchyQuantileEncoder {
    fn name(&self) -> String {
        format!("quantiles_m{}", self.m)
    }
    fn output_dim(&self) -> usize {
        self.m
    }
    fn mode(&self) -> EncoderMode {
        EncoderMode::DatasetStatistic
    }
    fn embed(&self, data: &Dataset) -> Result<DatasetEmbedding> {
        if data.dim() != 1 {
            return Err(Error::Shape(format!("quantile encoder expects scalar rows, got {}", data.dim())));
        }
        if self.m > data.n() {
            return Err(Error::Config(format!("{} quantiles requested from {} observations", self.m, data.n())));
        }
        let mut sorted = data.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = self.m as f64;
        let s = (1..=self.m).map(|j| empirical_quantile(&sorted, (j as f64 - 0.5) / m)).collect();
        DatasetEmbedding::new(s, data.n())
    }
}

/// Equal-weight plug-in: mean Cauchy log-density at the stored quantiles.
#[derive(Debug, Clone, Copy, Default)]
pub struct CauchyQuantileDecoder;

pub fn cauchy_quantile_decoder(theta: f64, s: &DatasetEmbedding) -> Result<f64> {
    CauchyQuantileDecoder.decode(&ParamVector(vec![theta]), s)
}

impl Decoder for CauchyQuantileDecoder {
    fn name(&self) -> String {
        "cauchy_quantile_plugin".into()
    }
    fn decode(&self, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
        if theta.len() != 1 {
            return Err(Error::Shape(format!("cauchy decoder needs one location, got {}", theta.len())));
        }
        if s.s.is_empty() {
            return Err(Error::Shape("cauchy decoder needs m >= 1".into()));
        }
        let total: f64 = s.s.iter().map(|q| cauchy_log_density(*q, theta.0[0])).sum();
        Ok(total / s.s.len() as f64)
    }
}

/// Wraps another decoder and adds a constant to its output.
#[derive(Debug, Clone)]
pub struct OffsetDecoder<D> {
    pub inner: D,
    pub offset: f64,
}

impl<D: Decoder> Decoder for OffsetDecoder<D> {
    fn name(&self) -> String {
        format!("{}+{}", self.inner.name(), self.offset)
    }
    fn decode(&self, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
        Ok(self.inner.decode(theta, s)? + self.offset)
    }
}

/// Decoder backed by a closure.
pub struct FnDecoder<F> {
    name: String,
    f: F,
}

impl<F> FnDecoder<F>
where
    F: Fn(&ParamVector, &DatasetEmbedding) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> Decoder for FnDecoder<F>
where
    F: Fn(&ParamVector, &DatasetEmbedding) -> f64 + Send + Sync,
{
    fn name(&self) -> String {
        self.name.clone()
    }
    fn decode(&self, theta: &ParamVector, s: &DatasetEmbedding) -> Result<f64> {
        Ok((self.f)(theta, s))
    }
}
