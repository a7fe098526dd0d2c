//! Likelihood-preserving embeddings.
//!
//! The crate is organised around one question: can a short vector computed
//! from a dataset stand in for the dataset when evaluating its likelihood?
//!
//! * [`models`] supplies exact log-likelihoods for the Gaussian, Cauchy and
//!   Gaussian-mixture families.
//! * [`embeddings`] builds dataset embeddings (moment and quantile encoders)
//!   and analytic decoders that reconstruct per-sample log-likelihood.
//! * [`metrics`] audits an encoder/decoder pair on a parameter grid:
//!   pointwise error, ratio distortion, and the bounds on test statistics,
//!   maximisers, information criteria and Bayes factors that follow from them.
//! * [`neural`] trains learned encoder/decoder pairs with a small MLP,
//!   hand-written backpropagation and Adam.
//! * [`federated`] simulates a multi-site trial where sites only share
//!   additive summary statistics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embeddings;
pub mod error;
pub mod federated;
pub mod metrics;
pub mod models;
pub mod neural;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use models::{Dataset, ModelFamily, ParamVector};
