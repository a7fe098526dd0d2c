use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, pearson};

/// Least-squares fit `true ~ slope * surrogate + intercept` and Pearson `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
}

impl Calibration {
    pub fn apply(&self, surrogate: f64) -> f64 {
        self.slope * surrogate + self.intercept
    }
}

pub fn calibrate_linear(true_vals: &[f64], surrogate_vals: &[f64]) -> Result<Calibration> {
    if true_vals.len() != surrogate_vals.len() {
        return Err(Error::Shape(format!("{} true values vs {} surrogate values", true_vals.len(), surrogate_vals.len())));
    }
    if true_vals.len() < 3 {
        return Err(Error::Degenerate("linear calibration needs at least 3 points".into()));
    }
    let mt = mean(true_vals);
    let ms = mean(surrogate_vals);
    let sxy: f64 = true_vals.iter().zip(surrogate_vals).map(|(t, s)| (s - ms) * (t - mt)).sum();
    let sxx: f64 = surrogate_vals.iter().map(|s| (s - ms) * (s - ms)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("surrogate values have zero variance".into()));
    }
    let r = pearson(true_vals, surrogate_vals)?;
    let slope = sxy / sxx;
    Ok(Calibration { slope, intercept: mt - slope * ms, r })
}
