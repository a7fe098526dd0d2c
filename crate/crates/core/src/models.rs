//! Parametric families with exact log-densities, samplers and closed-form
//! maximum-likelihood estimates.
//!
//! These are the ground truth every embedding is audited against: the
//! whole-dataset log-likelihood `L_n(theta) = sum_i log p_theta(x_i)` is
//! computed here and nowhere else.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::log_sum_exp;

/// Smallest admissible scale parameter.
pub const MIN_SIGMA: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// An `n x d` matrix of i.i.d. observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    dim: usize,
    seed: u64,
}

impl Dataset {
    pub fn new(values: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dataset dimension must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!("{} values do not form rows of width {dim}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite entry at flat index {i}")));
        }
        Ok(Self { values, dim, seed })
    }

    /// One-dimensional dataset from a column of observations.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1, 0)
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!("concat of dims {} and {}", self.dim, other.dim)));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Dataset::new(values, self.dim, 0)
    }

    /// Rows reordered so that row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Dataset> {
        if order.len() != self.n() {
            return Err(Error::Shape("permutation length differs from n".into()));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        Dataset::new(values, self.dim, self.seed)
    }
}

/// Behavioural contract of a parametric family.
pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &str;
    fn param_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    /// Box bounds `(lo, hi)` per parameter coordinate.
    fn domain(&self) -> &[(f64, f64)];

    /// Structural validity of `theta` (length, positivity of scales).
    fn check_param(&self, theta: &ParamVector) -> Result<()>;

    /// `log p_theta(x)` for an already-validated `theta`.
    fn log_density_unchecked(&self, x: &[f64], theta: &ParamVector) -> f64;

    /// Writes one draw from `P_theta` into `out`.
    fn draw(&self, theta: &ParamVector, rng: &mut rng::StreamRng, out: &mut [f64]);

    fn log_density(&self, x: &[f64], theta: &ParamVector) -> Result<f64> {
        self.check_param(theta)?;
        if x.len() != self.data_dim() {
            return Err(Error::Shape(format!("{}: observation has {} coordinates, expected {}", self.name(), x.len(), self.data_dim())));
        }
        Ok(self.log_density_unchecked(x, theta))
    }

    fn in_domain(&self, theta: &ParamVector) -> bool {
        theta.len() == self.param_dim() && theta.0.iter().zip(self.domain()).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

fn check_len(family: &dyn ModelFamily, theta: &ParamVector) -> Result<()> {
    if theta.len() != family.param_dim() {
        return Err(Error::Shape(format!("{}: parameter has {} coordinates, expected {}", family.name(), theta.len(), family.param_dim())));
    }
    if theta.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{}: non-finite parameter {:?}", family.name(), theta.0)));
    }
    Ok(())
}

/// `L_n(theta)`: sum of per-row log densities.
pub fn log_likelihood(family: &dyn ModelFamily, data: &Dataset, theta: &ParamVector) -> Result<f64> {
    family.check_param(theta)?;
    if data.dim() != family.data_dim() {
        return Err(Error::Shape(format!("{}: dataset has dimension {}, expected {}", family.name(), data.dim(), family.data_dim())));
    }
    Ok(data.rows().map(|x| family.log_density_unchecked(x, theta)).sum())
}

/// Draws `n` i.i.d. rows from `P_theta`; deterministic in `(theta, n, seed)`.
pub fn sample(family: &dyn ModelFamily, theta: &ParamVector, n: usize, seed: u64) -> Result<Dataset> {
    family.check_param(theta)?;
    if n == 0 {
        return Err(Error::Empty("sample size must be at least 1".into()));
    }
    let d = family.data_dim();
    let mut values = vec![0.0; n * d];
    let mut rng = rng::stream(seed);
    for row in values.chunks_exact_mut(d) {
        family.draw(theta, &mut rng, row);
    }
    Dataset::new(values, d, seed)
}

/// Log-density of `N(mu, sigma^2)` at `x`.
pub fn gaussian_log_density(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma >= MIN_SIGMA) {
        return Err(Error::Domain(format!("sigma = {sigma} is below {MIN_SIGMA}")));
    }
    let z = (x - mu) / sigma;
    Ok(-sigma.ln() - HALF_LN_2PI - 0.5 * z * z)
}

/// Log-density of `Cauchy(theta, 1)` at `x`.
pub fn cauchy_log_density(x: f64, theta: f64) -> f64 {
    let r = x - theta;
    -PI.ln() - r.mul_add(r, 1.0).ln()
}

/// Univariate Gaussian with parameters `(mu, sigma)`.
#[derive(Debug, Clone)]
pub struct GaussianFamily {
    domain: [(f64, f64); 2],
}

impl GaussianFamily {
    pub fn new(mu_range: (f64, f64), sigma_range: (f64, f64)) -> Result<Self> {
        if sigma_range.0 < MIN_SIGMA {
            return Err(Error::Domain(format!("sigma lower bound {} below {MIN_SIGMA}", sigma_range.0)));
        }
        if mu_range.0 > mu_range.1 || sigma_range.0 > sigma_range.1 {
            return Err(Error::Domain("empty parameter box".into()));
        }
        Ok(Self { domain: [mu_range, sigma_range] })
    }
}

impl Default for GaussianFamily {
    fn default() -> Self {
        Self { domain: [(-2.0, 2.0), (0.6, 1.6)] }
    }
}

impl ModelFamily for GaussianFamily {
    fn name(&self) -> &str {
        "gaussian"
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn data_dim(&self) -> usize {
        1
    }
    fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    fn check_param(&self, theta: &ParamVector) -> Result<()> {
        check_len(self, theta)?;
        if !(theta.0[1] >= MIN_SIGMA) {
            return Err(Error::Domain(format!("sigma = {} is below {MIN_SIGMA}", theta.0[1])));
        }
        Ok(())
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &ParamVector) -> f64 {
        let (mu, sigma) = (theta.0[0], theta.0[1]);
        let z = (x[0] - mu) / sigma;
        -sigma.ln() - HALF_LN_2PI - 0.5 * z * z
    }

    fn draw(&self, theta: &ParamVector, rng: &mut rng::StreamRng, out: &mut [f64]) {
        let normal = Normal::new(theta.0[0], theta.0[1]).expect("validated sigma");
        out[0] = normal.sample(rng);
    }
}

/// `Cauchy(theta, 1)` location family.
#[derive(Debug, Clone)]
pub struct CauchyFamily {
    domain: [(f64, f64); 1],
}

impl CauchyFamily {
    pub fn new(range: (f64, f64)) -> Result<Self> {
        if range.0 > range.1 {
            return Err(Error::Domain("empty parameter range".into()));
        }
        Ok(Self { domain: [range] })
    }
}

impl Default for CauchyFamily {
    fn default() -> Self {
        Self { domain: [(-3.0, 3.0)] }
    }
}

impl ModelFamily for CauchyFamily {
    fn name(&self) -> &str {
        "cauchy"
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn data_dim(&self) -> usize {
        1
    }
    fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }
    fn check_param(&self, theta: &ParamVector) -> Result<()> {
        check_len(self, theta)
    }
    fn log_density_unchecked(&self, x: &[f64], theta: &ParamVector) -> f64 {
        cauchy_log_density(x[0], theta.0[0])
    }
    fn draw(&self, theta: &ParamVector, rng: &mut rng::StreamRng, out: &mut [f64]) {
        out[0] = Cauchy::new(theta.0[0], 1.0).expect("unit scale").sample(rng);
    }
}

/// Mixture weights of the three-component mixture.
pub const GMM_WEIGHTS: [f64; 3] = [0.4, 0.35, 0.25];
pub const GMM_DIM: usize = 10;

/// Gaussian mixture in `R^d` with identity covariances and fixed weights.
/// The parameter vector is the row-major `K x d` matrix of component means.
#[derive(Debug, Clone)]
pub struct GmmFamily {
    log_weights: Vec<f64>,
    cumulative: Vec<f64>,
    dim: usize,
    domain: Vec<(f64, f64)>,
}

impl GmmFamily {
    pub fn new(weights: &[f64], dim: usize, mean_bound: f64) -> Result<Self> {
        if weights.is_empty() || dim == 0 {
            return Err(Error::Shape("mixture needs at least one component and dimension".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("mixture weights {weights:?} must be positive and sum to 1")));
        }
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            cumulative,
            dim,
            domain: vec![(-mean_bound, mean_bound); weights.len() * dim],
        })
    }

    pub fn components(&self) -> usize {
        self.log_weights.len()
    }

    fn log_density_with(&self, x: &[f64], means: &[f64]) -> f64 {
        let norm = self.dim as f64 * HALF_LN_2PI;
        let mut terms = [0.0f64; 8];
        let mut heap;
        let terms: &mut [f64] = if self.components() <= terms.len() {
            &mut terms[..self.components()]
        } else {
            heap = vec![0.0; self.components()];
            &mut heap
        };
        for (k, t) in terms.iter_mut().enumerate() {
            let mu = &means[k * self.dim..(k + 1) * self.dim];
            let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            *t = self.log_weights[k] - norm - 0.5 * sq;
        }
        log_sum_exp(terms)
    }
}

impl Default for GmmFamily {
    fn default() -> Self {
        Self::new(&GMM_WEIGHTS, GMM_DIM, 10.0).expect("static mixture is valid")
    }
}

impl ModelFamily for GmmFamily {
    fn name(&self) -> &str {
        "gmm"
    }
    fn param_dim(&self) -> usize {
        self.log_weights.len() * self.dim
    }
    fn data_dim(&self) -> usize {
        self.dim
    }
    fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }
    fn check_param(&self, theta: &ParamVector) -> Result<()> {
        check_len(self, theta)
    }
    fn log_density_unchecked(&self, x: &[f64], theta: &ParamVector) -> f64 {
        self.log_density_with(x, &theta.0)
    }
    fn draw(&self, theta: &ParamVector, rng: &mut rng::StreamRng, out: &mut [f64]) {
        let u: f64 = rng.random();
        let k = self.cumulative.iter().position(|c| u < *c).unwrap_or(self.components() - 1);
        let mu = &theta.0[k * self.dim..(k + 1) * self.dim];
        for (o, m) in out.iter_mut().zip(mu) {
            let z: f64 = StandardNormal.sample(rng);
            *o = m + z;
        }
    }
}

/// Log-density of the fixed-weight, identity-covariance mixture in `R^10`.
/// `means` is the row-major `3 x 10` matrix of component means.
pub fn gmm_log_density(x: &[f64], means: &[f64]) -> Result<f64> {
    if x.len() != GMM_DIM || means.len() != GMM_WEIGHTS.len() * GMM_DIM {
        return Err(Error::Shape(format!(
            "gmm: x has {} coordinates and means {}, expected {GMM_DIM} and {}",
            x.len(),
            means.len(),
            GMM_WEIGHTS.len() * GMM_DIM
        )));
    }
    Ok(GmmFamily::default().log_density_with(x, means))
}

/// Closed-form Gaussian MLE `(mean, sqrt(biased variance))`.
pub fn gaussian_mle(data: &Dataset) -> Result<ParamVector> {
    if data.dim() != 1 {
        return Err(Error::Shape(format!("gaussian_mle needs 1-d data, got {}", data.dim())));
    }
    let n = data.n();
    if n < 2 {
        return Err(Error::Degenerate(format!("gaussian_mle needs n >= 2, got {n}")));
    }
    let xs = data.values();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    if !(sigma >= MIN_SIGMA) {
        return Err(Error::Degenerate(format!("sample standard deviation {sigma} below {MIN_SIGMA}")));
    }
    Ok(ParamVector(vec![mean, sigma]))
}

/// Gaussian linear-regression log-likelihood
/// `-(n/2) log(2 pi sigma2) - |y - X beta|^2 / (2 sigma2)`.
pub fn linreg_log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, sigma2: f64) -> Result<f64> {
    if x.nrows() != y.len() || x.ncols() != beta.len() {
        return Err(Error::Shape(format!("design {}x{}, response {}, coefficients {}", x.nrows(), x.ncols(), y.len(), beta.len())));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 = {sigma2} must be positive")));
    }
    let resid = y - x * beta;
    let n = y.len() as f64;
    Ok(-0.5 * n * (2.0 * PI * sigma2).ln() - resid.norm_squared() / (2.0 * sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_density_values() {
        assert!(close(gaussian_log_density(0.0, 0.0, 1.0).unwrap(), -0.918_938_533_204_672_7, 1e-15));
        assert!(close(gaussian_log_density(2.0, 2.0, 3.0).unwrap(), -2.017_550_821_872_782, 1e-14));
        assert!(close(gaussian_log_density(1.0, 0.0, 2.0).unwrap(), -1.737_085_713_764_617_8, 1e-14));
        assert!(matches!(gaussian_log_density(0.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(gaussian_log_density(0.0, 0.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(gaussian_log_density(0.0, 0.0, 5e-7), Err(Error::Domain(_))));
    }

    #[test]
    fn cauchy_density_values() {
        assert!(close(cauchy_log_density(0.0, 0.0), -PI.ln(), 1e-15));
        assert!(close(cauchy_log_density(1.0, 0.0), -1.837_877_066_409_345_3, 1e-14));
        for theta in [-2.5, 0.0, 1.7] {
            assert!(close(cauchy_log_density(theta + 3.0, theta), -3.447_314_978_843_446, 1e-13));
        }
    }

    #[test]
    fn gmm_identical_components_reduce_to_one_gaussian() {
        let means = vec![0.5; 30];
        let x = vec![0.5; 10];
        assert!(close(gmm_log_density(&x, &means).unwrap(), -5.0 * (2.0 * PI).ln(), 1e-12));
    }

    #[test]
    fn gmm_far_component_dominates() {
        // x sits on component 2; the others are 40 units away
        let mut means = vec![40.0; 30];
        for v in &mut means[10..20] {
            *v = 0.0;
        }
        let x = vec![0.0; 10];
        let expected = 0.35f64.ln() - 5.0 * (2.0 * PI).ln();
        assert!(close(gmm_log_density(&x, &means).unwrap(), expected, 1e-9));
    }

    #[test]
    fn gmm_rejects_bad_shapes() {
        assert!(matches!(gmm_log_density(&[0.0; 9], &[0.0; 30]), Err(Error::Shape(_))));
        assert!(matches!(gmm_log_density(&[0.0; 10], &[0.0; 20]), Err(Error::Shape(_))));
    }

    #[test]
    fn gaussian_log_likelihood_two_points() {
        let fam = GaussianFamily::default();
        let data = Dataset::from_column(vec![0.0, 2.0]).unwrap();
        let ll = log_likelihood(&fam, &data, &ParamVector(vec![1.0, 1.0])).unwrap();
        assert!(close(ll, 2.0 * -1.418_938_533_204_672_7, 1e-14));
    }

    #[test]
    fn log_likelihood_single_row_and_duplication() {
        let fam = CauchyFamily::default();
        let theta = ParamVector(vec![0.4]);
        let one = Dataset::from_column(vec![1.3]).unwrap();
        assert_eq!(log_likelihood(&fam, &one, &theta).unwrap(), fam.log_density(&[1.3], &theta).unwrap());
        let d = sample(&fam, &theta, 50, 3).unwrap();
        let twice = d.concat(&d).unwrap();
        let a = log_likelihood(&fam, &d, &theta).unwrap();
        let b = log_likelihood(&fam, &twice, &theta).unwrap();
        assert!(close(b, 2.0 * a, 1e-10 * a.abs()));
    }

    #[test]
    fn sampling_is_deterministic() {
        let fam = GmmFamily::default();
        let theta = ParamVector(vec![0.0; 30]);
        assert_eq!(sample(&fam, &theta, 20, 9).unwrap(), sample(&fam, &theta, 20, 9).unwrap());
        assert_ne!(sample(&fam, &theta, 20, 9).unwrap(), sample(&fam, &theta, 20, 10).unwrap());
    }

    #[test]
    fn gaussian_sample_mean_and_cauchy_median() {
        let g = sample(&GaussianFamily::default(), &ParamVector(vec![0.0, 1.0]), 100_000, 1).unwrap();
        let mean = g.values().iter().sum::<f64>() / 1e5;
        assert!(mean.abs() < 0.02, "{mean}");

        let c = sample(&CauchyFamily::default(), &ParamVector(vec![5.0]), 100_000, 2).unwrap();
        let mut v = c.values().to_vec();
        v.sort_by(f64::total_cmp);
        let median = 0.5 * (v[49_999] + v[50_000]);
        assert!((median - 5.0).abs() < 0.05, "{median}");
    }

    #[test]
    fn gaussian_mle_values_and_errors() {
        let mle = gaussian_mle(&Dataset::from_column(vec![0.0, 2.0]).unwrap()).unwrap();
        assert_eq!(mle.0, vec![1.0, 1.0]);
        assert!(matches!(gaussian_mle(&Dataset::from_column(vec![3.0; 5]).unwrap()), Err(Error::Degenerate(_))));
        assert!(matches!(gaussian_mle(&Dataset::from_column(vec![3.0]).unwrap()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn linreg_values() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let beta = DVector::from_vec(vec![0.5, -1.0]);
        let y = &x * &beta;
        let ll = linreg_log_likelihood(&x, &y, &beta, 1.0).unwrap();
        assert!(close(ll, -1.5 * (2.0 * PI).ln(), 1e-12));

        let x1 = DMatrix::from_row_slice(1, 1, &[1.0]);
        let ll1 = linreg_log_likelihood(&x1, &DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![0.0]), 1.0).unwrap();
        assert!(close(ll1, -1.418_938_533_204_672_7, 1e-14));

        assert!(matches!(linreg_log_likelihood(&x, &y, &DVector::from_vec(vec![1.0]), 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn linreg_equals_gaussian_likelihood_of_residuals() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, 1.0, -1.2, 1.0, 2.2, 1.0, 0.0]);
        let beta = DVector::from_vec(vec![0.1, 0.7]);
        let y = DVector::from_vec(vec![0.4, -0.9, 2.0, 0.3]);
        let resid: Vec<f64> = (&y - &x * &beta).iter().copied().collect();
        let data = Dataset::from_column(resid).unwrap();
        let via_gauss = log_likelihood(&GaussianFamily::default(), &data, &ParamVector(vec![0.0, 1.5f64.sqrt()])).unwrap();
        let direct = linreg_log_likelihood(&x, &y, &beta, 1.5).unwrap();
        assert!(close(via_gauss, direct, 1e-12));
    }

    #[test]
    fn dataset_rejects_bad_input() {
        assert!(matches!(Dataset::new(vec![], 1, 0), Err(Error::Empty(_))));
        assert!(matches!(Dataset::new(vec![1.0, 2.0, 3.0], 2, 0), Err(Error::Shape(_))));
        assert!(matches!(Dataset::new(vec![f64::NAN], 1, 0), Err(Error::Domain(_))));
    }
}
