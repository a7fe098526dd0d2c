//! Multi-site clinical-trial simulator.
//!
//! Each site holds an `n x 4` design (intercept, binary treatment, two
//! covariates) and continuous outcomes. Sites share additive summaries of
//! three sizes; the central node aggregates them and tests `beta_treat = 0`.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_path, stream};
use crate::stats::{format_float, two_sided_normal_p, wilson_interval, Z_975};

pub const P: usize = 4;
pub const INTERCEPT: f64 = 0.5;
pub const COVARIATE_COEFS: [f64; 2] = [0.3, -0.2];

#[derive(Debug, Clone, PartialEq)]
pub struct SiteData {
    /// Row-major `n x 4`: intercept, treatment, covariate 1, covariate 2.
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SiteData {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() * P {
            return Err(Error::Shape(format!("{} design entries for {} outcomes", x.len(), y.len())));
        }
        for (i, row) in x.chunks_exact(P).enumerate() {
            if row[0] != 1.0 {
                return Err(Error::Domain(format!("row {i}: intercept column must be 1")));
            }
            if row[1] != 0.0 && row[1] != 1.0 {
                return Err(Error::Domain(format!("row {i}: treatment must be 0 or 1")));
            }
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Domain("site data must be finite".into()));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * P..(i + 1) * P]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), P, &self.x)
    }

    pub fn concat(parts: &[SiteData]) -> SiteData {
        SiteData {
            x: parts.iter().flat_map(|s| s.x.iter().copied()).collect(),
            y: parts.iter().flat_map(|s| s.y.iter().copied()).collect(),
        }
    }
}

/// Draws one site: treatment ~ Bernoulli(0.5), covariates ~ N(0, 1),
/// `y = 0.5 + beta_treat t + 0.3 c1 - 0.2 c2 + N(0, sigma^2)`.
pub fn simulate_site(beta_treat: f64, n: usize, sigma: f64, seed: u64) -> Result<SiteData> {
    if n < 8 {
        return Err(Error::Domain(format!("a site needs at least 8 patients, got {n}")));
    }
    if !(sigma >= 0.0) || !beta_treat.is_finite() {
        return Err(Error::Domain(format!("invalid sigma {sigma} or effect {beta_treat}")));
    }
    let mut r = stream(seed);
    let mut x = Vec::with_capacity(n * P);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let t = if r.random_bool(0.5) { 1.0 } else { 0.0 };
        let c1: f64 = StandardNormal.sample(&mut r);
        let c2: f64 = StandardNormal.sample(&mut r);
        let e: f64 = StandardNormal.sample(&mut r);
        x.extend_from_slice(&[1.0, t, c1, c2]);
        y.push(INTERCEPT + beta_treat * t + COVARIATE_COEFS[0] * c1 + COVARIATE_COEFS[1] * c2 + sigma * e);
    }
    Ok(SiteData { x, y })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryLevel {
    Full16,
    Mid12,
    Treat8,
}

impl SummaryLevel {
    pub fn payload_len(self) -> usize {
        match self {
            SummaryLevel::Full16 => 16,
            SummaryLevel::Mid12 => 12,
            SummaryLevel::Treat8 => 8,
        }
    }
}

/// Additive per-site statistics.
///
/// * full16: `[n, y'y, X'y (4), upper triangle of X'X row by row (10)]`
/// * treat8: `[n, sum y, y'y, y'x_t, X'X treatment row (4)]`
/// * mid12: treat8 then `[sum c1, sum c2, sum c1^2, sum c2^2]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSummary {
    level: SummaryLevel,
    payload: Vec<f64>,
}

impl SiteSummary {
    /// Decodes a received payload, rejecting anything no dataset could produce.
    pub fn from_payload(level: SummaryLevel, payload: Vec<f64>) -> Result<Self> {
        if payload.len() != level.payload_len() {
            return Err(Error::Shape(format!("{:?} payload needs {} numbers, got {}", level, level.payload_len(), payload.len())));
        }
        if let Some(i) = payload.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("payload entry {i} is not finite")));
        }
        let n = payload[0];
        if !(n >= 1.0) || n.fract() != 0.0 || n > 2f64.powi(53) {
            return Err(Error::Domain(format!("patient count {n} is not a positive integer")));
        }
        // squared sums and the treatment count must be consistent with n
        let (yty, treated, squares): (f64, f64, &[usize]) = match level {
            SummaryLevel::Full16 => (payload[1], payload[7], &[10, 13, 15]),
            SummaryLevel::Treat8 => (payload[2], payload[4], &[5]),
            SummaryLevel::Mid12 => (payload[2], payload[4], &[5, 10, 11]),
        };
        if yty < 0.0 || squares.iter().any(|&i| payload[i] < 0.0) {
            return Err(Error::Domain("sums of squares must be non-negative".into()));
        }
        if !(0.0..=n).contains(&treated) {
            return Err(Error::Domain(format!("treated count {treated} outside [0, {n}]")));
        }
        if level == SummaryLevel::Full16 && payload[6] != n {
            return Err(Error::Domain("intercept cross-product must equal n".into()));
        }
        Ok(Self { level, payload })
    }

    pub fn level(&self) -> SummaryLevel {
        self.level
    }

    pub fn n(&self) -> usize {
        self.payload[0] as usize
    }

    pub fn payload(&self) -> &[f64] {
        &self.payload
    }
}

pub fn summarize_site(data: &SiteData, level: SummaryLevel) -> SiteSummary {
    let n = data.n() as f64;
    let mut xty = [0.0; P];
    let mut xtx = [[0.0; P]; P];
    let mut yty = 0.0;
    for (i, &y) in data.y.iter().enumerate() {
        let row = data.row(i);
        yty += y * y;
        for a in 0..P {
            xty[a] += row[a] * y;
            for b in a..P {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    let t_row = [xtx[0][1], xtx[1][1], xtx[1][2], xtx[1][3]];
    let payload = match level {
        SummaryLevel::Full16 => {
            let mut p = vec![n, yty];
            p.extend_from_slice(&xty);
            for a in 0..P {
                p.extend_from_slice(&xtx[a][a..]);
            }
            p
        }
        SummaryLevel::Treat8 | SummaryLevel::Mid12 => {
            let mut p = vec![n, xty[0], yty, xty[1]];
            p.extend_from_slice(&t_row);
            if level == SummaryLevel::Mid12 {
                p.extend_from_slice(&[xtx[0][2], xtx[0][3], xtx[2][2], xtx[3][3]]);
            }
            p
        }
    };
    SiteSummary { level, payload }
}

/// Coordinate-wise sum of same-level summaries.
pub fn aggregate_summaries(summaries: &[SiteSummary]) -> Result<SiteSummary> {
    let first = summaries.first().ok_or_else(|| Error::Empty("no summaries to aggregate".into()))?;
    let mut payload = vec![0.0; first.payload.len()];
    for s in summaries {
        if s.level != first.level {
            return Err(Error::Domain(format!("cannot aggregate {:?} with {:?}", first.level, s.level)));
        }
        for (acc, v) in payload.iter_mut().zip(&s.payload) {
            *acc += v;
        }
    }
    Ok(SiteSummary { level: first.level, payload })
}

/// Wald test of `beta_treat = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub beta_hat: f64,
    pub se: f64,
    pub p_value: f64,
}

impl Inference {
    fn wald(beta_hat: f64, se: f64) -> Result<Self> {
        if !(se > 0.0) || !se.is_finite() || !beta_hat.is_finite() {
            return Err(Error::Degenerate(format!("standard error {se} for estimate {beta_hat}")));
        }
        Ok(Self { beta_hat, se, p_value: two_sided_normal_p(beta_hat / se) })
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn invert(xtx: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    xtx.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular("X'X is not positive definite".into()))
}

/// OLS on the stacked patient data with `sigma^2 = RSS / (n - p)`.
pub fn pooled_inference(sites: &[SiteData]) -> Result<Inference> {
    let all = SiteData::concat(sites);
    if all.n() <= P {
        return Err(Error::Degenerate(format!("{} patients for {P} coefficients", all.n())));
    }
    let x = all.design();
    let y = DVector::from_column_slice(&all.y);
    let inv = invert(&(x.transpose() * &x))?;
    let beta = &inv * (x.transpose() * &y);
    let resid = &y - &x * &beta;
    let sigma2 = resid.norm_squared() / (all.n() - P) as f64;
    Inference::wald(beta[1], (sigma2 * inv[(1, 1)]).sqrt())
}

/// The same estimator as [`pooled_inference`], from `(n, y'y, X'y, X'X)` only.
pub fn summary_inference(agg: &SiteSummary) -> Result<Inference> {
    if agg.level != SummaryLevel::Full16 {
        return Err(Error::Domain(format!("summary inference needs full16, got {:?}", agg.level)));
    }
    let p = &agg.payload;
    let n = p[0];
    if n <= P as f64 {
        return Err(Error::Degenerate(format!("{n} patients for {P} coefficients")));
    }
    let xty = Vector4::new(p[2], p[3], p[4], p[5]);
    let mut xtx = Matrix4::zeros();
    let mut k = 6;
    for a in 0..P {
        for b in a..P {
            xtx[(a, b)] = p[k];
            xtx[(b, a)] = p[k];
            k += 1;
        }
    }
    let inv = xtx.cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular("aggregated X'X is not positive definite".into()))?;
    let beta = inv * xty;
    let rss = (p[1] - beta.dot(&xty)).max(0.0);
    let sigma2 = rss / (n - P as f64);
    Inference::wald(beta[1], (sigma2 * inv[(1, 1)]).sqrt())
}

/// Intercept-plus-treatment regression from treat8 moments. For mid12 the
/// variance is multiplied by `1 - R^2` of treatment on the covariates,
/// computed from the stored moments as if the covariates were uncorrelated.
pub fn compressed_inference(agg: &SiteSummary) -> Result<Inference> {
    if agg.level == SummaryLevel::Full16 {
        return Err(Error::Domain("compressed inference needs treat8 or mid12".into()));
    }
    let p = &agg.payload;
    let (n, sy, yty, yxt) = (p[0], p[1], p[2], p[3]);
    let (st, stt) = (p[4], p[5]);
    if n <= 2.0 {
        return Err(Error::Degenerate(format!("{n} patients for 2 coefficients")));
    }
    let tbar = st / n;
    let sxx = stt - n * tbar * tbar;
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("treatment has zero variance".into()));
    }
    let sxy = yxt - sy * tbar;
    let beta = sxy / sxx;
    let syy = yty - sy * sy / n;
    let sigma2 = ((syy - beta * sxy) / (n - 2.0)).max(0.0);
    let mut var = sigma2 / sxx;
    if agg.level == SummaryLevel::Mid12 {
        let mut r2 = 0.0;
        for (cross, sum, sq) in [(p[6], p[8], p[10]), (p[7], p[9], p[11])] {
            let scc = sq - sum * sum / n;
            if scc > 0.0 {
                let stc = cross - st * sum / n;
                r2 += stc * stc / (scc * sxx);
            }
        }
        var *= 1.0 - r2.min(1.0);
    }
    Inference::wald(beta, var.sqrt())
}

/// Fixed-effect inverse-variance-weighted combination of per-site OLS fits.
pub fn meta_analysis(sites: &[SiteData]) -> Result<Inference> {
    if sites.is_empty() {
        return Err(Error::Empty("no sites".into()));
    }
    let mut w_sum = 0.0;
    let mut wb_sum = 0.0;
    for s in sites {
        let fit = pooled_inference(std::slice::from_ref(s))?;
        let w = 1.0 / (fit.se * fit.se);
        w_sum += w;
        wb_sum += w * fit.beta_hat;
    }
    Inference::wald(wb_sum / w_sum, w_sum.powf(-0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pooled,
    Full16,
    Mid12,
    Treat8,
    Meta,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Pooled, Method::Full16, Method::Mid12, Method::Treat8, Method::Meta];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pooled => "pooled",
            Method::Full16 => "full16",
            Method::Mid12 => "mid12",
            Method::Treat8 => "treat8",
            Method::Meta => "meta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub sites: usize,
    pub n_per_site: usize,
    pub beta_grid: Vec<f64>,
    pub sigma: f64,
    pub n_sims: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { sites: 5, n_per_site: 200, beta_grid: vec![0.0, 0.1, 0.2, 0.3], sigma: 1.0, n_sims: 500, alpha: 0.05, seed: 0 }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(Error::Config("n_sims must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.sites == 0 || self.n_per_site < 8 {
            return Err(Error::Config("need at least one site of 8 or more patients".into()));
        }
        if self.beta_grid.is_empty() || self.beta_grid.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta_grid must be a non-empty list of finite values".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("invalid sigma {}", self.sigma)));
        }
        Ok(())
    }

    /// Seed of one site in one simulation. Independent of the effect size,
    /// so every beta reuses the same patients and noise.
    pub fn site_seed(&self, sim: usize, site: usize) -> u64 {
        derive_path(self.seed, &[sim as u64, site as u64])
    }
}

/// Runs every method on one simulated trial.
pub fn run_trial(config: &TrialConfig, beta: f64, sim: usize) -> Result<[Inference; 5]> {
    let sites = (0..config.sites)
        .map(|k| simulate_site(beta, config.n_per_site, config.sigma, config.site_seed(sim, k)))
        .collect::<Result<Vec<_>>>()?;
    let agg = |level| aggregate_summaries(&sites.iter().map(|s| summarize_site(s, level)).collect::<Vec<_>>());
    Ok([
        pooled_inference(&sites)?,
        summary_inference(&agg(SummaryLevel::Full16)?)?,
        compressed_inference(&agg(SummaryLevel::Mid12)?)?,
        compressed_inference(&agg(SummaryLevel::Treat8)?)?,
        meta_analysis(&sites)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub beta: f64,
    pub method: Method,
    pub rejections: usize,
    pub n_sims: usize,
    pub power: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub rows: Vec<PowerRow>,
    /// `rejections[b][s][m]`: whether method `m` rejected in simulation `s` at `beta_grid[b]`.
    #[serde(skip)]
    pub rejections: Vec<Vec<[bool; 5]>>,
}

impl PowerCurve {
    pub const CSV_HEADER: &'static str = "beta,method,rejections,n_sims,power,ci_lo,ci_hi";

    pub fn row(&self, beta: f64, method: Method) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.beta == beta && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                format_float(r.beta),
                r.method.name(),
                r.rejections,
                r.n_sims,
                format_float(r.power),
                format_float(r.ci_lo),
                format_float(r.ci_hi)
            ));
        }
        out
    }
}

/// Rejection rates of every method over a paired Monte-Carlo design.
pub fn power_curve(config: &TrialConfig) -> Result<PowerCurve> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut rejections = Vec::new();
    for &beta in &config.beta_grid {
        let sims = (0..config.n_sims)
            .into_par_iter()
            .map(|s| run_trial(config, beta, s).map(|res| res.map(|r| r.rejects(config.alpha))))
            .collect::<Result<Vec<_>>>()?;
        for (m, method) in Method::ALL.into_iter().enumerate() {
            let count = sims.iter().filter(|r| r[m]).count();
            let (ci_lo, ci_hi) = wilson_interval(count, config.n_sims, Z_975);
            rows.push(PowerRow {
                beta,
                method,
                rejections: count,
                n_sims: config.n_sims,
                power: count as f64 / config.n_sims as f64,
                ci_lo,
                ci_hi,
            });
        }
        rejections.push(sims);
    }
    Ok(PowerCurve { rows, rejections })
}
