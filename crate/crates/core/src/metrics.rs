//! Auditing an encoder/decoder pair on a parameter grid.
//!
//! All suprema over parameter space are maxima over a [`ThetaGrid`]. The
//! exact log-likelihood and the decoded surrogate are evaluated once per grid
//! point into a [`LikelihoodProfile`]; every metric below is a pure function
//! of that profile, so the bound checks compare quantities computed from the
//! same numbers.
//!
//! Bound cascade checked at runtime, each with [`BOUND_SLACK`]:
//!
//! * ratio distortion `delta <= 2 n eps`
//! * likelihood-ratio statistic gap `<= 4 delta`
//! * AIC and BIC gaps `<= 6 n eps`
//! * log Bayes factor gap `<= 2 n eps`

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::models::{log_likelihood, Dataset, ModelFamily, ParamVector};
use crate::stats::{format_float, log_mean_exp};

/// Absolute slack used when checking theorem bounds.
pub const BOUND_SLACK: f64 = 1e-9;

/// Finite set of parameter values standing in for the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub points: Vec<ParamVector>,
    pub description: String,
}

impl ThetaGrid {
    pub fn new(points: Vec<ParamVector>, description: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("theta grid has no points".into()));
        }
        let p = points[0].len();
        if points.iter().any(|t| t.len() != p) {
            return Err(Error::Shape("theta grid points have differing dimensions".into()));
        }
        Ok(Self { points, description: description.into() })
    }

    /// Cartesian product of evenly spaced axes; the last axis varies fastest.
    pub fn axes(ranges: &[(f64, f64)], resolution: &[usize]) -> Result<Self> {
        if ranges.len() != resolution.len() || ranges.is_empty() {
            return Err(Error::Shape("one resolution per axis range is required".into()));
        }
        let axes: Vec<Vec<f64>> = ranges
            .iter()
            .zip(resolution)
            .map(|(&(lo, hi), &k)| match k {
                0 => Vec::new(),
                1 => vec![0.5 * (lo + hi)],
                _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        let description = ranges.iter().zip(resolution).map(|((lo, hi), k)| format!("[{lo},{hi}]x{k}")).collect::<Vec<_>>().join(" * ");
        Self::new(points.into_iter().map(ParamVector).collect(), description)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of `theta` in the grid (coordinates equal to within 1e-12).
    pub fn index_of(&self, theta: &ParamVector) -> Option<usize> {
        self.points.iter().position(|p| p.len() == theta.len() && p.0.iter().zip(&theta.0).all(|(a, b)| (a - b).abs() <= 1e-12))
    }

    /// The grid with `theta` appended if not already present, and its index.
    pub fn with_point(mut self, theta: &ParamVector) -> (Self, usize) {
        match self.index_of(theta) {
            Some(i) => (self, i),
            None => {
                self.points.push(theta.clone());
                self.description.push_str(" + theta0");
                let i = self.points.len() - 1;
                (self, i)
            }
        }
    }

    pub fn check_domain(&self, family: &dyn ModelFamily) -> Result<()> {
        match self.points.iter().position(|t| !family.in_domain(t)) {
            None => Ok(()),
            Some(i) => Err(Error::Domain(format!("grid point {i} {:?} outside the {} domain", self.points[i].0, family.name()))),
        }
    }
}

/// Exact and surrogate log-likelihood over a grid for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodProfile {
    /// `L_n(theta_g)`.
    pub log_lik: Vec<f64>,
    /// `h(theta_g, S)`.
    pub decoded: Vec<f64>,
    pub n: usize,
}

impl LikelihoodProfile {
    pub fn surrogate(&self, g: usize) -> f64 {
        self.n as f64 * self.decoded[g]
    }

    fn surrogates(&self) -> Vec<f64> {
        (0..self.decoded.len()).map(|g| self.surrogate(g)).collect()
    }

    /// Maximum per-sample reconstruction error and where it is attained.
    pub fn epsilon(&self) -> (f64, usize) {
        let n = self.n as f64;
        argmax(self.log_lik.iter().zip(&self.decoded).map(|(l, h)| (l / n - h).abs()))
    }

    /// Range of `L_n - L~_n` over the grid with (argmax, argmin) indices.
    pub fn delta(&self) -> (f64, usize, usize) {
        let diff: Vec<f64> = (0..self.log_lik.len()).map(|g| self.log_lik[g] - self.surrogate(g)).collect();
        let (hi, ihi) = argmax(diff.iter().copied());
        let (lo, ilo) = argmax(diff.iter().map(|d| -d));
        (hi + lo, ihi, ilo)
    }

    pub fn lrt(&self, theta0: usize) -> LrtStatistics {
        let (max_l, _) = argmax(self.log_lik.iter().copied());
        let surr = self.surrogates();
        let (max_s, _) = argmax(surr.iter().copied());
        let lambda = 2.0 * (max_l - self.log_lik[theta0]);
        let lambda_tilde = 2.0 * (max_s - surr[theta0]);
        LrtStatistics { lambda, lambda_tilde, gap: (lambda_tilde - lambda).abs() }
    }

    /// Grid indices of the exact and surrogate maximisers.
    pub fn maximisers(&self) -> (usize, usize) {
        (argmax(self.log_lik.iter().copied()).1, argmax(self.surrogates().into_iter()).1)
    }

    pub fn aic_bic_gaps(&self, _k: usize) -> (f64, f64) {
        // the penalty terms are shared, so both gaps are twice the gap in maximised log-likelihood
        let (max_l, _) = argmax(self.log_lik.iter().copied());
        let (max_s, _) = argmax(self.surrogates().into_iter());
        let gap = 2.0 * (max_s - max_l).abs();
        (gap, gap)
    }

    /// Log Bayes factor of a uniform prior over `alt` against one over `null`
    /// (both as grid index sets), exact and surrogate.
    pub fn log_bayes_factor(&self, null: &[usize], alt: &[usize]) -> (f64, f64) {
        let pick = |v: &dyn Fn(usize) -> f64, idx: &[usize]| idx.iter().map(|&g| v(g)).collect::<Vec<f64>>();
        let exact = |g: usize| self.log_lik[g];
        let surr = |g: usize| self.surrogate(g);
        let bf = log_mean_exp(&pick(&exact, alt)) - log_mean_exp(&pick(&exact, null));
        let bf_tilde = log_mean_exp(&pick(&surr, alt)) - log_mean_exp(&pick(&surr, null));
        (bf, bf_tilde)
    }
}

/// Maximum and first index attaining it; NaN-free input is assumed.
fn argmax(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

/// Evaluates `L_n` and the decoder at every grid point. The embedding is
/// computed once.
pub fn profile(
    family: &dyn ModelFamily,
    data: &Dataset,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    grid: &ThetaGrid,
) -> Result<LikelihoodProfile> {
    let s = encoder.embed(data)?;
    let evals: Vec<Result<(f64, f64)>> = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(g, theta)| {
            let l = log_likelihood(family, data, theta)?;
            let h = decoder.decode(theta, &s)?;
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::NonFinite { index: g, theta: theta.0.clone() });
            }
            Ok((l, h))
        })
        .collect();
    let mut log_lik = Vec::with_capacity(grid.len());
    let mut decoded = Vec::with_capacity(grid.len());
    for e in evals {
        let (l, h) = e?;
        log_lik.push(l);
        decoded.push(h);
    }
    Ok(LikelihoodProfile { log_lik, decoded, n: data.n() })
}

/// `eps_n = max_g |(1/n) L_n(theta_g) - h(theta_g, S)|` and its maximiser.
pub fn pointwise_error(
    family: &dyn ModelFamily,
    data: &Dataset,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    grid: &ThetaGrid,
) -> Result<(f64, ParamVector)> {
    let prof = profile(family, data, encoder, decoder, grid)?;
    let (eps, g) = prof.epsilon();
    Ok((eps, grid.points[g].clone()))
}

/// `delta_n = max over pairs |(L(a) - L(b)) - (L~(a) - L~(b))|`, computed as
/// the range of `L - L~` over the grid, with the attaining pair.
pub fn ratio_distortion(
    family: &dyn ModelFamily,
    data: &Dataset,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    grid: &ThetaGrid,
) -> Result<(f64, (ParamVector, ParamVector))> {
    if grid.len() < 2 {
        return Err(Error::Empty("ratio distortion needs at least two grid points".into()));
    }
    let prof = profile(family, data, encoder, decoder, grid)?;
    let (delta, a, b) = prof.delta();
    Ok((delta, (grid.points[a].clone(), grid.points[b].clone())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtStatistics {
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub gap: f64,
}

/// Likelihood-ratio statistics `2 (max L - L(theta0))`, exact and surrogate.
pub fn lrt_statistics(
    family: &dyn ModelFamily,
    data: &Dataset,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    grid: &ThetaGrid,
    theta0: &ParamVector,
) -> Result<LrtStatistics> {
    let i0 = grid.index_of(theta0).ok_or_else(|| Error::Domain(format!("theta0 {:?} is not a grid point", theta0.0)))?;
    Ok(profile(family, data, encoder, decoder, grid)?.lrt(i0))
}

/// Euclidean distance between the grid maximisers of `L_n` and `L~_n`.
pub fn mle_gap(family: &dyn ModelFamily, data: &Dataset, encoder: &dyn Encoder, decoder: &dyn Decoder, grid: &ThetaGrid) -> Result<f64> {
    let (a, b) = profile(family, data, encoder, decoder, grid)?.maximisers();
    Ok(grid.points[a].distance(&grid.points[b]))
}

/// `(|AIC~ - AIC|, |BIC~ - BIC|)` with maximisers restricted to the grid.
pub fn aic_bic_report(
    family: &dyn ModelFamily,
    data: &Dataset,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    grid: &ThetaGrid,
    k: usize,
) -> Result<(f64, f64)> {
    Ok(profile(family, data, encoder, decoder, grid)?.aic_bic_gaps(k))
}

/// `|log BF~ - log BF|` for uniform discrete priors on `grid0` (null) and `grid1`.
pub fn log_bayes_factor_gap(
    family: &dyn ModelFamily,
    data: &Dataset,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    grid0: &ThetaGrid,
    grid1: &ThetaGrid,
) -> Result<f64> {
    let mut points = grid0.points.clone();
    points.extend(grid1.points.iter().cloned());
    let joint = ThetaGrid::new(points, "bayes factor union")?;
    let prof = profile(family, data, encoder, decoder, &joint)?;
    let null: Vec<usize> = (0..grid0.len()).collect();
    let alt: Vec<usize> = (grid0.len()..joint.len()).collect();
    let (bf, bf_tilde) = prof.log_bayes_factor(&null, &alt);
    Ok((bf_tilde - bf).abs())
}

/// Distortion bound `sqrt(eps) * G + 2 n L diam / G` for training on a
/// finite grid of `G` points with empirical ratio loss `eps` and an
/// `L`-Lipschitz log-likelihood.
pub fn grid_distortion_bound(eps_emp: f64, grid_size: usize, n: usize, lipschitz: f64, diam: f64) -> Result<f64> {
    check_bound_inputs(eps_emp, n, lipschitz, diam)?;
    if grid_size == 0 {
        return Err(Error::Domain("grid size must be positive".into()));
    }
    let g = grid_size as f64;
    Ok(eps_emp.sqrt() * g + 2.0 * n as f64 * lipschitz * diam / g)
}

/// Real-valued grid size minimising [`grid_distortion_bound`]:
/// `sqrt(2 n L diam / sqrt(eps))`. Infinite when `eps == 0`.
pub fn optimal_grid_size(eps_emp: f64, n: usize, lipschitz: f64, diam: f64) -> Result<f64> {
    check_bound_inputs(eps_emp, n, lipschitz, diam)?;
    Ok((2.0 * n as f64 * lipschitz * diam / eps_emp.sqrt()).sqrt())
}

fn check_bound_inputs(eps: f64, n: usize, lipschitz: f64, diam: f64) -> Result<()> {
    if !(eps >= 0.0) || n == 0 || !(lipschitz > 0.0) || !(diam > 0.0) {
        return Err(Error::Domain(format!("bound inputs must be positive (eps={eps}, n={n}, L={lipschitz}, diam={diam})")));
    }
    Ok(())
}

/// All audited quantities for one (family, encoder, decoder, grid, dataset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub epsilon_n: f64,
    pub delta_n: f64,
    pub bound_2n_eps: f64,
    pub tightness: Option<f64>,
    pub lrt_gap: f64,
    pub lrt_bound_4delta: f64,
    pub mle_gap_norm: f64,
    pub aic_gap: f64,
    pub bic_gap: f64,
    pub bound_6n_eps: f64,
    pub logbf_gap: f64,
    pub bound_2n_eps_bf: f64,
    pub grid: String,
    pub grid_size: usize,
    pub n: usize,
}

/// Builds a full report. The likelihood-ratio test and the Bayes factor use
/// `theta0 = grid.points[theta0_index]` as the point null, with a uniform
/// prior over the whole grid as the alternative.
pub fn distortion_report(
    family: &dyn ModelFamily,
    data: &Dataset,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    grid: &ThetaGrid,
    theta0_index: usize,
) -> Result<DistortionReport> {
    if grid.len() < 2 {
        return Err(Error::Empty("a report needs at least two grid points".into()));
    }
    if theta0_index >= grid.len() {
        return Err(Error::Domain(format!("theta0 index {theta0_index} outside grid of {}", grid.len())));
    }
    let prof = profile(family, data, encoder, decoder, grid)?;
    Ok(report_from_profile(&prof, grid, theta0_index, family.param_dim()))
}

pub fn report_from_profile(prof: &LikelihoodProfile, grid: &ThetaGrid, theta0_index: usize, k: usize) -> DistortionReport {
    let n = prof.n as f64;
    let (eps, _) = prof.epsilon();
    let (delta, _, _) = prof.delta();
    let lrt = prof.lrt(theta0_index);
    let (a, b) = prof.maximisers();
    let (aic_gap, bic_gap) = prof.aic_bic_gaps(k);
    let all: Vec<usize> = (0..grid.len()).collect();
    let (bf, bf_tilde) = prof.log_bayes_factor(&[theta0_index], &all);
    let bound = 2.0 * n * eps;
    DistortionReport {
        epsilon_n: eps,
        delta_n: delta,
        bound_2n_eps: bound,
        tightness: (eps > 0.0).then(|| delta / bound),
        lrt_gap: lrt.gap,
        lrt_bound_4delta: 4.0 * delta,
        mle_gap_norm: grid.points[a].distance(&grid.points[b]),
        aic_gap,
        bic_gap,
        bound_6n_eps: 6.0 * n * eps,
        logbf_gap: (bf_tilde - bf).abs(),
        bound_2n_eps_bf: bound,
        grid: grid.description.clone(),
        grid_size: grid.len(),
        n: prof.n,
    }
}

/// `delta_n <= 2 n eps_n` (with slack).
pub fn check_pointwise_to_ratio(report: &DistortionReport) -> bool {
    report.delta_n <= report.bound_2n_eps + BOUND_SLACK
}

/// Names of the cascade bounds a report violates; empty when all hold.
pub fn bound_violations(report: &DistortionReport) -> Vec<&'static str> {
    let mut out = Vec::new();
    if !check_pointwise_to_ratio(report) {
        out.push("delta <= 2 n eps");
    }
    if report.lrt_gap > report.lrt_bound_4delta + BOUND_SLACK {
        out.push("lrt gap <= 4 delta");
    }
    if report.aic_gap > report.bound_6n_eps + BOUND_SLACK {
        out.push("aic gap <= 6 n eps");
    }
    if report.bic_gap > report.bound_6n_eps + BOUND_SLACK {
        out.push("bic gap <= 6 n eps");
    }
    if report.logbf_gap > report.bound_2n_eps_bf + BOUND_SLACK {
        out.push("log bf gap <= 2 n eps");
    }
    out
}

impl DistortionReport {
    pub const CSV_HEADER: &'static str = "epsilon_n,delta_n,bound_2n_eps,tightness,lrt_gap,lrt_bound_4delta,mle_gap_norm,aic_gap,bic_gap,bound_6n_eps,logbf_gap,bound_2n_eps_bf,grid_size,n";

    pub fn to_csv_row(&self) -> String {
        let f = format_float;
        [
            f(self.epsilon_n),
            f(self.delta_n),
            f(self.bound_2n_eps),
            self.tightness.map(f).unwrap_or_default(),
            f(self.lrt_gap),
            f(self.lrt_bound_4delta),
            f(self.mle_gap_norm),
            f(self.aic_gap),
            f(self.bic_gap),
            f(self.bound_6n_eps),
            f(self.logbf_gap),
            f(self.bound_2n_eps_bf),
            self.grid_size.to_string(),
            self.n.to_string(),
        ]
        .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{
        cauchy_quantile_encoder, gaussian_moment_encoder, CauchyQuantileDecoder, GaussianAnalyticDecoder, OffsetDecoder,
    };
    use crate::models::{gaussian_mle, sample, CauchyFamily, GaussianFamily};

    fn gaussian_setup(seed: u64) -> (GaussianFamily, Dataset, ThetaGrid) {
        let fam = GaussianFamily::default();
        let data = sample(&fam, &ParamVector(vec![0.3, 1.2]), 100, seed).unwrap();
        let grid = ThetaGrid::axes(fam.domain(), &[41, 41]).unwrap();
        (fam, data, grid)
    }

    #[test]
    fn axes_grid_layout() {
        let g = ThetaGrid::axes(&[(0.0, 1.0), (2.0, 3.0)], &[2, 3]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.points[0].0, vec![0.0, 2.0]);
        assert_eq!(g.points[1].0, vec![0.0, 2.5]);
        assert_eq!(g.points[5].0, vec![1.0, 3.0]);
        assert!(ThetaGrid::new(vec![], "empty").is_err());
    }

    #[test]
    fn exact_gaussian_pair_has_no_error() {
        let (fam, data, grid) = gaussian_setup(4);
        let e = gaussian_moment_encoder(2).unwrap();
        let (eps, _) = pointwise_error(&fam, &data, &e, &GaussianAnalyticDecoder, &grid).unwrap();
        let (delta, _) = ratio_distortion(&fam, &data, &e, &GaussianAnalyticDecoder, &grid).unwrap();
        assert!(eps <= 1e-10, "{eps}");
        assert!(delta <= 1e-9, "{delta}");
        assert_eq!(mle_gap(&fam, &data, &e, &GaussianAnalyticDecoder, &grid).unwrap(), 0.0);
        let (aic, bic) = aic_bic_report(&fam, &data, &e, &GaussianAnalyticDecoder, &grid, 2).unwrap();
        assert!(aic <= 1e-8 && bic <= 1e-8);
        let lrt = lrt_statistics(&fam, &data, &e, &GaussianAnalyticDecoder, &grid, &grid.points[100]).unwrap();
        assert!(lrt.gap <= 1e-8);
    }

    #[test]
    fn constant_offset_changes_epsilon_not_delta() {
        let (fam, data, grid) = gaussian_setup(5);
        let e = gaussian_moment_encoder(1).unwrap();
        let base = profile(&fam, &data, &e, &GaussianAnalyticDecoder, &grid).unwrap();
        let shifted = profile(&fam, &data, &e, &OffsetDecoder { inner: GaussianAnalyticDecoder, offset: 0.75 }, &grid).unwrap();
        let (e0, e1) = (base.epsilon().0, shifted.epsilon().0);
        assert!((e1 - e0).abs() <= 0.75 + 1e-12);
        assert!((base.delta().0 - shifted.delta().0).abs() <= 1e-12 * base.delta().0.max(1.0));

        // exact decoder plus a constant: eps is exactly the constant, delta vanishes
        let e2 = gaussian_moment_encoder(2).unwrap();
        let c = 0.3;
        let off = OffsetDecoder { inner: GaussianAnalyticDecoder, offset: c };
        let (eps, _) = pointwise_error(&fam, &data, &e2, &off, &grid).unwrap();
        let (delta, _) = ratio_distortion(&fam, &data, &e2, &off, &grid).unwrap();
        assert!((eps - c).abs() < 1e-10);
        assert!(delta < 1e-9);
    }

    #[test]
    fn m1_report_satisfies_cascade_with_expected_tightness() {
        let (fam, data, grid) = gaussian_setup(6);
        let e = gaussian_moment_encoder(1).unwrap();
        let r = distortion_report(&fam, &data, &e, &GaussianAnalyticDecoder, &grid, 0).unwrap();
        assert!(check_pointwise_to_ratio(&r));
        assert!(bound_violations(&r).is_empty());
        // eps and delta are both driven by |v - 1| / (2 sigma^2) at the grid's sigma extremes
        let t = r.tightness.unwrap();
        assert!((t - 0.43).abs() < 0.01, "{t}");
    }

    #[test]
    fn zero_error_report_has_null_tightness() {
        let prof = LikelihoodProfile { log_lik: vec![-3.0, -4.0], decoded: vec![-1.5, -2.0], n: 2 };
        let grid = ThetaGrid::new(vec![ParamVector(vec![0.0]), ParamVector(vec![1.0])], "two").unwrap();
        let r = report_from_profile(&prof, &grid, 0, 1);
        assert_eq!(r.epsilon_n, 0.0);
        assert_eq!(r.tightness, None);
        assert!(check_pointwise_to_ratio(&r));
    }

    #[test]
    fn sign_flipped_decoder_still_satisfies_bound() {
        let (fam, data, grid) = gaussian_setup(7);
        let e = gaussian_moment_encoder(2).unwrap();
        let flipped = crate::embeddings::FnDecoder::new("neg", |t: &ParamVector, s: &crate::embeddings::DatasetEmbedding| {
            -GaussianAnalyticDecoder.decode(t, s).unwrap()
        });
        let r = distortion_report(&fam, &data, &e, &flipped, &grid, 3).unwrap();
        assert!(r.epsilon_n > 1.0);
        assert!(bound_violations(&r).is_empty(), "{r:?}");
    }

    #[test]
    fn range_identity_matches_pairwise_on_seven_points() {
        let fam = CauchyFamily::default();
        let data = sample(&fam, &ParamVector(vec![0.5]), 40, 11).unwrap();
        let grid =
            ThetaGrid::new([-2.9, -1.3, -0.2, 0.4, 1.1, 2.2, 2.95].iter().map(|v| ParamVector(vec![*v])).collect(), "seven").unwrap();
        let e = cauchy_quantile_encoder(3).unwrap();
        let prof = profile(&fam, &data, &e, &CauchyQuantileDecoder, &grid).unwrap();
        let mut brute: f64 = 0.0;
        for a in 0..7 {
            for b in a + 1..7 {
                let d = (prof.log_lik[a] - prof.log_lik[b]) - (prof.surrogate(a) - prof.surrogate(b));
                brute = brute.max(d.abs());
            }
        }
        assert!((prof.delta().0 - brute).abs() <= 1e-12 * brute.max(1.0));
    }

    #[test]
    fn lrt_requires_theta0_on_grid() {
        let (fam, data, grid) = gaussian_setup(8);
        let e = gaussian_moment_encoder(2).unwrap();
        let err = lrt_statistics(&fam, &data, &e, &GaussianAnalyticDecoder, &grid, &ParamVector(vec![0.123, 1.0]));
        assert!(err.is_err());
    }

    #[test]
    fn grid_argmax_within_one_cell_of_closed_form_mle() {
        let fam = GaussianFamily::default();
        let grid = ThetaGrid::axes(fam.domain(), &[41, 41]).unwrap();
        let e = gaussian_moment_encoder(2).unwrap();
        for seed in 0..10 {
            let data = sample(&fam, &ParamVector(vec![-0.4, 1.0]), 100, seed).unwrap();
            let mle = gaussian_mle(&data).unwrap();
            let prof = profile(&fam, &data, &e, &GaussianAnalyticDecoder, &grid).unwrap();
            let (_, b) = prof.maximisers();
            let t = &grid.points[b];
            assert!((t.0[0] - mle.0[0]).abs() <= 0.1 + 1e-12, "{t:?} vs {mle:?}");
            assert!((t.0[1] - mle.0[1]).abs() <= 0.025 + 1e-12, "{t:?} vs {mle:?}");
        }
    }

    #[test]
    fn bayes_factor_of_identical_hypotheses_is_zero() {
        let (fam, data, grid) = gaussian_setup(9);
        let e = gaussian_moment_encoder(1).unwrap();
        let gap = log_bayes_factor_gap(&fam, &data, &e, &GaussianAnalyticDecoder, &grid, &grid).unwrap();
        assert!(gap.abs() < 1e-9);
    }

    #[test]
    fn grid_bound_calculator() {
        assert_eq!(grid_distortion_bound(0.0, 10, 100, 1.0, 4.0).unwrap(), 80.0);
        assert!((grid_distortion_bound(0.01, 100, 100, 1.0, 4.0).unwrap() - 18.0).abs() < 1e-12);
        let g = optimal_grid_size(0.01, 100, 1.0, 4.0).unwrap();
        assert!((g - 8000f64.sqrt()).abs() < 1e-9);
        let at = |x: f64| 0.1 * x + 800.0 / x;
        assert!(at(g) <= at(g * 1.01) && at(g) <= at(g * 0.99));
        assert!(grid_distortion_bound(0.01, 0, 100, 1.0, 4.0).is_err());
        assert!(grid_distortion_bound(0.01, 10, 100, -1.0, 4.0).is_err());
    }

    #[test]
    fn csv_row_has_header_arity() {
        let (fam, data, grid) = gaussian_setup(10);
        let e = gaussian_moment_encoder(1).unwrap();
        let r = distortion_report(&fam, &data, &e, &GaussianAnalyticDecoder, &grid, 0).unwrap();
        assert_eq!(r.to_csv_row().split(',').count(), DistortionReport::CSV_HEADER.split(',').count());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.as_object().unwrap().values().all(|v| !v.is_object() && !v.is_array()));
    }
}
