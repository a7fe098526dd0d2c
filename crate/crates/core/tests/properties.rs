use lpembed::embeddings::{
    cauchy_quantile_encoder, gaussian_moment_encoder, CauchyQuantileDecoder, Decoder, Encoder, FnDecoder, GaussianAnalyticDecoder,
};
use lpembed::metrics::{bound_violations, distortion_report, profile, ThetaGrid};
use lpembed::models::{log_likelihood, sample, CauchyFamily, GaussianFamily};
use lpembed::neural::{Activation, EncoderDecoderPair, MlpWeights};
use lpembed::{Dataset, ModelFamily, ParamVector};
use proptest::prelude::*;

/// Analytic decoder plus a smooth parameter-dependent error of size `amp`.
fn wobble<D: Decoder>(inner: D, amp: f64, freq: f64) -> impl Decoder {
    FnDecoder::new("wobble", move |t: &ParamVector, s| inner.decode(t, s).unwrap() + amp * (freq * t.0.iter().sum::<f64>() + 0.3).sin())
}

fn gaussian_grid(k: usize) -> ThetaGrid {
    ThetaGrid::axes(GaussianFamily::default().domain(), &[k, k]).unwrap()
}

fn cauchy_grid(k: usize) -> ThetaGrid {
    ThetaGrid::axes(CauchyFamily::default().domain(), &[k]).unwrap()
}

fn brute_force_delta(l: &[f64], surr: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for a in 0..l.len() {
        for b in 0..l.len() {
            best = best.max(((l[a] - surr[a]) - (l[b] - surr[b])).abs());
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_cascade_holds(m in 1usize..=4, n in 5usize..150, k in 2usize..8, seed in any::<u64>(),
                              amp in 0.0f64..0.5, freq in 0.1f64..5.0, i0 in 0usize..64) {
        let fam = GaussianFamily::default();
        let grid = gaussian_grid(k);
        let data = sample(&fam, &ParamVector(vec![0.3, 1.1]), n, seed).unwrap();
        let enc = gaussian_moment_encoder(m).unwrap();
        let dec = wobble(GaussianAnalyticDecoder, amp, freq);
        let r = distortion_report(&fam, &data, &enc, &dec, &grid, i0 % grid.len()).unwrap();
        prop_assert!(bound_violations(&r).is_empty(), "{:?}", r);
        prop_assert!((r.aic_gap - r.bic_gap).abs() == 0.0);
    }

    #[test]
    fn cauchy_cascade_holds(m in 1usize..=8, n in 8usize..120, k in 2usize..40, seed in any::<u64>(),
                            amp in 0.0f64..0.3, i0 in 0usize..40) {
        let fam = CauchyFamily::default();
        let grid = cauchy_grid(k);
        let data = sample(&fam, &ParamVector(vec![-0.4]), n, seed).unwrap();
        let enc = cauchy_quantile_encoder(m).unwrap();
        let dec = wobble(CauchyQuantileDecoder, amp, 1.7);
        let r = distortion_report(&fam, &data, &enc, &dec, &grid, i0 % grid.len()).unwrap();
        prop_assert!(bound_violations(&r).is_empty(), "{:?}", r);
    }

    #[test]
    fn delta_is_the_pairwise_maximum(n in 5usize..80, k in 2usize..7, seed in any::<u64>(), amp in 0.0f64..1.0) {
        let fam = GaussianFamily::default();
        let grid = gaussian_grid(k);
        let data = sample(&fam, &ParamVector(vec![-0.5, 0.9]), n, seed).unwrap();
        let enc = gaussian_moment_encoder(1).unwrap();
        let dec = wobble(GaussianAnalyticDecoder, amp, 2.3);
        let prof = profile(&fam, &data, &enc, &dec, &grid).unwrap();
        let surr: Vec<f64> = (0..grid.len()).map(|g| prof.surrogate(g)).collect();
        prop_assert!((prof.delta().0 - brute_force_delta(&prof.log_lik, &surr)).abs() <= 1e-12);
    }

    #[test]
    fn log_likelihood_is_additive(n1 in 1usize..60, n2 in 1usize..60, s1 in any::<u64>(), s2 in any::<u64>(),
                                  mu in -2.0f64..2.0, sigma in 0.6f64..1.6) {
        let fam = GaussianFamily::default();
        let theta = ParamVector(vec![mu, sigma]);
        let a = sample(&fam, &ParamVector(vec![0.0, 1.0]), n1, s1).unwrap();
        let b = sample(&fam, &ParamVector(vec![0.0, 1.0]), n2, s2).unwrap();
        let whole = log_likelihood(&fam, &a.concat(&b).unwrap(), &theta).unwrap();
        let parts = log_likelihood(&fam, &a, &theta).unwrap() + log_likelihood(&fam, &b, &theta).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-10 * whole.abs().max(1.0));
    }

    #[test]
    fn embeddings_ignore_row_order(n in 2usize..60, seed in any::<u64>(), rot in 0usize..60, m in 1usize..=4) {
        let data = sample(&GaussianFamily::default(), &ParamVector(vec![0.1, 1.3]), n, seed).unwrap();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let shuffled = data.permuted(&order).unwrap();
        let enc = gaussian_moment_encoder(m).unwrap();
        let (a, b) = (enc.embed(&data).unwrap(), enc.embed(&shuffled).unwrap());
        for (x, y) in a.s.iter().zip(&b.s) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        let q = cauchy_quantile_encoder(n.min(5)).unwrap();
        prop_assert_eq!(q.embed(&data).unwrap(), q.embed(&shuffled).unwrap());
    }

    #[test]
    fn mean_embeddings_merge_across_shards(n1 in 1usize..50, n2 in 1usize..50, seed in any::<u64>(), m in 1usize..=4) {
        let fam = GaussianFamily::default();
        let a = sample(&fam, &ParamVector(vec![1.0, 0.8]), n1, seed).unwrap();
        let b = sample(&fam, &ParamVector(vec![-1.0, 1.2]), n2, seed ^ 1).unwrap();
        let enc = gaussian_moment_encoder(m).unwrap();
        let merged = enc.embed(&a).unwrap().merge(&enc.embed(&b).unwrap()).unwrap();
        let whole = enc.embed(&a.concat(&b).unwrap()).unwrap();
        prop_assert_eq!(merged.n, whole.n);
        for (x, y) in merged.s.iter().zip(&whole.s) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn neural_embeddings_merge_across_shards(n1 in 1usize..30, n2 in 1usize..30, seed in any::<u64>()) {
        let pair = EncoderDecoderPair::new(
            MlpWeights::init(&[1, 6, 3], Activation::Tanh, seed),
            MlpWeights::init(&[5, 4, 1], Activation::Tanh, seed ^ 7),
        ).unwrap();
        let fam = GaussianFamily::default();
        let a = sample(&fam, &ParamVector(vec![0.0, 1.0]), n1, seed).unwrap();
        let b = sample(&fam, &ParamVector(vec![0.5, 1.0]), n2, seed ^ 3).unwrap();
        let merged = pair.embed(&a).unwrap().merge(&pair.embed(&b).unwrap()).unwrap();
        let whole = pair.embed(&a.concat(&b).unwrap()).unwrap();
        for (x, y) in merged.s.iter().zip(&whole.s) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_gaussian_embedding_has_no_distortion(n in 2usize..200, seed in any::<u64>(), k in 2usize..6) {
        let fam = GaussianFamily::default();
        let data = sample(&fam, &ParamVector(vec![0.7, 0.9]), n, seed).unwrap();
        let r = distortion_report(&fam, &data, &gaussian_moment_encoder(2).unwrap(), &GaussianAnalyticDecoder, &gaussian_grid(k), 0).unwrap();
        prop_assert!(r.epsilon_n <= 1e-10 && r.delta_n <= 1e-9, "{:?}", r);
    }
}

#[test]
fn single_row_dataset_is_accepted() {
    let d = Dataset::from_column(vec![0.25]).unwrap();
    let fam = GaussianFamily::default();
    let r = distortion_report(&fam, &d, &gaussian_moment_encoder(2).unwrap(), &GaussianAnalyticDecoder, &gaussian_grid(3), 4).unwrap();
    assert!(bound_violations(&r).is_empty());
}
