use bpmcmc::bp::BpConfig;
use bpmcmc::kent::classify::two_group_data;
use bpmcmc::kent::normalizer::c_converged;
use bpmcmc::kent::{
    bootstrap, c_hat, cross_validate, fit_pmmh, mle_estimate, moment_estimate, posterior_means, sample,
    ClassifierConfig, KentFitConfig, KentModel, KentParams, NormalizerConfig, PointMethod, TailPmf,
};
use bpmcmc::kent::model::default_start;
use bpmcmc::pmmh::{run_chain, ChainConfig, LikelihoodEstimator, ProposalConfig, RefreshPolicy};
use bpmcmc::rng::SubstreamKey;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mc_mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn truncated_series_estimator_is_unbiased_when_the_tail_matters() {
    let (kappa, beta) = (5.0, 2.45);
    let want = c_converged(kappa, beta);
    for tail in [TailPmf::Poisson { mean: 1.0 }, TailPmf::Geometric { p: 0.4 }] {
        let cfg = NormalizerConfig { k: 2, tail };
        let draws: Vec<f64> = (0..100_000).map(|i| c_hat(kappa, beta, &cfg, &SubstreamKey::root(i, 4))).collect();
        let (mean, se) = mc_mean_se(&draws);
        assert!(se > 0.0);
        assert!((mean - want).abs() < 3.0 * se, "{tail:?}: {mean} vs {want} (se {se})");
    }
}

#[test]
fn maximum_likelihood_is_consistent() {
    let truth = KentParams::new(12.0, 3.0, 1.0, 2.0, 1.2);
    let data = sample(&truth, 5000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let p = mle_estimate(&data).unwrap().params;
    assert!((p.kappa - 12.0).abs() < 0.5, "{p:?}");
    assert!((p.ratio() - 0.25).abs() < 0.02, "{p:?}");
}

/// The moment estimator rests on a large-concentration approximation, so it
/// is only checked where that approximation is tight.
#[test]
fn moment_estimator_is_accurate_at_high_concentration() {
    let truth = KentParams::new(60.0, 15.0, 1.0, 2.0, 1.2);
    let data = sample(&truth, 5000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let p = moment_estimate(&data).unwrap().params;
    assert!((p.kappa - 60.0).abs() < 4.0, "{p:?}");
    assert!((p.ratio() - 0.25).abs() < 0.03, "{p:?}");
}

/// The block-Poisson chain with a two-term stochastic normalizer and an exact
/// Metropolis-Hastings chain (normalizer summed to convergence) must agree.
#[test]
fn pseudo_marginal_chain_matches_exact_likelihood_chain() {
    let truth = KentParams::new(3.0, 1.2, 1.0, 2.0, 1.2);
    let data = sample(&truth, 60, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let start = default_start(&data).to_vec();
    let run = |normalizer: NormalizerConfig, estimator: LikelihoodEstimator| {
        let model = KentModel::new(&data, normalizer).unwrap();
        let cfg = ChainConfig {
            estimator,
            proposal: ProposalConfig::adaptive(0.1),
            n_iter: 60_000,
            seed: 11,
            refresh: RefreshPolicy::Cyclic,
        };
        let chain = run_chain(&model, &cfg, &start, |_| {}).unwrap();
        posterior_means(&chain, 15_000).unwrap()
    };
    let exact = run(NormalizerConfig { k: 60, ..Default::default() }, LikelihoodEstimator::PlugIn);
    let noisy = run(
        NormalizerConfig { k: 2, ..Default::default() },
        LikelihoodEstimator::BlockPoisson(BpConfig::new(20, 1.0).unwrap()),
    );
    assert!(noisy.reliable);
    assert!((exact.kappa - noisy.kappa).abs() < 0.25, "{exact:?} {noisy:?}");
    assert!((exact.ratio - noisy.ratio).abs() < 0.04, "{exact:?} {noisy:?}");
}

#[test]
fn cross_validation_separates_distinct_groups() {
    let p1 = KentParams::new(15.0, 3.0, 1.0, 1.0, 1.0);
    let p2 = KentParams::new(15.0, 3.0, 1.0, 2.5, 2.0);
    let data = two_group_data(&p1, &p2, 40, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let fit = KentFitConfig { n_iter: 3000, ..Default::default() };
    let folds = cross_validate(&data, 4, &fit, &ClassifierConfig::default(), 5).unwrap();
    assert_eq!(folds.len(), 4);
    assert_eq!(folds.iter().map(|f| f.n_test).sum::<usize>(), 80);
    for f in &folds {
        assert!(f.bayes >= 0.9 && f.moment >= 0.9 && f.mle >= 0.9, "{f:?}");
    }
}

#[test]
fn bootstrap_intervals_cover_the_truth() {
    let truth = KentParams::new(10.0, 2.5, 1.0, 2.0, 1.2);
    let data = sample(&truth, 400, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let r = bootstrap(&data, PointMethod::Mle, 300, 0.99, 7).unwrap();
    assert_eq!(r.failures, 0);
    assert!(r.kappa.lower < 10.0 && 10.0 < r.kappa.upper, "{:?}", r.kappa);
    assert!(r.ratio.lower < 0.25 && 0.25 < r.ratio.upper, "{:?}", r.ratio);
    let m = bootstrap(&data, PointMethod::Moment, 300, 0.95, 7).unwrap();
    for i in [m.kappa, m.beta, m.ratio] {
        assert!(i.lower <= i.estimate && i.estimate <= i.upper, "{i:?}");
    }
}

#[test]
fn bayesian_fit_is_reproducible() {
    let truth = KentParams::new(5.0, 1.0, 1.0, 2.0, 1.2);
    let data = sample(&truth, 100, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let cfg = KentFitConfig { n_iter: 500, seed: 3, ..Default::default() };
    assert_eq!(fit_pmmh(&data, &cfg).unwrap().samples, fit_pmmh(&data, &cfg).unwrap().samples);
}
