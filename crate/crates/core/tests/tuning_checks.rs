mod common;

use bpmcmc::bp::ZHatProvider;
use bpmcmc::ising::{AisConfig, AisProvider};
use bpmcmc::rng::SubstreamKey;
use bpmcmc::tuning::{
    estimate_gamma, optimal_lambda, sweep_lambda, SurrogateInefficiency, SURROGATE_PARTICLES,
};
use common::Gaussian;

struct Exact;

impl ZHatProvider for Exact {
    fn z_hat(&self, theta: &[f64], _: &SubstreamKey) -> f64 {
        1.0 + theta[0]
    }
}

#[test]
fn deterministic_provider_has_zero_gamma() {
    let grid: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
    let g = estimate_gamma(&grid, &Exact, 10, 50, 1);
    assert_eq!(g.gamma_max, 0.0);
}

#[test]
fn gamma_of_known_coefficient_of_variation() {
    // an average of M draws with coefficient of variation c has gamma = 2 c^2
    let (c, particles) = (0.8f64, 25usize);
    let provider = Gaussian { z: 3.0, sd: 3.0 * c / (particles as f64).sqrt() };
    let g = estimate_gamma(&[vec![0.0]], &provider, particles, 40_000, 2);
    let want = 2.0 * c * c;
    assert!(((g.gamma_max - want) / want).abs() < 0.05, "{} vs {want}", g.gamma_max);
}

#[test]
fn ct_curve_is_u_shaped() {
    let lambdas: Vec<usize> = (10..=500).collect();
    let rows = sweep_lambda(100.0 * 100.0, 1.0, SURROGATE_PARTICLES, None, &lambdas, &SurrogateInefficiency::default());
    let finite: Vec<f64> = rows.iter().map(|r| r.ct).filter(|c| c.is_finite()).collect();
    let best = finite.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(best > 0 && best < finite.len() - 1, "minimum at the edge of the grid");
    assert!(finite[..=best].windows(2).all(|w| w[1] <= w[0]));
    assert!(finite[best..].windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn positivity_rises_and_log_variance_falls_with_blocks() {
    for &gamma in &[100.0f64 * 100.0, 500.0 * 500.0] {
        let sigma_b = (gamma / SURROGATE_PARTICLES as f64).sqrt();
        // the log variance only falls once m lambda exceeds the inner spread
        let start = (2.0 * sigma_b).ceil() as usize;
        let lambdas: Vec<usize> = (start..=start + 400).step_by(10).collect();
        let rows = sweep_lambda(gamma, 1.0, SURROGATE_PARTICLES, None, &lambdas, &SurrogateInefficiency::default());
        assert!(rows.windows(2).all(|w| w[1].tau >= w[0].tau), "gamma {gamma}");
        assert!(rows.windows(2).all(|w| w[1].sigma2 < w[0].sigma2), "gamma {gamma}");
    }
}

#[test]
fn surrogate_calibration_reproduces_optimal_block_counts() {
    let lambdas: Vec<usize> = (10..=500).collect();
    let surrogate = SurrogateInefficiency::default();
    let gamma = 500.0 * 500.0;
    let uncorrelated = optimal_lambda(&sweep_lambda(gamma, 1.0, SURROGATE_PARTICLES, Some(0.0), &lambdas, &surrogate));
    let correlated = optimal_lambda(&sweep_lambda(gamma, 1.0, SURROGATE_PARTICLES, Some(0.99), &lambdas, &surrogate));
    let (u, c) = (uncorrelated.unwrap() as i64, correlated.unwrap() as i64);
    assert!((u - 295).abs() <= 5, "rho = 0: {u}");
    assert!((c - 195).abs() <= 5, "rho = 0.99: {c}");
}

#[test]
fn ising_normalizer_is_noisier_at_stronger_interaction() {
    let provider = AisProvider { l: 10, config: AisConfig { n_temps: 200, n_particles: 10 } };
    let g = estimate_gamma(&[vec![0.2], vec![0.43]], &provider, 10, 200, 3);
    assert!(g.per_theta[1] > g.per_theta[0], "{:?}", g.per_theta);
}
