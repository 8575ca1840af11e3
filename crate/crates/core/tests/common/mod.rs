#![allow(dead_code)]

use bpmcmc::bp::{self, BpConfig, SignedLogEstimate, ZHatProvider};
use bpmcmc::rng::SubstreamKey;
use rand::Rng;
use rand_distr::StandardNormal;

/// `Zhat ~ N(z, sd^2)`, so with `nu = 1` the inner estimates are `N(-z, sd^2)`.
pub struct Gaussian {
    pub z: f64,
    pub sd: f64,
}

impl ZHatProvider for Gaussian {
    fn z_hat(&self, _: &[f64], key: &SubstreamKey) -> f64 {
        self.z + self.sd * key.rng().sample::<f64, _>(StandardNormal)
    }
}

/// One block-Poisson estimate of `exp(b)` from Gaussian inner estimates with
/// standard deviation `sigma`. `a = None` uses the soft lower bound.
pub fn gaussian_estimate(cfg: &BpConfig, b: f64, sigma: f64, a: Option<f64>, seed: u64) -> SignedLogEstimate {
    let provider = Gaussian { z: -b, sd: sigma };
    let store = bp::draw_store(cfg, seed);
    let draws = bp::evaluate_draws(&store, &[0.0], &provider);
    let a = a.unwrap_or_else(|| bp::soft_lower_bound(draws.independent, 1.0, cfg.m, cfg.lambda));
    bp::combine(cfg, &draws, 1.0, a).expect("Gaussian factors are never exactly zero")
}

pub fn signed_value(e: &SignedLogEstimate) -> f64 {
    e.sign as f64 * e.log_abs.exp()
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn lag1_corr(x: &[f64]) -> f64 {
    let (mean, var) = mean_var(x);
    let n = x.len();
    let cov = (1..n).map(|i| (x[i] - mean) * (x[i - 1] - mean)).sum::<f64>() / (n - 1) as f64;
    cov / var
}
