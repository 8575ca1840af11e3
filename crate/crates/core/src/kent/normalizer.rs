//! The Kent normalizing series and its unbiased random-truncation estimator.
//!
//! ```text
//! c(kappa, beta) = sum_j phi_j,
//! phi_j = 2 pi Gamma(j + 1/2) / Gamma(j + 1) beta^{2j} (kappa/2)^{-2j-1/2} I_{2j+1/2}(kappa)
//! ```
//!
//! The first `K` terms are summed exactly and the tail is replaced by a single
//! term `phi_{K+k} / q(k)`, with `k` drawn from a pmf `q` on `k >= 0`.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use super::bessel::log_bessel_i_half_orders;
use crate::bp::ZHatProvider;
use crate::error::{Error, Result};
use crate::rng::SubstreamKey;
use crate::special::{ln_gamma, ln_poisson_pmf, log_sum_exp};

/// Distribution of the tail offset `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailPmf {
    Poisson { mean: f64 },
    /// Number of failures before the first success.
    Geometric { p: f64 },
}

impl TailPmf {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Poisson { mean } if mean > 0.0 && mean.is_finite() => Ok(()),
            Self::Geometric { p } if p > 0.0 && p < 1.0 => Ok(()),
            other => Err(Error::Config(format!("tail pmf needs full support on k >= 0, got {other:?}"))),
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        match *self {
            Self::Poisson { mean } => ln_poisson_pmf(k, mean),
            Self::Geometric { p } => p.ln() + k as f64 * (-p).ln_1p(),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        match *self {
            Self::Poisson { mean } => Poisson::new(mean).expect("validated mean").sample(rng) as u64,
            Self::Geometric { p } => Geometric::new(p).expect("validated p").sample(rng),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizerConfig {
    /// Number of leading terms summed exactly.
    #[serde(rename = "head_terms")]
    pub k: usize,
    pub tail: TailPmf,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self { k: 10, tail: TailPmf::Poisson { mean: 1.0 } }
    }
}

impl NormalizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.tail.validate()
    }
}

/// `log phi_j` for `j = 0..n_terms`. Terms with `j >= 1` are `-inf` when `beta = 0`.
pub fn log_c_terms(kappa: f64, beta: f64, n_terms: usize) -> Vec<f64> {
    if n_terms == 0 {
        return Vec::new();
    }
    let log_i = log_bessel_i_half_orders(2 * (n_terms - 1), kappa).expect("kappa must be positive");
    let ln_beta = beta.ln();
    let ln_half_kappa = (0.5 * kappa).ln();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    (0..n_terms)
        .map(|j| {
            let jf = j as f64;
            let beta_part = if j == 0 { 0.0 } else { 2.0 * jf * ln_beta };
            ln_2pi + ln_gamma(jf + 0.5) - ln_gamma(jf + 1.0) + beta_part - (2.0 * jf + 0.5) * ln_half_kappa
                + log_i[2 * j]
        })
        .collect()
}

pub fn c_term(j: usize, kappa: f64, beta: f64) -> f64 {
    log_c_terms(kappa, beta, j + 1)[j].exp()
}

/// Sum of the first `k` terms.
pub fn c_partial(k: usize, kappa: f64, beta: f64) -> f64 {
    log_c_terms(kappa, beta, k).iter().map(|l| l.exp()).sum()
}

/// `log c(kappa, beta)` with the series summed until the remaining terms are
/// negligible (relative tail below `1e-17`).
pub fn log_c(kappa: f64, beta: f64) -> f64 {
    let mut n = 64;
    loop {
        let terms = log_c_terms(kappa, beta, n);
        let total = log_sum_exp(&terms);
        let last = terms[n - 1];
        let decreasing = terms[n - 1] <= terms[n - 2];
        // beyond the peak the terms fall faster than geometrically, so a tiny
        // decreasing last term bounds the tail
        if (decreasing && last - total < -40.0) || n >= 8192 {
            return total;
        }
        n *= 2;
    }
}

pub fn c_converged(kappa: f64, beta: f64) -> f64 {
    log_c(kappa, beta).exp()
}

/// `log c` under the von Mises-Fisher reduction `beta = 0`: `4 pi sinh(kappa) / kappa`.
pub fn log_c_vmf(kappa: f64) -> f64 {
    (4.0 * std::f64::consts::PI).ln() + kappa + (-(-2.0 * kappa).exp_m1()).ln() - std::f64::consts::LN_2 - kappa.ln()
}

/// Log of the tail replacement `phi_{K+k} / q(k)` given precomputed terms.
fn log_tail(log_terms: &[f64], config: &NormalizerConfig, k: u64) -> f64 {
    log_terms[config.k + k as usize] - config.tail.ln_pmf(k)
}

/// Unbiased estimate of `c(kappa, beta)` addressed by `key`.
pub fn c_hat(kappa: f64, beta: f64, config: &NormalizerConfig, key: &SubstreamKey) -> f64 {
    let k = config.tail.sample(&mut key.rng());
    let terms = log_c_terms(kappa, beta, config.k + k as usize + 1);
    let head: f64 = terms[..config.k].iter().map(|l| l.exp()).sum();
    head + log_tail(&terms, config, k).exp()
}

/// Normalizer provider for the Kent backend; `theta` is in original
/// coordinates `[kappa, beta, psi, alpha, eta]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KentNormalizer {
    pub config: NormalizerConfig,
}

impl ZHatProvider for KentNormalizer {
    fn z_hat(&self, theta: &[f64], key: &SubstreamKey) -> f64 {
        c_hat(theta[0], theta[1], &self.config, key)
    }

    /// The exact head and the Bessel ladder are shared by all draws.
    fn z_hat_batch(&self, theta: &[f64], keys: &[SubstreamKey]) -> Vec<f64> {
        let offsets: Vec<u64> = keys.iter().map(|key| self.config.tail.sample(&mut key.rng())).collect();
        let max_k = offsets.iter().copied().max().unwrap_or(0) as usize;
        let terms = log_c_terms(theta[0], theta[1], self.config.k + max_k + 1);
        let head: f64 = terms[..self.config.k].iter().map(|l| l.exp()).sum();
        offsets.iter().map(|&k| head + log_tail(&terms, &self.config, k).exp()).collect()
    }
}
