//! Kent posterior for signed block PMMH.
//!
//! Each observation contributes `1 / c(kappa, beta)`, replaced by an
//! auxiliary `nu_i` and a factor `exp(-nu_i c)`. Since `c` is shared by all
//! observations the product is `exp(-(sum_i nu_i) c)`, so a single block-Poisson
//! estimate at `nu = sum_i nu_i ~ Gamma(n, c_hat)` covers the whole dataset.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::data::{SphericalData, SufficientStats};
use super::density::{log_f_stats, log_prior};
use super::mle::interior_start;
use super::moment::moment_estimate;
use super::normalizer::{KentNormalizer, NormalizerConfig};
use super::params::{log_jacobian, KentParams};
use crate::bp::{BpConfig, ZHatProvider};
use crate::error::{Error, Result};
use crate::pmmh::{
    run_chain, sign_corrected_expectation, Chain, ChainConfig, DoublyIntractableModel, LikelihoodEstimator, ProposalConfig,
    RefreshPolicy,
};

#[derive(Clone, Debug, PartialEq)]
pub struct KentModel {
    pub stats: SufficientStats,
    pub provider: KentNormalizer,
}

impl KentModel {
    pub fn new(data: &SphericalData, normalizer: NormalizerConfig) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("Kent model needs at least one observation".into()));
        }
        normalizer.validate()?;
        Ok(Self { stats: data.stats(), provider: KentNormalizer { config: normalizer } })
    }
}

impl DoublyIntractableModel for KentModel {
    fn dim(&self) -> usize {
        5
    }

    fn log_f(&self, theta: &[f64]) -> f64 {
        log_f_stats(&self.stats, &KentParams::from_slice(theta))
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        log_prior(&KentParams::from_slice(theta))
    }

    fn provider(&self) -> &dyn ZHatProvider {
        &self.provider
    }

    fn n_aux(&self) -> usize {
        self.stats.n
    }

    fn to_unconstrained(&self, theta: &[f64]) -> Vec<f64> {
        KentParams::from_slice(theta).to_unconstrained()
    }

    fn from_unconstrained(&self, phi: &[f64]) -> Vec<f64> {
        KentParams::from_unconstrained(phi).to_vec()
    }

    fn log_jacobian(&self, phi: &[f64]) -> f64 {
        log_jacobian(phi)
    }
}

/// Settings of a Bayesian Kent fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KentFitConfig {
    pub bp: BpConfig,
    #[serde(default)]
    pub normalizer: NormalizerConfig,
    pub proposal: ProposalConfig,
    pub n_iter: usize,
    pub seed: u64,
    #[serde(default)]
    pub refresh: RefreshPolicy,
}

impl Default for KentFitConfig {
    fn default() -> Self {
        Self {
            bp: BpConfig::new(20, 1.0).expect("valid defaults"),
            normalizer: NormalizerConfig::default(),
            proposal: ProposalConfig::adaptive(0.1),
            n_iter: 20_000,
            seed: 1,
            refresh: RefreshPolicy::Cyclic,
        }
    }
}

/// Starting point: the moment estimate pulled inside the support, or a
/// diffuse default for fewer than three observations.
pub fn default_start(data: &SphericalData) -> KentParams {
    match moment_estimate(data) {
        Ok(m) => interior_start(&m.params),
        Err(_) => KentParams::new(1.0, 0.1, PI / 2.0, PI / 2.0, PI / 2.0),
    }
}

pub fn fit_pmmh(data: &SphericalData, config: &KentFitConfig) -> Result<Chain> {
    fit_pmmh_from(data, config, &default_start(data))
}

pub fn fit_pmmh_from(data: &SphericalData, config: &KentFitConfig, start: &KentParams) -> Result<Chain> {
    let model = KentModel::new(data, config.normalizer)?;
    let chain_cfg = ChainConfig {
        estimator: LikelihoodEstimator::BlockPoisson(config.bp.clone()),
        proposal: config.proposal.clone(),
        n_iter: config.n_iter,
        seed: config.seed,
        refresh: config.refresh,
    };
    run_chain(&model, &chain_cfg, &start.to_vec(), |_| {})
}

/// Sign-corrected posterior means of `kappa`, `beta` and `beta / kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KentPosteriorMeans {
    pub kappa: f64,
    pub beta: f64,
    pub ratio: f64,
    pub negative_fraction: f64,
    pub reliable: bool,
}

pub fn posterior_means(chain: &Chain, burn_in: usize) -> Result<KentPosteriorMeans> {
    let kappa = sign_corrected_expectation(&chain.samples, |t| t[0], burn_in)?;
    let beta = sign_corrected_expectation(&chain.samples, |t| t[1], burn_in)?;
    let ratio = sign_corrected_expectation(&chain.samples, |t| t[1] / t[0], burn_in)?;
    Ok(KentPosteriorMeans {
        kappa: kappa.value,
        beta: beta.value,
        ratio: ratio.value,
        negative_fraction: kappa.negative_fraction,
        reliable: kappa.reliable,
    })
}
