//! Signed block pseudo-marginal Metropolis-Hastings.
//!
//! The chain targets `|pi_hat|`, the absolute value of a signed unbiased
//! estimate of the augmented posterior
//!
//! ```text
//! pi(theta) f(y|theta) exp(-nu Z(theta)),   nu | theta ~ Gamma(n_aux, rate Z_P(theta)),
//! ```
//!
//! and records the sign of the current estimate at every iteration.
//! Expectations are recovered with [`sign_corrected_expectation`].

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bp::{self, BlockRandomStore, BpConfig, SignedLogEstimate, ZHatProvider};
use crate::error::{Error, Result};
use crate::rng::SubstreamKey;

/// A posterior `pi(theta) f(y|theta) / Z(theta)^{n_aux}` with intractable `Z`.
///
/// `log_f`, `log_prior` and the provider work in the original parameter
/// coordinates; the sampler moves in unconstrained coordinates `phi`.
pub trait DoublyIntractableModel: Sync {
    fn dim(&self) -> usize;

    fn log_f(&self, theta: &[f64]) -> f64;

    fn log_prior(&self, theta: &[f64]) -> f64;

    fn provider(&self) -> &dyn ZHatProvider;

    /// Number of auxiliary variables, one per factor of `1/Z` in the likelihood.
    fn n_aux(&self) -> usize {
        1
    }

    fn to_unconstrained(&self, theta: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }

    fn from_unconstrained(&self, phi: &[f64]) -> Vec<f64> {
        phi.to_vec()
    }

    /// `log |d theta / d phi|`.
    fn log_jacobian(&self, _phi: &[f64]) -> f64 {
        0.0
    }

    /// Log prior density of the unconstrained coordinates.
    fn log_prior_unconstrained(&self, phi: &[f64]) -> f64 {
        let theta = self.from_unconstrained(phi);
        let lp = self.log_prior(&theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_jacobian(phi)
    }
}

/// How the likelihood factor `exp(-nu Z(theta))` is estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LikelihoodEstimator {
    /// Signed block-Poisson estimator.
    BlockPoisson(BpConfig),
    /// Positive log-normal bias correction over `blocks * per_block`
    /// normalizer draws, one block redrawn per iteration.
    BiasCorrected { blocks: usize, per_block: usize },
    /// `exp(-nu Zhat)` from a single draw. Exact only when the provider is.
    PlugIn,
}

impl LikelihoodEstimator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::BlockPoisson(cfg) => cfg.validate(),
            Self::BiasCorrected { blocks, per_block } if blocks * per_block < 2 || *blocks == 0 => {
                Err(Error::Config("bias-corrected estimator needs at least 2 draws".into()))
            }
            _ => Ok(()),
        }
    }

    fn initial_store(&self, seed: u64) -> BlockRandomStore {
        match self {
            Self::BlockPoisson(cfg) => bp::draw_store(cfg, seed),
            Self::BiasCorrected { blocks, per_block } => {
                BlockRandomStore::with_fixed_count(*blocks, *per_block as u32, seed)
            }
            Self::PlugIn => BlockRandomStore::with_fixed_count(1, 0, seed),
        }
    }

    fn combine(&self, draws: &bp::BlockDraws, nu: f64) -> Result<SignedLogEstimate> {
        match self {
            Self::BlockPoisson(cfg) => {
                let a = bp::soft_lower_bound(draws.independent, nu, cfg.m, cfg.lambda);
                bp::combine(cfg, draws, nu, a)
            }
            Self::BiasCorrected { .. } => {
                let z: Vec<f64> = draws.per_block.iter().flatten().copied().collect();
                Ok(SignedLogEstimate {
                    sign: 1,
                    log_abs: bias_corrected_log_estimate(&z, nu),
                    z_p_bar: draws.z_p_bar(),
                    n_negative_factors: 0,
                })
            }
            Self::PlugIn => Ok(SignedLogEstimate {
                sign: 1,
                log_abs: -nu * draws.independent,
                z_p_bar: draws.independent,
                n_negative_factors: 0,
            }),
        }
    }
}

/// `-nu mean(z) - nu^2 var(z) / (2M)`; its exponential is unbiased for
/// `exp(-nu Z)` when the draws are Gaussian.
pub fn bias_corrected_log_estimate(z: &[f64], nu: f64) -> f64 {
    let m = z.len() as f64;
    let mean = z.iter().sum::<f64>() / m;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    -nu * mean - nu * nu * var / (2.0 * m)
}

/// Which block is refreshed at each iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshPolicy {
    /// Block `iteration mod lambda`.
    #[default]
    Cyclic,
    /// A uniformly chosen block.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    FixedRw,
    AdaptiveRw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub kind: ProposalKind,
    /// Initial (or fixed) random-walk standard deviation per coordinate.
    pub step: f64,
    /// Target acceptance rate; defaults to 0.44 in one dimension and 0.234 otherwise.
    #[serde(default)]
    pub target_accept: Option<f64>,
    /// Iterations before the empirical covariance replaces the identity.
    #[serde(default = "default_cov_start")]
    pub cov_start: usize,
}

fn default_cov_start() -> usize {
    500
}

impl ProposalConfig {
    pub fn fixed(step: f64) -> Self {
        Self { kind: ProposalKind::FixedRw, step, target_accept: None, cov_start: default_cov_start() }
    }

    pub fn adaptive(step: f64) -> Self {
        Self { kind: ProposalKind::AdaptiveRw, step, target_accept: None, cov_start: default_cov_start() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("proposal step must be positive, got {}", self.step)));
        }
        if let Some(t) = self.target_accept {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("target acceptance must lie in (0,1), got {t}")));
            }
        }
        Ok(())
    }
}

/// Gaussian random walk with optional Robbins-Monro scale adaptation and
/// empirical-covariance shaping.
#[derive(Clone, Debug)]
pub struct RandomWalk {
    config: ProposalConfig,
    dim: usize,
    log_scale: f64,
    target: f64,
    n: usize,
    mean: DVector<f64>,
    /// Sum of outer products of deviations (Welford).
    m2: DMatrix<f64>,
    chol: Option<DMatrix<f64>>,
}

impl RandomWalk {
    pub fn new(config: ProposalConfig, dim: usize) -> Self {
        let target = config.target_accept.unwrap_or(if dim == 1 { 0.44 } else { 0.234 });
        Self {
            log_scale: config.step.ln(),
            config,
            dim,
            target,
            n: 0,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
            chol: None,
        }
    }

    pub fn step(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn target_accept(&self) -> f64 {
        self.target
    }

    pub fn propose(&self, phi: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let z: DVector<f64> = DVector::from_fn(self.dim, |_, _| rng.sample(StandardNormal));
        let dir = match &self.chol {
            Some(l) => l * z,
            None => z,
        };
        let s = self.step();
        phi.iter().zip(dir.iter()).map(|(p, d)| p + s * d).collect()
    }

    /// Records the post-decision state and adapts when enabled.
    pub fn update(&mut self, phi: &[f64], accepted: bool) {
        if self.config.kind == ProposalKind::FixedRw {
            return;
        }
        self.n += 1;
        let gain = (self.n as f64).powf(-0.6);
        self.log_scale += gain * ((accepted as u8 as f64) - self.target);

        let x = DVector::from_column_slice(phi);
        let delta = &x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();

        if self.dim > 1 && self.n >= self.config.cov_start && self.n % 50 == 0 {
            let cov = &self.m2 / (self.n - 1) as f64;
            // normalise so the scale factor keeps its meaning
            let avg_var = cov.trace() / self.dim as f64;
            if avg_var > 0.0 && avg_var.is_finite() {
                let shaped = cov / avg_var + DMatrix::identity(self.dim, self.dim) * 1e-6;
                if let Some(c) = shaped.cholesky() {
                    if self.chol.is_none() {
                        self.log_scale = (2.38 / (self.dim as f64).sqrt()).ln() + 0.5 * avg_var.ln();
                    }
                    self.chol = Some(c.l());
                }
            }
        }
    }
}

/// Current state of the augmented chain.
#[derive(Clone, Debug)]
pub struct PmmhState {
    /// Unconstrained coordinates.
    pub phi: Vec<f64>,
    /// Sum of the auxiliary variables.
    pub nu: f64,
    pub store: BlockRandomStore,
    pub est: SignedLogEstimate,
    pub log_f: f64,
    pub log_prior: f64,
}

impl PmmhState {
    fn log_target_abs(&self) -> f64 {
        self.est.log_abs + self.log_f + self.log_prior
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    /// Original coordinates.
    pub theta: Vec<f64>,
    pub sign: i8,
    pub accepted: bool,
    pub nu: f64,
    pub log_abs_like: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Chain {
    pub samples: Vec<ChainSample>,
    pub runtime_secs: f64,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.iter().filter(|s| s.accepted).count() as f64 / self.samples.len().max(1) as f64
    }

    pub fn param(&self, index: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.theta[index]).collect()
    }

    pub fn signs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.sign as f64).collect()
    }
}

const STEP_EPOCH_BASE: u64 = 1 << 32;

fn draw_nu(n_aux: usize, z_p: f64, rng: &mut impl Rng) -> f64 {
    Gamma::new(n_aux as f64, 1.0 / z_p).expect("positive shape and scale").sample(rng)
}

/// Builds the initial state, refreshing the store if the first estimate is degenerate.
pub fn init_state<M: DoublyIntractableModel + ?Sized>(
    model: &M,
    estimator: &LikelihoodEstimator,
    init_theta: &[f64],
    seed: u64,
    rng: &mut impl Rng,
) -> Result<PmmhState> {
    if init_theta.len() != model.dim() {
        return Err(Error::Init(format!("expected {} parameters, got {}", model.dim(), init_theta.len())));
    }
    let phi = model.to_unconstrained(init_theta);
    let theta = model.from_unconstrained(&phi);
    let log_prior = model.log_prior_unconstrained(&phi);
    let log_f = model.log_f(&theta);
    if !log_prior.is_finite() || !log_f.is_finite() {
        return Err(Error::Init(format!("non-finite prior or kernel at {init_theta:?}")));
    }
    let mut store = estimator.initial_store(seed);
    for _ in 0..100 {
        let draws = bp::evaluate_draws(&store, &theta, model.provider());
        let z_p = draws.z_p_bar();
        if z_p > 0.0 && z_p.is_finite() {
            let nu = draw_nu(model.n_aux(), z_p, rng);
            if let Ok(est) = estimator.combine(&draws, nu) {
                if est.log_abs.is_finite() {
                    return Ok(PmmhState { phi, nu, store, est, log_f, log_prior });
                }
            }
        }
        store = store.refresh_all();
    }
    Err(Error::Init("could not obtain a valid initial likelihood estimate".into()))
}

/// One iteration of the signed block PMMH update.
///
/// Returns the new state and the sample recorded for it. A degenerate or
/// non-finite proposal is rejected; the current estimate is never recomputed.
#[allow(clippy::too_many_arguments)]
pub fn pmmh_step<M: DoublyIntractableModel + ?Sized>(
    state: PmmhState,
    model: &M,
    estimator: &LikelihoodEstimator,
    proposal: &mut RandomWalk,
    refresh: RefreshPolicy,
    iteration: usize,
    rng: &mut impl Rng,
) -> Result<(PmmhState, ChainSample)> {
    let n_blocks = state.store.n_blocks();
    let block = match refresh {
        RefreshPolicy::Cyclic => iteration % n_blocks,
        RefreshPolicy::Uniform => rng.random_range(0..n_blocks),
    };
    // epochs below STEP_EPOCH_BASE belong to initialisation; every iteration
    // gets its own epoch so rejected proposals are never replayed
    let epoch = STEP_EPOCH_BASE + iteration as u64;
    let store = state.store.refresh_block_at(block, epoch, epoch)?;
    let phi = proposal.propose(&state.phi, rng);
    let u: f64 = rng.random();

    let candidate = propose_state(model, estimator, phi, store, rng);
    let (next, accepted) = match candidate {
        Some(cand) => {
            let z_cur = state.est.z_p_bar;
            let z_new = cand.est.z_p_bar;
            let n_aux = model.n_aux() as f64;
            let log_ratio = cand.log_target_abs() - state.log_target_abs()
                + n_aux * (z_cur.ln() - z_new.ln())
                - state.nu * z_cur
                + cand.nu * z_new;
            if u.ln() < log_ratio.min(0.0) {
                (cand, true)
            } else {
                (state, false)
            }
        }
        None => (state, false),
    };
    proposal.update(&next.phi, accepted);
    let sample = ChainSample {
        theta: model.from_unconstrained(&next.phi),
        sign: next.est.sign,
        accepted,
        nu: next.nu,
        log_abs_like: next.est.log_abs,
    };
    Ok((next, sample))
}

fn propose_state<M: DoublyIntractableModel + ?Sized>(
    model: &M,
    estimator: &LikelihoodEstimator,
    phi: Vec<f64>,
    store: BlockRandomStore,
    rng: &mut impl Rng,
) -> Option<PmmhState> {
    let log_prior = model.log_prior_unconstrained(&phi);
    if !log_prior.is_finite() {
        return None;
    }
    let theta = model.from_unconstrained(&phi);
    let log_f = model.log_f(&theta);
    if !log_f.is_finite() {
        return None;
    }
    let draws = bp::evaluate_draws(&store, &theta, model.provider());
    let z_p = draws.z_p_bar();
    if !(z_p > 0.0 && z_p.is_finite()) {
        return None;
    }
    let nu = draw_nu(model.n_aux(), z_p, rng);
    let est = estimator.combine(&draws, nu).ok()?;
    if !est.log_abs.is_finite() {
        return None;
    }
    Some(PmmhState { phi, nu, store, est, log_f, log_prior })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub estimator: LikelihoodEstimator,
    pub proposal: ProposalConfig,
    pub n_iter: usize,
    pub seed: u64,
    #[serde(default)]
    pub refresh: RefreshPolicy,
}

/// Runs a chain from `init_theta` (original coordinates). `progress` is called
/// with the number of completed iterations every 1000 iterations.
pub fn run_chain<M: DoublyIntractableModel + ?Sized>(
    model: &M,
    config: &ChainConfig,
    init_theta: &[f64],
    mut progress: impl FnMut(usize),
) -> Result<Chain> {
    if config.n_iter == 0 {
        return Err(Error::Config("n_iter must be at least 1".into()));
    }
    config.estimator.validate()?;
    config.proposal.validate()?;
    let mut rng: ChaCha8Rng = SubstreamKey::root(config.seed, 0).rng();
    let store_seed = SubstreamKey::root(config.seed, 1).digest();
    let mut state = init_state(model, &config.estimator, init_theta, store_seed, &mut rng)?;
    let mut proposal = RandomWalk::new(config.proposal.clone(), model.dim());
    let mut samples = Vec::with_capacity(config.n_iter);
    let start = Instant::now();
    for i in 0..config.n_iter {
        let (next, sample) = pmmh_step(state, model, &config.estimator, &mut proposal, config.refresh, i, &mut rng)?;
        state = next;
        samples.push(sample);
        if (i + 1) % 1000 == 0 {
            progress(i + 1);
        }
    }
    Ok(Chain { samples, runtime_secs: start.elapsed().as_secs_f64() })
}

/// Result of a sign-corrected average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignCorrected {
    pub value: f64,
    pub sum_signs: f64,
    pub n: usize,
    pub negative_fraction: f64,
    /// False when `|sum of signs| < 0.02 n`.
    pub reliable: bool,
}

/// `sum psi(theta_i) s_i / sum s_i` over iterates after `burn_in`.
pub fn sign_corrected_expectation(
    samples: &[ChainSample],
    psi: impl Fn(&[f64]) -> f64,
    burn_in: usize,
) -> Result<SignCorrected> {
    if samples.len() <= burn_in {
        return Err(Error::Config(format!("chain of length {} does not exceed burn-in {burn_in}", samples.len())));
    }
    let kept = &samples[burn_in..];
    let (mut num, mut den, mut neg) = (0.0, 0.0, 0usize);
    for s in kept {
        let sign = s.sign as f64;
        num += psi(&s.theta) * sign;
        den += sign;
        neg += (s.sign < 0) as usize;
    }
    let n = kept.len();
    Ok(SignCorrected {
        value: num / den,
        sum_signs: den,
        n,
        negative_fraction: neg as f64 / n as f64,
        reliable: den.abs() >= 0.02 * n as f64,
    })
}

/// Default burn-in: a quarter of the chain.
pub fn default_burn_in(n: usize) -> usize {
    n / 4
}
