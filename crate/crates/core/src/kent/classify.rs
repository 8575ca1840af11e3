//! Posterior predictive classification between two groups.
//!
//! For a posterior iterate `theta` the predictive density of `y` is
//! `f(y | theta) / c(kappa, beta)`. The reciprocal normalizer is
//! `1/c = int exp(-nu c) d nu`, estimated by importance sampling with
//! `nu_k ~ Expon(c_hat)` and a block-Poisson estimate of each `exp(-nu_k c)`:
//!
//! ```text
//! 1/c ~ (1 / (M c_hat)) sum_k exp_BP(-nu_k c) / exp(-nu_k c_hat).
//! ```
//!
//! Averaging over iterates uses the chain signs.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::SphericalData;
use super::density::{log_density, log_f};
use super::mle::mle_estimate;
use super::model::{fit_pmmh, KentFitConfig};
use super::moment::moment_estimate;
use super::normalizer::{KentNormalizer, NormalizerConfig};
use super::params::{Frame, KentParams};
use crate::bp::{self, BpConfig, ZHatProvider};
use crate::error::{Error, Result};
use crate::pmmh::Chain;
use crate::rng::SubstreamKey;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub bp: BpConfig,
    #[serde(default)]
    pub normalizer: NormalizerConfig,
    /// Importance draws of `nu` per iterate.
    pub n_nu: usize,
    /// Keep every `thin`-th post-burn-in iterate.
    pub thin: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { bp: BpConfig::new(20, 1.0).expect("valid defaults"), normalizer: NormalizerConfig::default(), n_nu: 10, thin: 20 }
    }
}

/// Thinned, signed posterior iterates of one group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPosterior {
    pub draws: Vec<(KentParams, i8)>,
}

impl GroupPosterior {
    pub fn from_chain(chain: &Chain, burn_in: usize, thin: usize) -> Result<Self> {
        let draws: Vec<(KentParams, i8)> = chain
            .samples
            .iter()
            .skip(burn_in)
            .step_by(thin.max(1))
            .map(|s| (KentParams::from_slice(&s.theta), s.sign))
            .collect();
        if draws.is_empty() {
            return Err(Error::Data("group posterior has no iterates after burn-in".into()));
        }
        Ok(Self { draws })
    }

    /// The same posterior reflected through the origin.
    pub fn mirrored(&self) -> Self {
        let draws = self
            .draws
            .iter()
            .map(|(p, s)| {
                let f = p.frame();
                let m = Frame { g1: -f.g1, g2: f.g2, g3: -f.g3 };
                (KentParams::from_frame(p.kappa, p.beta, &m), *s)
            })
            .collect();
        Self { draws }
    }
}

/// A signed quantity `sign * exp(log_abs)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    pub sign: i8,
    pub log_abs: f64,
}

impl SignedLog {
    fn value_cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self.sign, other.sign) {
            (a, b) if a != b => a.cmp(&b),
            (0, 0) => Ordering::Equal,
            (1, _) => self.log_abs.total_cmp(&other.log_abs),
            _ => other.log_abs.total_cmp(&self.log_abs),
        }
    }
}

/// Signed sum of `sign_i exp(l_i)`.
fn signed_log_sum(terms: &[(i8, f64)]) -> SignedLog {
    let max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return SignedLog { sign: 0, log_abs: f64::NEG_INFINITY };
    }
    let s: f64 = terms.iter().map(|(sg, l)| *sg as f64 * (l - max).exp()).sum();
    if s == 0.0 {
        SignedLog { sign: 0, log_abs: f64::NEG_INFINITY }
    } else {
        SignedLog { sign: if s > 0.0 { 1 } else { -1 }, log_abs: max + s.abs().ln() }
    }
}

/// Estimate of `1/c(kappa, beta)` (signed, in logs) for one iterate.
fn reciprocal_normalizer(p: &KentParams, cfg: &ClassifierConfig, key: &SubstreamKey) -> Result<SignedLog> {
    let provider = KentNormalizer { config: cfg.normalizer };
    let theta = p.to_vec();
    let c_hat = provider.z_hat(&theta, &key.child(0));
    let mut rng = key.child(1).rng();
    let exp = Exp::new(c_hat).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut terms = Vec::with_capacity(cfg.n_nu);
    for k in 0..cfg.n_nu {
        let nu: f64 = exp.sample(&mut rng);
        let store = bp::draw_store(&cfg.bp, key.child(2 + k as u64).digest());
        let draws = bp::evaluate_draws(&store, &theta, &provider);
        let a = bp::soft_lower_bound(draws.independent, nu, cfg.bp.m, cfg.bp.lambda);
        let est = bp::combine(&cfg.bp, &draws, nu, a)?;
        terms.push((est.sign, est.log_abs + nu * c_hat));
    }
    let s = signed_log_sum(&terms);
    Ok(SignedLog { sign: s.sign, log_abs: s.log_abs - (cfg.n_nu as f64).ln() - c_hat.ln() })
}

/// Posterior predictive density of `y` under one group.
pub fn log_predictive(y: &Vector3<f64>, group: &GroupPosterior, cfg: &ClassifierConfig, key: &SubstreamKey) -> Result<SignedLog> {
    let mut num = Vec::with_capacity(group.draws.len());
    let mut sum_signs = 0.0;
    for (t, (p, s)) in group.draws.iter().enumerate() {
        let inv_c = reciprocal_normalizer(p, cfg, &key.child(t as u64))?;
        num.push((inv_c.sign * s, log_f(y, p) + inv_c.log_abs));
        sum_signs += *s as f64;
    }
    if sum_signs == 0.0 {
        return Err(Error::Numerical("group posterior signs cancel exactly".into()));
    }
    let s = signed_log_sum(&num);
    let sign = if sum_signs > 0.0 { s.sign } else { -s.sign };
    Ok(SignedLog { sign, log_abs: s.log_abs - sum_signs.abs().ln() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: u8,
    pub predictive: [SignedLog; 2],
    /// The two predictive estimates were equal; the label defaults to 1.
    pub tie: bool,
}

/// Assigns `y` to the group with the larger predictive density. Both groups
/// use the same random numbers.
pub fn classify(y: &Vector3<f64>, g1: &GroupPosterior, g2: &GroupPosterior, cfg: &ClassifierConfig, key: &SubstreamKey) -> Result<Classification> {
    let p1 = log_predictive(y, g1, cfg, key)?;
    let p2 = log_predictive(y, g2, cfg, key)?;
    let ord = p1.value_cmp(&p2);
    Ok(Classification {
        label: if ord == std::cmp::Ordering::Less { 2 } else { 1 },
        predictive: [p1, p2],
        tie: ord == std::cmp::Ordering::Equal,
    })
}

/// Plug-in classification with point estimates.
pub fn classify_plug_in(y: &Vector3<f64>, p1: &KentParams, p2: &KentParams) -> u8 {
    if log_density(y, p2) > log_density(y, p1) {
        2
    } else {
        1
    }
}

/// Per-fold accuracies of the three classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldAccuracy {
    pub fold: usize,
    pub n_test: usize,
    pub bayes: f64,
    pub moment: f64,
    pub mle: f64,
}

fn split_groups(train: &SphericalData) -> Result<(SphericalData, SphericalData)> {
    let (a, b) = (train.group(1), train.group(2));
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("each training fold needs observations from both groups".into()));
    }
    Ok((a, b))
}

/// `k`-fold cross validation on labelled data. Folds run in parallel.
pub fn cross_validate(
    data: &SphericalData,
    k: usize,
    fit: &KentFitConfig,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<Vec<FoldAccuracy>> {
    let labels = data.groups().ok_or_else(|| Error::Data("cross validation needs group labels".into()))?;
    if k < 2 || k > data.len() {
        return Err(Error::Config(format!("fold count {k} must lie in [2, {}]", data.len())));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut SubstreamKey::root(seed, 0xcf).rng());
    let folds: Vec<Vec<usize>> = (0..k).map(|f| idx.iter().copied().skip(f).step_by(k).collect()).collect();
    let mut out: Vec<FoldAccuracy> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = idx.iter().copied().filter(|i| !test.contains(i)).collect();
            let (t1, t2) = split_groups(&data.subset(&train))?;
            let fit_seed = SubstreamKey::new(seed, f as u64, 0, 0).digest();
            let c1 = fit_pmmh(&t1, &KentFitConfig { seed: fit_seed, ..fit.clone() })?;
            let c2 = fit_pmmh(&t2, &KentFitConfig { seed: fit_seed ^ 1, ..fit.clone() })?;
            let burn = fit.n_iter / 4;
            let g1 = GroupPosterior::from_chain(&c1, burn, cfg.thin)?;
            let g2 = GroupPosterior::from_chain(&c2, burn, cfg.thin)?;
            let (m1, m2) = (moment_estimate(&t1)?.params, moment_estimate(&t2)?.params);
            let (l1, l2) = (mle_estimate(&t1)?.params, mle_estimate(&t2)?.params);
            let (mut bayes, mut moment, mut mle) = (0usize, 0usize, 0usize);
            for (j, &i) in test.iter().enumerate() {
                let y = &data.points()[i];
                let truth = labels[i];
                let key = SubstreamKey::new(seed, f as u64, 1, j as u64);
                bayes += (classify(y, &g1, &g2, cfg, &key)?.label == truth) as usize;
                moment += (classify_plug_in(y, &m1, &m2) == truth) as usize;
                mle += (classify_plug_in(y, &l1, &l2) == truth) as usize;
            }
            let n = test.len() as f64;
            Ok(FoldAccuracy { fold: f, n_test: test.len(), bayes: bayes as f64 / n, moment: moment as f64 / n, mle: mle as f64 / n })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|a| a.fold);
    Ok(out)
}

/// Random two-group labelled data for exercising the classifiers.
pub fn two_group_data(p1: &KentParams, p2: &KentParams, n_each: usize, rng: &mut impl Rng) -> Result<SphericalData> {
    let a = super::sampler::sample(p1, n_each, rng)?;
    let b = super::sampler::sample(p2, n_each, rng)?;
    let points = a.points().iter().chain(b.points()).copied().collect();
    let groups = std::iter::repeat_n(1, n_each).chain(std::iter::repeat_n(2, n_each)).collect();
    SphericalData::with_groups(points, groups)
}
