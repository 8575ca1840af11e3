//! Replicated estimation studies reporting RMSE against the truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{max_pseudo_likelihood, simulate_dataset, AisConfig, IsingModel};
use crate::kent::{fit_pmmh, mle_estimate, moment_estimate, posterior_means, sample, KentFitConfig, KentParams};
use crate::pmmh::{default_burn_in, run_chain, sign_corrected_expectation, ChainConfig};
use crate::rng::SubstreamKey;

/// A data-generating setup with several estimators to compare.
pub trait Scenario: Sync {
    fn name(&self) -> String;
    fn param_names(&self) -> Vec<String>;
    fn truth(&self) -> Vec<f64>;
    fn methods(&self) -> Vec<String>;
    /// Estimates `[method][param]` for the replicate driven by `seed`.
    fn replicate(&self, seed: u64) -> Result<Vec<Vec<f64>>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseCell {
    pub method: String,
    pub param: String,
    pub rmse: f64,
    /// Delta-method standard error of the RMSE.
    pub se: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub id: u64,
    pub estimates: Option<Vec<Vec<f64>>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub scenario: String,
    pub truth: Vec<f64>,
    pub cells: Vec<RmseCell>,
    pub replicates: Vec<ReplicateRecord>,
}

impl RmseTable {
    pub fn get(&self, method: &str, param: &str) -> Option<&RmseCell> {
        self.cells.iter().find(|c| c.method == method && c.param == param)
    }

    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.error.is_some()).count()
    }
}

/// RMSE of `errors` and its standard error.
pub fn rmse(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mse = sq.iter().sum::<f64>() / n;
    let var = if errors.len() > 1 { sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (n - 1.0) } else { f64::NAN };
    let r = mse.sqrt();
    let se = if r > 0.0 { (var / n).sqrt() / (2.0 * r) } else { 0.0 };
    (r, se)
}

/// Runs `n_replicates` independent replicates concurrently. Replicate `i`
/// draws everything from its own seed; failures are recorded and skipped.
pub fn rmse_study(scenario: &dyn Scenario, n_replicates: usize, seed: u64) -> RmseTable {
    let mut replicates: Vec<ReplicateRecord> = (0..n_replicates as u64)
        .into_par_iter()
        .map(|id| {
            let rep_seed = SubstreamKey::new(seed, id, 0, 0).digest();
            match scenario.replicate(rep_seed) {
                Ok(est) => ReplicateRecord { id, estimates: Some(est), error: None },
                Err(e) => ReplicateRecord { id, estimates: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    replicates.sort_by_key(|r| r.id);
    let truth = scenario.truth();
    let mut cells = Vec::new();
    for (mi, method) in scenario.methods().iter().enumerate() {
        for (pi, param) in scenario.param_names().iter().enumerate() {
            let errors: Vec<f64> =
                replicates.iter().filter_map(|r| r.estimates.as_ref()).map(|e| e[mi][pi] - truth[pi]).collect();
            let (r, se) = if errors.is_empty() { (f64::NAN, f64::NAN) } else { rmse(&errors) };
            cells.push(RmseCell { method: method.clone(), param: param.clone(), rmse: r, se, n: errors.len() });
        }
    }
    RmseTable { scenario: scenario.name(), truth, cells, replicates }
}

/// Kent data at known parameters, estimated by the Bayesian fit and the two
/// point estimators. Parameters are `beta`, `kappa` and `beta / kappa`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KentScenario {
    pub truth: KentParams,
    pub n: usize,
    pub fit: KentFitConfig,
}

impl KentScenario {
    /// Concentration `kappa` with ovalness ratio `ratio` and a fixed interior orientation.
    pub fn new(kappa: f64, ratio: f64, n: usize, fit: KentFitConfig) -> Self {
        Self { truth: KentParams::new(kappa, ratio * kappa, 1.0, 2.0, 1.2), n, fit }
    }
}

fn kent_summary(p: &KentParams) -> Vec<f64> {
    vec![p.beta, p.kappa, p.ratio()]
}

impl Scenario for KentScenario {
    fn name(&self) -> String {
        format!("kent-sim kappa={} ratio={} n={}", self.truth.kappa, self.truth.ratio(), self.n)
    }

    fn param_names(&self) -> Vec<String> {
        vec!["beta".into(), "kappa".into(), "ratio".into()]
    }

    fn truth(&self) -> Vec<f64> {
        kent_summary(&self.truth)
    }

    fn methods(&self) -> Vec<String> {
        vec!["bayes".into(), "moment".into(), "mle".into()]
    }

    fn replicate(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        let data = sample(&self.truth, self.n, &mut SubstreamKey::root(seed, 0).rng())?;
        let chain = fit_pmmh(&data, &KentFitConfig { seed: SubstreamKey::root(seed, 1).digest(), ..self.fit.clone() })?;
        let post = posterior_means(&chain, default_burn_in(chain.samples.len()))?;
        if !post.reliable {
            return Err(Error::Numerical("sign balance too weak for a corrected mean".into()));
        }
        Ok(vec![
            vec![post.beta, post.kappa, post.ratio],
            kent_summary(&moment_estimate(&data)?.params),
            kent_summary(&mle_estimate(&data)?.params),
        ])
    }
}

/// Perfectly sampled Ising lattices estimated by maximum pseudo-likelihood
/// and, optionally, by the signed PMMH posterior mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingScenario {
    pub theta: f64,
    pub l: usize,
    pub posterior: Option<(ChainConfig, AisConfig)>,
}

impl Scenario for IsingScenario {
    fn name(&self) -> String {
        format!("ising-sim theta={} L={}", self.theta, self.l)
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn truth(&self) -> Vec<f64> {
        vec![self.theta]
    }

    fn methods(&self) -> Vec<String> {
        let mut m = vec!["mpl".to_string()];
        if self.posterior.is_some() {
            m.push("bp".into());
        }
        m
    }

    fn replicate(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        let lat = simulate_dataset(self.theta, self.l, seed, 0)?;
        let mut out = vec![vec![max_pseudo_likelihood(&lat)]];
        if let Some((chain_cfg, ais)) = &self.posterior {
            let model = IsingModel::new(&lat, ais.clone())?;
            let cfg = ChainConfig { seed: SubstreamKey::root(seed, 1).digest(), ..chain_cfg.clone() };
            let init = self.theta.clamp(0.0, 1.0);
            let chain = run_chain(&model, &cfg, &[init], |_| {})?;
            let mean = sign_corrected_expectation(&chain.samples, |t| t[0], default_burn_in(chain.samples.len()))?;
            out.push(vec![mean.value]);
        }
        Ok(out)
    }
}

/// Scenario selection for configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum ScenarioConfig {
    KentSim { kappa: f64, ratio: f64, n: usize, #[serde(default)] fit: KentFitConfig },
    IsingSim { theta: f64, l: usize },
}

impl ScenarioConfig {
    pub fn build(&self) -> Box<dyn Scenario> {
        match self {
            Self::KentSim { kappa, ratio, n, fit } => Box::new(KentScenario::new(*kappa, *ratio, *n, fit.clone())),
            Self::IsingSim { theta, l } => Box::new(IsingScenario { theta: *theta, l: *l, posterior: None }),
        }
    }
}
