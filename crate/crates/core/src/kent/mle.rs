//! Maximum likelihood by Nelder-Mead on the unconstrained coordinates,
//! started at the moment estimate, with the normalizer summed to convergence.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use super::data::{SphericalData, SufficientStats};
use super::density::log_f_stats;
use super::moment::moment_estimate;
use super::normalizer::log_c;
use super::params::KentParams;
use crate::error::{Error, Result};

const MAX_ITERS: u64 = 4000;
const RESTARTS: usize = 3;
/// Smallest ovalness ratio used when starting from a moment estimate.
const MIN_START_RATIO: f64 = 1e-3;
/// Largest ovalness ratio used when starting from a moment estimate.
const MAX_START_RATIO: f64 = 0.45;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate {
    pub params: KentParams,
    pub log_likelihood: f64,
    pub converged: bool,
}

/// Log likelihood `sum_i log f(y_i) - n log c` at `params`.
pub fn log_likelihood(stats: &SufficientStats, params: &KentParams) -> f64 {
    log_f_stats(stats, params) - stats.n as f64 * log_c(params.kappa, params.beta)
}

struct NegLogLik {
    stats: SufficientStats,
}

impl CostFunction for NegLogLik {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, phi: &Self::Param) -> std::result::Result<f64, ArgminError> {
        let p = KentParams::from_unconstrained(phi);
        if !(p.kappa.is_finite() && p.kappa > 0.0 && p.beta > 0.0 && 2.0 * p.beta < p.kappa) || p.kappa > 700.0 {
            return Ok(f64::INFINITY);
        }
        let ll = log_likelihood(&self.stats, &p);
        Ok(if ll.is_finite() { -ll } else { f64::INFINITY })
    }
}

/// A starting point strictly inside the parameter space.
pub fn interior_start(p: &KentParams) -> KentParams {
    use std::f64::consts::PI;
    let eps = 1e-6;
    let ratio = p.ratio().clamp(MIN_START_RATIO, MAX_START_RATIO);
    KentParams {
        kappa: p.kappa.min(500.0),
        beta: ratio * p.kappa.min(500.0),
        psi: p.psi.clamp(eps, PI - eps),
        alpha: p.alpha.clamp(eps, 2.0 * PI - eps),
        eta: p.eta.clamp(eps, PI - eps),
    }
}

fn simplex(center: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut s = vec![center.to_vec()];
    for i in 0..center.len() {
        let mut v = center.to_vec();
        v[i] += step;
        s.push(v);
    }
    s
}

pub fn mle_estimate(data: &SphericalData) -> Result<MleEstimate> {
    let start = interior_start(&moment_estimate(data)?.params);
    mle_from(data, &start)
}

/// Maximizes the likelihood from `start`, restarting the simplex at the best
/// point found so far.
pub fn mle_from(data: &SphericalData, start: &KentParams) -> Result<MleEstimate> {
    let stats = data.stats();
    let mut best = start.to_unconstrained();
    let mut best_cost = NegLogLik { stats }.cost(&best).map_err(|e| Error::Numerical(e.to_string()))?;
    if !best_cost.is_finite() {
        return Err(Error::Numerical(format!("likelihood is not finite at the start {start:?}")));
    }
    let mut converged = false;
    for round in 0..RESTARTS {
        let step = 0.5 / (1 << round) as f64;
        let solver = NelderMead::new(simplex(&best, step))
            .with_sd_tolerance(1e-10)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let res = Executor::new(NegLogLik { stats }, solver)
            .configure(|state| state.max_iters(MAX_ITERS))
            .run()
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let state = res.state();
        converged = matches!(state.get_termination_status(), TerminationStatus::Terminated(TerminationReason::SolverConverged));
        let improvement = best_cost - state.get_best_cost();
        if let Some(p) = state.get_best_param() {
            if state.get_best_cost() <= best_cost {
                best = p.clone();
                best_cost = state.get_best_cost();
            }
        }
        if converged && improvement < 1e-9 {
            break;
        }
    }
    Ok(MleEstimate { params: KentParams::from_unconstrained(&best), log_likelihood: -best_cost, converged })
}
