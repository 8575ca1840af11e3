//! Nonparametric bootstrap intervals for the point estimators.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::SphericalData;
use super::mle::mle_estimate;
use super::moment::moment_estimate;
use super::params::KentParams;
use crate::error::{Error, Result};
use crate::rng::SubstreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointMethod {
    Moment,
    Mle,
}

impl PointMethod {
    pub fn estimate(&self, data: &SphericalData) -> Result<KentParams> {
        match self {
            Self::Moment => Ok(moment_estimate(data)?.params),
            Self::Mle => Ok(mle_estimate(data)?.params),
        }
    }
}

/// Percentile interval of one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub method: PointMethod,
    pub replicates: usize,
    pub failures: usize,
    pub kappa: Interval,
    pub beta: Interval,
    pub ratio: Interval,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interval(estimate: f64, mut values: Vec<f64>, level: f64) -> Interval {
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Interval { estimate, lower: percentile(&values, tail), upper: percentile(&values, 1.0 - tail) }
}

/// Resamples the data `replicates` times; replicates whose estimator fails
/// are counted and skipped.
pub fn bootstrap(data: &SphericalData, method: PointMethod, replicates: usize, level: f64, seed: u64) -> Result<BootstrapResult> {
    if replicates < 2 {
        return Err(Error::Config("bootstrap needs at least 2 replicates".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("interval level must lie in (0,1), got {level}")));
    }
    let full = method.estimate(data)?;
    let n = data.len();
    let estimates: Vec<Option<KentParams>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = SubstreamKey::new(seed, 0xb0, 0, r as u64).rng();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            method.estimate(&data.subset(&idx)).ok()
        })
        .collect();
    let ok: Vec<KentParams> = estimates.iter().flatten().copied().collect();
    if ok.len() < 2 {
        return Err(Error::Numerical("fewer than two bootstrap replicates succeeded".into()));
    }
    Ok(BootstrapResult {
        method,
        replicates,
        failures: replicates - ok.len(),
        kappa: interval(full.kappa, ok.iter().map(|p| p.kappa).collect(), level),
        beta: interval(full.beta, ok.iter().map(|p| p.beta).collect(), level),
        ratio: interval(full.ratio(), ok.iter().map(|p| p.ratio()).collect(), level),
    })
}
