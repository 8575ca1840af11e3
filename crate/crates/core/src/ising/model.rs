use serde::{Deserialize, Serialize};

use super::ais::{AisConfig, AisProvider};
use super::cftp::{perfect_sample, DEFAULT_SWEEP_CAP};
use super::lattice::IsingLattice;
use crate::bp::ZHatProvider;
use crate::error::{Error, Result};
use crate::pmmh::DoublyIntractableModel;
use crate::rng::SubstreamKey;

/// Ising posterior with a uniform prior on `[0, 1]` and an AIS normalizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    pub l: usize,
    pub s_obs: i64,
    pub provider: AisProvider,
}

impl IsingModel {
    pub fn new(data: &IsingLattice, ais: AisConfig) -> Result<Self> {
        ais.validate()?;
        Ok(Self { l: data.size(), s_obs: data.suff_stat(), provider: AisProvider { l: data.size(), config: ais } })
    }
}

impl DoublyIntractableModel for IsingModel {
    fn dim(&self) -> usize {
        1
    }

    fn log_f(&self, theta: &[f64]) -> f64 {
        theta[0] * self.s_obs as f64
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        if (0.0..=1.0).contains(&theta[0]) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn provider(&self) -> &dyn ZHatProvider {
        &self.provider
    }
}

/// Derivative of the log pseudo-likelihood `sum_i log sigma(2 theta y_i k_i)`.
fn pseudo_score(lattice: &IsingLattice, theta: f64) -> f64 {
    (0..lattice.spins().len())
        .map(|idx| {
            let yk = lattice.spins()[idx] as f64 * lattice.neighbour_sum(idx) as f64;
            2.0 * yk / (1.0 + (2.0 * theta * yk).exp())
        })
        .sum()
}

/// Maximum pseudo-likelihood estimate of `theta`, searched on `[-5, 5]`.
/// The pseudo-likelihood is concave, so bisection on its score suffices.
pub fn max_pseudo_likelihood(lattice: &IsingLattice) -> f64 {
    let (mut lo, mut hi) = (-5.0, 5.0);
    if pseudo_score(lattice, lo) <= 0.0 {
        return lo;
    }
    if pseudo_score(lattice, hi) >= 0.0 {
        return hi;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if pseudo_score(lattice, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Perfectly sampled dataset addressed by `(seed, index)`.
pub fn simulate_dataset(theta: f64, l: usize, seed: u64, index: u64) -> Result<IsingLattice> {
    perfect_sample(theta, l, &SubstreamKey::new(seed, 0x15, 0, index), DEFAULT_SWEEP_CAP)
}

/// Perfect samples used to estimate the mean and spread of `S` at `theta`.
pub const SELECTION_POOL: u64 = 200;

/// Mean and standard deviation of the statistic over [`SELECTION_POOL`]
/// perfect samples, drawn from a stream separate from the candidates.
pub fn statistic_moments(theta: f64, l: usize, seed: u64) -> Result<(f64, f64)> {
    let stats = (0..SELECTION_POOL)
        .map(|i| perfect_sample(theta, l, &SubstreamKey::new(seed, 0x16, 0, i), DEFAULT_SWEEP_CAP).map(|lat| lat.suff_stat() as f64))
        .collect::<Result<Vec<f64>>>()?;
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// First dataset (by index) whose statistic `S` lies within `tol` standard
/// deviations of its mean at `theta`, searching at most `max_tries`
/// candidates. The posterior depends on a lattice only through `S`, so this
/// picks a dataset whose likelihood peaks near `theta`. Returns the index and
/// the lattice.
pub fn select_dataset(theta: f64, l: usize, seed: u64, tol: f64, max_tries: u64) -> Result<(u64, IsingLattice)> {
    let (mean, sd) = statistic_moments(theta, l, seed)?;
    for index in 0..max_tries {
        let lat = simulate_dataset(theta, l, seed, index)?;
        if (lat.suff_stat() as f64 - mean).abs() <= tol * sd {
            return Ok((index, lat));
        }
    }
    Err(Error::Data(format!(
        "no dataset with S within {tol} sd of its mean {mean:.2} at theta = {theta} in {max_tries} tries"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_support() {
        let m = IsingModel::new(&IsingLattice::filled(3, 1), AisConfig { n_temps: 10, n_particles: 2 }).unwrap();
        assert_eq!(m.log_prior(&[0.5]), 0.0);
        assert_eq!(m.log_prior(&[1.01]), f64::NEG_INFINITY);
        assert_eq!(m.log_prior(&[-0.01]), f64::NEG_INFINITY);
        assert_eq!(m.log_f(&[0.5]), 0.5 * 12.0);
    }

    #[test]
    fn pseudo_likelihood_recovers_truth_roughly() {
        let mut errs = Vec::new();
        for i in 0..10 {
            let lat = simulate_dataset(0.2, 30, 77, i).unwrap();
            errs.push(max_pseudo_likelihood(&lat) - 0.2);
        }
        let mean_err = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(mean_err.abs() < 0.03, "{errs:?}");
    }

    #[test]
    fn pseudo_likelihood_at_extremes() {
        // a checkerboard has every pair disagreeing
        let spins = (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 1 } else { -1 }).collect();
        let lat = IsingLattice::from_spins(4, spins).unwrap();
        assert_eq!(max_pseudo_likelihood(&lat), -5.0);
        assert_eq!(max_pseudo_likelihood(&IsingLattice::filled(4, 1)), 5.0);
    }
}
