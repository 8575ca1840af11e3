//! Annealed importance sampling estimate of `Z(theta)`.
//!
//! Particles start uniform (`beta = 0`, normaliser `2^{-L^2}` cancelled by the
//! uniform base density) and move through equally spaced temperatures with one
//! random-site heat-bath update per rung. Because the rungs are equally spaced
//! the log weight of a particle reduces to
//!
//! ```text
//! log w = L^2 log 2 + (theta / N) sum_{i=0}^{N-1} S(y_i).
//! ```

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gibbs::{heat_bath_site, HeatBathTable};
use super::lattice::IsingLattice;
use crate::bp::ZHatProvider;
use crate::error::{Error, Result};
use crate::rng::SubstreamKey;
use crate::special::log_mean_exp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AisConfig {
    /// Number of temperature increments `N`; rungs are `beta_i = i / N`.
    pub n_temps: usize,
    /// Particles averaged per estimate.
    pub n_particles: usize,
}

impl Default for AisConfig {
    fn default() -> Self {
        Self { n_temps: 4000, n_particles: 100 }
    }
}

impl AisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_temps < 2 {
            return Err(Error::Config(format!("AIS needs at least 2 temperatures, got {}", self.n_temps)));
        }
        if self.n_particles == 0 {
            return Err(Error::Config("AIS needs at least one particle".into()));
        }
        Ok(())
    }
}

/// Log weight of every particle.
pub fn ais_log_weights(theta: f64, l: usize, config: &AisConfig, key: &SubstreamKey) -> Vec<f64> {
    let n_sites = l * l;
    let n = config.n_temps;
    let tables: Vec<HeatBathTable> = (1..n).map(|i| HeatBathTable::new(theta * i as f64 / n as f64)).collect();
    let base = n_sites as f64 * std::f64::consts::LN_2;
    (0..config.n_particles)
        .map(|p| {
            let mut rng = key.child(p as u64).rng();
            let mut lat = IsingLattice::random(l, &mut rng);
            let mut sum_s = lat.suff_stat();
            for table in &tables {
                let idx = rng.random_range(0..n_sites);
                heat_bath_site(&mut lat, idx, table, rng.random());
                sum_s += lat.suff_stat();
            }
            base + theta * sum_s as f64 / n as f64
        })
        .collect()
}

/// `log Zhat(theta)`, the log of the mean particle weight.
pub fn ais_log_z_hat(theta: f64, l: usize, config: &AisConfig, key: &SubstreamKey) -> f64 {
    log_mean_exp(&ais_log_weights(theta, l, config, key))
}

/// Unbiased estimate of `Z(theta)`.
pub fn ais_z_hat(theta: f64, l: usize, config: &AisConfig, key: &SubstreamKey) -> f64 {
    ais_log_z_hat(theta, l, config, key).exp()
}

/// AIS normalizer provider for an `L x L` lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AisProvider {
    pub l: usize,
    pub config: AisConfig,
}

impl ZHatProvider for AisProvider {
    fn z_hat(&self, theta: &[f64], key: &SubstreamKey) -> f64 {
        ais_z_hat(theta[0], self.l, &self.config, key)
    }

    fn z_hat_batch(&self, theta: &[f64], keys: &[SubstreamKey]) -> Vec<f64> {
        keys.par_iter().map(|k| self.z_hat(theta, k)).collect()
    }
}
