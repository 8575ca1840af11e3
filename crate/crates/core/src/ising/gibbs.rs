//! Heat-bath dynamics for `p(y) ∝ exp(beta theta S(y))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lattice::IsingLattice;

/// Conditional probability that a site is +1 given neighbour sum `k`:
/// `1 / (1 + exp(-2 beta theta k))`.
#[inline]
pub fn prob_up(beta_theta: f64, k: i32) -> f64 {
    1.0 / (1.0 + (-2.0 * beta_theta * k as f64).exp())
}

/// `prob_up` for every neighbour sum in `-4..=4`, indexed by `k + 4`.
#[derive(Clone, Copy, Debug)]
pub struct HeatBathTable([f64; 9]);

impl HeatBathTable {
    pub fn new(beta_theta: f64) -> Self {
        let mut t = [0.0; 9];
        for (i, p) in t.iter_mut().enumerate() {
            *p = prob_up(beta_theta, i as i32 - 4);
        }
        Self(t)
    }

    #[inline]
    pub fn get(&self, k: i32) -> f64 {
        self.0[(k + 4) as usize]
    }
}

/// Resamples site `idx` from its conditional using the uniform `u`.
#[inline]
pub fn heat_bath_site(lattice: &mut IsingLattice, idx: usize, table: &HeatBathTable, u: f64) {
    let k = lattice.neighbour_sum(idx);
    lattice.set_with_neighbour_sum(idx, if u < table.get(k) { 1 } else { -1 }, k);
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// One update at a uniformly chosen site.
    #[default]
    RandomSite,
    /// One update at every site in row-major order.
    Raster,
}

/// One heat-bath step at inverse temperature `beta` (so the target is
/// `exp(beta theta S)`).
pub fn gibbs_sweep(lattice: &mut IsingLattice, theta: f64, beta: f64, mode: SweepMode, rng: &mut impl Rng) {
    let table = HeatBathTable::new(beta * theta);
    let n = lattice.size() * lattice.size();
    match mode {
        SweepMode::RandomSite => {
            let idx = rng.random_range(0..n);
            heat_bath_site(lattice, idx, &table, rng.random());
        }
        SweepMode::Raster => {
            for idx in 0..n {
                heat_bath_site(lattice, idx, &table, rng.random());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::exact::StatHistogram;
    use crate::rng::SubstreamKey;

    #[test]
    fn probability_limits() {
        assert_eq!(prob_up(0.0, 4), 0.5);
        assert!(prob_up(50.0, 4) > 1.0 - 1e-12);
        assert!((prob_up(0.3, 2) + prob_up(0.3, -2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_beta_is_uniform() {
        let mut rng = SubstreamKey::root(1, 0).rng();
        let mut lat = IsingLattice::filled(3, 1);
        let mut ups = 0;
        for _ in 0..20_000 {
            gibbs_sweep(&mut lat, 0.8, 0.0, SweepMode::Raster, &mut rng);
            ups += (lat.get(1, 1) == 1) as usize;
        }
        assert!((ups as f64 / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn single_site_chain_matches_enumeration() {
        // chi-square over all 512 states of a 3x3 lattice at theta = 0.2
        let theta = 0.2;
        let hist = StatHistogram::enumerate(3).unwrap();
        let log_z = hist.log_z(theta);
        let mut rng = SubstreamKey::root(2, 0).rng();
        let mut lat = IsingLattice::filled(3, 1);
        let mut counts = vec![0u64; 512];
        let thin = 100;
        let n = 100_000;
        for _ in 0..1000 {
            gibbs_sweep(&mut lat, theta, 1.0, SweepMode::RandomSite, &mut rng);
        }
        for _ in 0..n {
            for _ in 0..thin {
                gibbs_sweep(&mut lat, theta, 1.0, SweepMode::RandomSite, &mut rng);
            }
            counts[lat.code() as usize] += 1;
        }
        let chi2: f64 = (0..512u64)
            .map(|c| {
                let s = IsingLattice::from_code(3, c).suff_stat();
                let e = n as f64 * (theta * s as f64 - log_z).exp();
                (counts[c as usize] as f64 - e).powi(2) / e
            })
            .sum();
        // 99th percentile of chi-square with 511 degrees of freedom
        assert!(chi2 < 588.3, "chi2 = {chi2}");
    }
}
