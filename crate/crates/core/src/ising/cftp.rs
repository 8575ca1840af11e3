//! Monotone coupling from the past for the ferromagnetic model.
//!
//! Two chains started from all +1 and all -1 are driven by the same heat-bath
//! uniforms. The sweep at time `-t` always draws its uniforms from substream
//! `t`, so extending the start further into the past reuses the randomness of
//! the more recent sweeps.

use rand::Rng;

use super::gibbs::{heat_bath_site, HeatBathTable};
use super::lattice::IsingLattice;
use crate::error::{Error, Result};
use crate::rng::SubstreamKey;

/// Default bound on the number of sweeps in the longest epoch.
pub const DEFAULT_SWEEP_CAP: u64 = 1 << 20;

/// Exact draw from `p(y) ∝ exp(theta S(y))` for `theta >= 0`.
pub fn perfect_sample(theta: f64, l: usize, key: &SubstreamKey, sweep_cap: u64) -> Result<IsingLattice> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Config(format!("perfect sampling needs theta >= 0, got {theta}")));
    }
    let n = l * l;
    let table = HeatBathTable::new(theta);
    let mut horizon = 1u64;
    loop {
        let mut upper = IsingLattice::filled(l, 1);
        let mut lower = IsingLattice::filled(l, -1);
        for t in (1..=horizon).rev() {
            let mut rng = key.child(t).rng();
            for idx in 0..n {
                let u: f64 = rng.random();
                heat_bath_site(&mut upper, idx, &table, u);
                heat_bath_site(&mut lower, idx, &table, u);
            }
            if !upper.dominates(&lower) {
                return Err(Error::MonotonicityViolated { sweep: t });
            }
        }
        if upper == lower {
            return Ok(upper);
        }
        if horizon >= sweep_cap {
            return Err(Error::NoCoalescence { cap: sweep_cap });
        }
        horizon = (2 * horizon).min(sweep_cap);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_theta_refused() {
        assert!(matches!(perfect_sample(-0.1, 3, &SubstreamKey::root(0, 0), 16), Err(Error::Config(_))));
    }

    #[test]
    fn cap_reports_failure() {
        // strong coupling on a larger lattice cannot coalesce in two sweeps
        let r = perfect_sample(2.0, 8, &SubstreamKey::root(1, 0), 2);
        assert!(matches!(r, Err(Error::NoCoalescence { cap: 2 })));
    }

    #[test]
    fn deterministic_given_key() {
        let k = SubstreamKey::root(9, 3);
        assert_eq!(perfect_sample(0.3, 6, &k, DEFAULT_SWEEP_CAP).unwrap(), perfect_sample(0.3, 6, &k, DEFAULT_SWEEP_CAP).unwrap());
    }
}
