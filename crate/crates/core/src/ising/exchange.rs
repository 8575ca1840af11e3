//! Exchange algorithm with perfectly sampled auxiliary data, the reference
//! sampler for the Ising posterior.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::cftp::perfect_sample;
use crate::error::{Error, Result};
use crate::pmmh::{Chain, ChainSample};
use crate::rng::SubstreamKey;

const MAX_RETRIES: usize = 5;

/// One exchange update under a uniform prior on `[0, 1]`. Returns the new
/// `theta` and whether the move was accepted. `aux_key` addresses the
/// auxiliary draw; a failed draw is retried on child keys.
pub fn exchange_step(
    theta: f64,
    s_obs: i64,
    l: usize,
    step: f64,
    sweep_cap: u64,
    aux_key: &SubstreamKey,
    rng: &mut impl Rng,
) -> Result<(f64, bool)> {
    let proposal = theta + step * rng.sample::<f64, _>(StandardNormal);
    let u: f64 = rng.random();
    if !(0.0..=1.0).contains(&proposal) {
        return Ok((theta, false));
    }
    let mut last_err = None;
    for attempt in 0..MAX_RETRIES {
        let key = if attempt == 0 { *aux_key } else { aux_key.child(attempt as u64) };
        match perfect_sample(proposal, l, &key, sweep_cap) {
            Ok(w) => {
                let log_alpha = (proposal - theta) * (s_obs - w.suff_stat()) as f64;
                return Ok(if u.ln() < log_alpha.min(0.0) { (proposal, true) } else { (theta, false) });
            }
            Err(e @ Error::NoCoalescence { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Runs `n_iter` exchange updates, keeping every `thin`-th state.
pub fn run_exchange(
    s_obs: i64,
    l: usize,
    step: f64,
    n_iter: usize,
    thin: usize,
    init: f64,
    seed: u64,
    sweep_cap: u64,
) -> Result<Chain> {
    let mut rng = SubstreamKey::root(seed, 0).rng();
    let mut theta = init;
    let mut samples = Vec::with_capacity(n_iter / thin.max(1) + 1);
    let start = Instant::now();
    for i in 0..n_iter {
        let key = SubstreamKey::new(seed, 1, 0, i as u64);
        let (next, accepted) = exchange_step(theta, s_obs, l, step, sweep_cap, &key, &mut rng)?;
        theta = next;
        if (i + 1) % thin.max(1) == 0 {
            samples.push(ChainSample { theta: vec![theta], sign: 1, accepted, nu: f64::NAN, log_abs_like: f64::NAN });
        }
    }
    Ok(Chain { samples, runtime_secs: start.elapsed().as_secs_f64() })
}
