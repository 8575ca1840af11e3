//! Brute-force enumeration for small lattices, used as a test oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::IsingLattice;
use crate::error::{Error, Result};
use crate::special::log_sum_exp;

pub const MAX_ENUMERATION_SIZE: usize = 4;

/// Number of configurations for each value of `S`, from all `2^{L^2}` states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatHistogram {
    pub l: usize,
    /// `(S, count)` pairs in increasing `S`.
    pub counts: Vec<(i64, u64)>,
}

impl StatHistogram {
    pub fn enumerate(l: usize) -> Result<Self> {
        if l == 0 || l > MAX_ENUMERATION_SIZE {
            return Err(Error::Config(format!("enumeration supports 1 <= L <= {MAX_ENUMERATION_SIZE}, got {l}")));
        }
        let max_s = 2 * l * (l - 1);
        let width = 2 * max_s + 1;
        let n_states = 1u64 << (l * l);
        let chunk = 1u64 << 10.min(l * l);
        let counts = (0..n_states.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let mut h = vec![0u64; width];
                for code in c * chunk..((c + 1) * chunk).min(n_states) {
                    let s = IsingLattice::from_code(l, code).suff_stat();
                    h[(s + max_s as i64) as usize] += 1;
                }
                h
            })
            .reduce(|| vec![0u64; width], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
        let counts = counts
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .map(|(i, c)| (i as i64 - max_s as i64, c))
            .collect();
        Ok(Self { l, counts })
    }

    pub fn log_z(&self, theta: f64) -> f64 {
        let terms: Vec<f64> = self.counts.iter().map(|&(s, c)| (c as f64).ln() + theta * s as f64).collect();
        log_sum_exp(&terms)
    }

    /// Exact probability of one configuration.
    pub fn prob(&self, theta: f64, s: i64) -> f64 {
        (theta * s as f64 - self.log_z(theta)).exp()
    }
}

/// `log sum_y exp(theta S(y))` by enumeration (`L <= 4`).
pub fn exact_log_z(theta: f64, l: usize) -> Result<f64> {
    Ok(StatHistogram::enumerate(l)?.log_z(theta))
}

/// Posterior of `theta` under a uniform prior on `[lo, hi]`, tabulated on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

fn simpson(h: f64, f: &[f64]) -> f64 {
    let n = f.len() - 1;
    debug_assert!(n % 2 == 0);
    let mut s = f[0] + f[n];
    for (i, v) in f.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Exact posterior for observed statistic `s_obs` via Simpson's rule on
/// `intervals` (even) subintervals of `[0, 1]`.
pub fn exact_posterior(hist: &StatHistogram, s_obs: i64, intervals: usize) -> ExactPosterior {
    let n = intervals + intervals % 2;
    let h = 1.0 / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let log_post: Vec<f64> = grid.iter().map(|&t| t * s_obs as f64 - hist.log_z(t)).collect();
    let top = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_post.iter().map(|v| (v - top).exp()).collect();
    let norm = simpson(h, &unnorm);
    let density: Vec<f64> = unnorm.iter().map(|v| v / norm).collect();
    let m1: Vec<f64> = grid.iter().zip(&density).map(|(t, d)| t * d).collect();
    let m2: Vec<f64> = grid.iter().zip(&density).map(|(t, d)| t * t * d).collect();
    let mean = simpson(h, &m1);
    let sd = (simpson(h, &m2) - mean * mean).max(0.0).sqrt();
    ExactPosterior { grid, density, mean, sd }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_trivial_cases() {
        for l in 1..=4 {
            let lz = exact_log_z(0.0, l).unwrap();
            assert!((lz - (l * l) as f64 * 2f64.ln()).abs() < 1e-12);
        }
        assert!((exact_log_z(0.7, 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(exact_log_z(0.1, 5).is_err());
    }

    #[test]
    fn two_by_two_by_hand() {
        let hist = StatHistogram::enumerate(2).unwrap();
        assert_eq!(hist.counts, vec![(-4, 2), (0, 12), (4, 2)]);
        let z = 2.0 * 2f64.exp() + 12.0 + 2.0 * (-2f64).exp();
        assert!((exact_log_z(0.5, 2).unwrap() - z.ln()).abs() < 1e-13);
    }

    #[test]
    fn posterior_integrates_to_one() {
        let hist = StatHistogram::enumerate(3).unwrap();
        let post = exact_posterior(&hist, 6, 2000);
        let h = post.grid[1] - post.grid[0];
        assert!((simpson(h, &post.density) - 1.0).abs() < 1e-12);
        assert!(post.mean > 0.0 && post.mean < 1.0);
        // a finer grid changes nothing material
        let fine = exact_posterior(&hist, 6, 8000);
        assert!((fine.mean - post.mean).abs() < 1e-10);
    }
}
