//! Small numerical helpers shared by the estimators and the tuning formulas.

use statrs::function::erf::erfc;
pub use statrs::function::gamma::{digamma, ln_gamma};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Trigamma function for x > 0 (recurrence up to x >= 10, then the asymptotic series).
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/2x^2 + sum B_2k / x^(2k+1)
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))));
    acc + series
}

/// `ln(sum(exp(xs)))` without overflow. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(mean(exp(xs)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

pub fn ln_poisson_pmf(j: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    j as f64 * mean.ln() - mean - ln_gamma(j as f64 + 1.0)
}

/// `E[g(J)]` for `J ~ Poisson(mean)`, summing outward from the mode until the
/// remaining mass on each side is provably below `tol`.
///
/// Weights come from the ratio recurrence relative to the mode and are
/// normalised by their own sum, so the result does not inherit the rounding of
/// `ln_gamma` at large means.
pub fn poisson_expectation(mean: f64, tol: f64, mut g: impl FnMut(u64) -> f64) -> f64 {
    assert!(mean >= 0.0 && mean.is_finite(), "poisson mean must be finite and non-negative");
    if mean == 0.0 {
        return g(0);
    }
    let mode = mean.floor() as u64;
    let p_mode = ln_poisson_pmf(mode, mean).exp();
    let (mut mass, mut total) = (1.0, g(mode));

    let mut w = 1.0;
    let mut j = mode;
    loop {
        // tail above j is at most p_j (j+1)/(j+1-mean) once j+1 > mean
        let jp = (j + 1) as f64;
        if jp > mean && p_mode * w * jp / (jp - mean) < tol {
            break;
        }
        w *= mean / jp;
        j += 1;
        mass += w;
        total += w * g(j);
    }
    let mut w = 1.0;
    let mut j = mode;
    while j > 0 {
        let jf = j as f64;
        if jf < mean && p_mode * w / (1.0 - jf / mean) < tol {
            break;
        }
        w *= jf / mean;
        j -= 1;
        mass += w;
        total += w * g(j);
    }
    total / mass
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigamma_known_values() {
        // psi1(1) = pi^2/6, psi1(1/2) = pi^2/2
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((trigamma(1.0) - pi2 / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5) - pi2 / 2.0).abs() < 1e-12);
        // recurrence
        for &x in &[0.3, 2.7, 15.0, 120.0] {
            let lhs = trigamma(x) - trigamma(x + 1.0);
            assert!((lhs - 1.0 / (x * x)).abs() < 1e-12 * (1.0 / (x * x)).max(1.0));
        }
    }

    #[test]
    fn digamma_half() {
        // psi(1/2) = -gamma - 2 ln 2
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(0.5) + euler + 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn poisson_expectation_moments() {
        for &mu in &[0.3, 1.0, 7.5, 250.0, 4.0e4] {
            let mass = poisson_expectation(mu, 1e-14, |_| 1.0);
            let mean = poisson_expectation(mu, 1e-14, |j| j as f64);
            let second = poisson_expectation(mu, 1e-14, |j| (j as f64 - mu).powi(2));
            assert!((mass - 1.0).abs() < 1e-11, "mass {mass} at {mu}");
            assert!((mean - mu).abs() < 1e-9 * mu.max(1.0));
            assert!((second - mu).abs() < 1e-8 * mu.max(1.0));
        }
    }

    #[test]
    fn lse_is_stable() {
        let xs = [1000.0, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_mean_exp(&[-3.0, -3.0, -3.0]) + 3.0).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert_eq!(normal_cdf(0.0), 0.5);
        let v = normal_cdf(1.96);
        // statrs erfc is accurate to roughly 1e-10 relative
        assert!((v - 0.975_002_104_851_779_5).abs() < 1e-10, "{v}");
        assert!((normal_cdf(-1.96) + v - 1.0).abs() < 1e-10);
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
    }
}
