//! Kernel, prior and normalized density.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::data::SufficientStats;
use super::normalizer::log_c;
use super::params::{log_jacobian, Frame, KentParams};

/// Unnormalized log density `kappa g1.y + beta ((g2.y)^2 - (g3.y)^2)`.
pub fn log_f(y: &Vector3<f64>, params: &KentParams) -> f64 {
    log_f_frame(y, params.kappa, params.beta, &params.frame())
}

pub fn log_f_frame(y: &Vector3<f64>, kappa: f64, beta: f64, frame: &Frame) -> f64 {
    kappa * frame.g1.dot(y) + beta * (frame.g2.dot(y).powi(2) - frame.g3.dot(y).powi(2))
}

/// Sum of the kernel over a dataset from its sufficient statistics.
pub fn log_f_stats(stats: &SufficientStats, params: &KentParams) -> f64 {
    let f = params.frame();
    let quad = |g: &Vector3<f64>| (g.transpose() * stats.scatter * g)[(0, 0)];
    params.kappa * f.g1.dot(&stats.sum) + params.beta * (quad(&f.g2) - quad(&f.g3))
}

/// Normalized log density, with `c` from the converged series.
pub fn log_density(y: &Vector3<f64>, params: &KentParams) -> f64 {
    log_f(y, params) - log_c(params.kappa, params.beta)
}

/// Log prior density in original coordinates:
/// `2 kappa |sin alpha| / (pi^3 (1 + kappa^2)^2)` on `0 <= 2 beta / kappa < 1`
/// and the angle ranges.
pub fn log_prior(p: &KentParams) -> f64 {
    let inside = p.kappa > 0.0
        && p.beta >= 0.0
        && 2.0 * p.beta < p.kappa
        && (0.0..=PI).contains(&p.psi)
        && (0.0..=2.0 * PI).contains(&p.alpha)
        && (0.0..=PI).contains(&p.eta);
    if !inside {
        return f64::NEG_INFINITY;
    }
    (2.0 * p.kappa * p.alpha.sin().abs()).ln() - 3.0 * PI.ln() - 2.0 * (1.0 + p.kappa * p.kappa).ln()
}

/// Log prior of the unconstrained coordinates, Jacobian included.
pub fn log_prior_unconstrained(phi: &[f64]) -> f64 {
    let lp = log_prior(&KentParams::from_unconstrained(phi));
    if lp == f64::NEG_INFINITY {
        lp
    } else {
        lp + log_jacobian(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kent::data::SphericalData;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::UnitSphere;

    fn params() -> KentParams {
        KentParams::new(5.0, 1.25, 0.4, 1.1, 2.0)
    }

    #[test]
    fn axis_values() {
        let p = params();
        let f = p.frame();
        assert!((log_f(&f.g1, &p) - 5.0).abs() < 1e-12);
        assert!((log_f(&f.g2, &p) - 1.25).abs() < 1e-12);
        assert!((log_f(&f.g3, &p) + 1.25).abs() < 1e-12);
    }

    #[test]
    fn rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = params();
        let f = p.frame();
        for _ in 0..10_000 {
            let y = Vector3::from(rng.sample::<[f64; 3], _>(UnitSphere));
            let axis = Vector3::from(rng.sample::<[f64; 3], _>(UnitSphere));
            let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), rng.random::<f64>() * 6.0);
            let rf = Frame { g1: r * f.g1, g2: r * f.g2, g3: r * f.g3 };
            let a = log_f_frame(&y, p.kappa, p.beta, &f);
            let b = log_f_frame(&(r * y), p.kappa, p.beta, &rf);
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn stats_form_matches_pointwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<Vector3<f64>> = (0..50).map(|_| Vector3::from(rng.sample::<[f64; 3], _>(UnitSphere))).collect();
        let d = SphericalData::new(pts.clone()).unwrap();
        let p = params();
        let direct: f64 = pts.iter().map(|y| log_f(y, &p)).sum();
        assert!((direct - log_f_stats(&d.stats(), &p)).abs() < 1e-10);
    }

    #[test]
    fn density_integrates_to_one() {
        // midpoint rule in z = cos(theta), periodic trapezoid in the azimuth
        let p = params();
        let (nz, nphi) = (1500, 1500);
        let lc = log_c(p.kappa, p.beta);
        let mut total = 0.0;
        for i in 0..nz {
            let z = -1.0 + (i as f64 + 0.5) * 2.0 / nz as f64;
            let r = (1.0 - z * z).sqrt();
            for j in 0..nphi {
                let phi = j as f64 * 2.0 * PI / nphi as f64;
                total += (log_f(&Vector3::new(r * phi.cos(), r * phi.sin(), z), &p) - lc).exp();
            }
        }
        total *= 2.0 / nz as f64 * 2.0 * PI / nphi as f64;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn prior_support_and_mode_in_alpha() {
        let mut p = params();
        p.beta = 2.5;
        assert_eq!(log_prior(&p), f64::NEG_INFINITY);
        let base = params();
        let at = |alpha: f64| log_prior(&KentParams { alpha, ..base });
        assert!(at(PI / 2.0) > at(1.0) && at(PI / 2.0) > at(2.0));
    }

    #[test]
    fn prior_is_normalized_in_kappa() {
        // integral over kappa of 4 kappa^2 / (pi (1 + kappa^2)^2) is one
        let h = 1e-3;
        let total: f64 = (1..2_000_000).map(|i| {
            let k = i as f64 * h;
            4.0 * k * k / (PI * (1.0 + k * k).powi(2)) * h
        }).sum();
        assert!((total - 1.0).abs() < 1e-3);
    }
}
