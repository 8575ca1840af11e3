//! Exact draws by rejection from the uniform distribution on the sphere.
//!
//! With `2 beta < kappa` the kernel `kappa g1.y + beta((g2.y)^2 - (g3.y)^2)` is
//! maximized at `y = g1`, so `exp(kappa)` bounds it and a uniform proposal is
//! accepted with probability `exp(log_f - kappa)`.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::UnitSphere;

use super::data::SphericalData;
use super::density::log_f_frame;
use super::params::KentParams;
use crate::error::Result;

pub fn sample_one(params: &KentParams, rng: &mut impl Rng) -> Vector3<f64> {
    let frame = params.frame();
    sample_with_frame(params, &frame, rng)
}

fn sample_with_frame(params: &KentParams, frame: &super::params::Frame, rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let y = Vector3::from(rng.sample::<[f64; 3], _>(UnitSphere));
        let log_accept = log_f_frame(&y, params.kappa, params.beta, frame) - params.kappa;
        if rng.random::<f64>().ln() < log_accept {
            return y;
        }
    }
}

/// `n` independent draws.
pub fn sample(params: &KentParams, n: usize, rng: &mut impl Rng) -> Result<SphericalData> {
    params.validate()?;
    let frame = params.frame();
    let pts = (0..n)
        .map(|_| {
            let y = sample_with_frame(params, &frame, rng);
            // renormalize away rounding from the sphere sampler
            y / y.norm()
        })
        .collect();
    SphericalData::new(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kent::normalizer::log_c;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vmf_mean_resultant_length() {
        let kappa: f64 = 5.0;
        let p = KentParams::new(kappa, 0.0, 0.3, 1.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let d = sample(&p, n, &mut rng).unwrap();
        let proj: Vec<f64> = d.points().iter().map(|y| y.dot(&p.frame().g1)).collect();
        let mean = proj.iter().sum::<f64>() / n as f64;
        let var = proj.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let want = 1.0 / kappa.tanh() - 1.0 / kappa;
        assert!((mean - want).abs() < 4.0 * (var / n as f64).sqrt(), "{mean} vs {want}");
    }

    #[test]
    fn ovalness_sign() {
        for &beta in &[1.5, 0.0] {
            let p = KentParams::new(5.0, beta, 0.7, 2.0, 1.0);
            let f = p.frame();
            let d = sample(&p, 20_000, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
            let diff: f64 = d.points().iter().map(|y| y.dot(&f.g2).powi(2) - y.dot(&f.g3).powi(2)).sum::<f64>() / 20_000.0;
            if beta > 0.0 {
                assert!(diff > 0.01, "{diff}");
            } else {
                assert!(diff.abs() < 0.01, "{diff}");
            }
        }
    }

    #[test]
    fn binned_density_ratio() {
        // bin on g1.y and the azimuth around g1, then compare counts to
        // the exact bin probabilities by a chi-square statistic
        let p = KentParams::new(5.0, 1.25, 0.4, 1.1, 2.0);
        let f = p.frame();
        let n = 100_000;
        let d = sample(&p, n, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        let nb = 8;
        let bin = |y: &Vector3<f64>| {
            let t = ((y.dot(&f.g1) + 1.0) / 2.0 * nb as f64).min(nb as f64 - 1.0) as usize;
            let a = y.dot(&f.g3).atan2(y.dot(&f.g2));
            let s = (((a + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)) * nb as f64).min(nb as f64 - 1.0) as usize;
            t * nb + s
        };
        let mut counts = vec![0f64; nb * nb];
        for y in d.points() {
            counts[bin(y)] += 1.0;
        }
        // exact probabilities by fine quadrature in frame coordinates
        let lc = log_c(p.kappa, p.beta);
        let mut probs = vec![0f64; nb * nb];
        let (nz, na) = (800, 800);
        for i in 0..nz {
            let z = -1.0 + (i as f64 + 0.5) * 2.0 / nz as f64;
            let r = (1.0 - z * z).sqrt();
            for j in 0..na {
                let a = -std::f64::consts::PI + (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / na as f64;
                let y = z * f.g1 + r * a.cos() * f.g2 + r * a.sin() * f.g3;
                let w = (log_f_frame(&y, p.kappa, p.beta, &f) - lc).exp() * (2.0 / nz as f64) * (2.0 * std::f64::consts::PI / na as f64);
                probs[bin(&y)] += w;
            }
        }
        let mut chi2 = 0.0;
        let mut df = 0;
        for (c, pr) in counts.iter().zip(&probs) {
            let e = pr * n as f64;
            if e >= 5.0 {
                chi2 += (c - e).powi(2) / e;
                df += 1;
            }
        }
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        assert!(df > 20);
        let crit = ChiSquared::new((df - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(chi2 < crit, "chi2 {chi2} df {df}");
    }
}
