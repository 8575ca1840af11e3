//! Kent parameters, the orientation frame and the unconstrained transform.
//!
//! The frame is built as `R = Rx(eta) Rz(alpha) Rx(psi)` with `gamma_k = R e_k`,
//! so `gamma_1 = (cos alpha, sin alpha cos eta, sin alpha sin eta)` and psi
//! rotates `(gamma_2, gamma_3)` inside the plane orthogonal to `gamma_1`.
//! The density only sees `(gamma_2, gamma_3)` up to a joint sign flip, which
//! is why psi lives on `[0, pi]`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KentParams {
    pub kappa: f64,
    pub beta: f64,
    pub psi: f64,
    pub alpha: f64,
    pub eta: f64,
}

/// Orthonormal frame `(gamma_1, gamma_2, gamma_3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub g1: Vector3<f64>,
    pub g2: Vector3<f64>,
    pub g3: Vector3<f64>,
}

impl Frame {
    /// Frame from the columns of a rotation matrix.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self { g1: m.column(0).into(), g2: m.column(1).into(), g3: m.column(2).into() }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.g1, self.g2, self.g3])
    }
}

pub(crate) fn rot_x(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub(crate) fn rot_z(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn angles_to_frame(psi: f64, alpha: f64, eta: f64) -> Frame {
    Frame::from_matrix(&(rot_x(eta) * rot_z(alpha) * rot_x(psi)))
}

/// Angles `(psi, alpha, eta)` of a right-handed orthonormal frame, with psi
/// reduced to `[0, pi)`. When `gamma_1 = +-e_1` eta is set to 0.
pub fn frame_to_angles(frame: &Frame) -> (f64, f64, f64) {
    let g1 = frame.g1;
    // sin(alpha) takes the sign of the z component so that sin(eta) >= 0
    let mut s = g1.y.hypot(g1.z);
    if g1.z < 0.0 {
        s = -s;
    }
    let mut alpha = s.atan2(g1.x);
    if alpha < 0.0 {
        alpha += TWO_PI;
    }
    let eta = if s.abs() < 1e-300 { 0.0 } else { (g1.z / s).atan2(g1.y / s) };
    let eta = eta.clamp(0.0, PI);
    let v = rot_z(alpha).transpose() * rot_x(eta).transpose() * frame.g2;
    let mut psi = v.z.atan2(v.y);
    if psi < 0.0 {
        psi += PI;
    }
    if psi >= PI {
        psi -= PI;
    }
    (psi, alpha, eta)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigma(x) (1 - sigma(x)))`, stable for large `|x|`.
fn log_expit_slope(x: f64) -> f64 {
    -x.abs() - 2.0 * (-x.abs()).exp().ln_1p()
}

impl KentParams {
    pub fn new(kappa: f64, beta: f64, psi: f64, alpha: f64, eta: f64) -> Self {
        Self { kappa, beta, psi, alpha, eta }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa > 0.0
            && self.kappa.is_finite()
            && self.beta >= 0.0
            && 2.0 * self.beta < self.kappa
            && (0.0..=PI).contains(&self.psi)
            && (0.0..=TWO_PI).contains(&self.alpha)
            && (0.0..=PI).contains(&self.eta);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Kent parameters {self:?}")))
        }
    }

    pub fn frame(&self) -> Frame {
        angles_to_frame(self.psi, self.alpha, self.eta)
    }

    /// Parameters with the given concentration, ovalness and frame.
    pub fn from_frame(kappa: f64, beta: f64, frame: &Frame) -> Self {
        let (psi, alpha, eta) = frame_to_angles(frame);
        Self { kappa, beta, psi, alpha, eta }
    }

    pub fn ratio(&self) -> f64 {
        self.beta / self.kappa
    }

    /// `[kappa, beta, psi, alpha, eta]`.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.kappa, self.beta, self.psi, self.alpha, self.eta]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { kappa: v[0], beta: v[1], psi: v[2], alpha: v[3], eta: v[4] }
    }

    /// `[log kappa, log beta, logit(psi/pi), logit(alpha/2pi), logit(eta/pi)]`.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        vec![
            self.kappa.ln(),
            self.beta.ln(),
            logit(self.psi / PI),
            logit(self.alpha / TWO_PI),
            logit(self.eta / PI),
        ]
    }

    pub fn from_unconstrained(phi: &[f64]) -> Self {
        Self {
            kappa: phi[0].exp(),
            beta: phi[1].exp(),
            psi: PI * expit(phi[2]),
            alpha: TWO_PI * expit(phi[3]),
            eta: PI * expit(phi[4]),
        }
    }
}

/// Log absolute Jacobian of `from_unconstrained` at `phi`.
pub fn log_jacobian(phi: &[f64]) -> f64 {
    phi[0] + phi[1] + PI.ln() + log_expit_slope(phi[2]) + TWO_PI.ln() + log_expit_slope(phi[3]) + PI.ln() + log_expit_slope(phi[4])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_angles(rng: &mut impl Rng) -> (f64, f64, f64) {
        (rng.random::<f64>() * PI, rng.random::<f64>() * TWO_PI, rng.random::<f64>() * PI)
    }

    #[test]
    fn zero_angles_give_identity() {
        let f = angles_to_frame(0.0, 0.0, 0.0);
        assert!((f.matrix() - Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn first_axis_formula() {
        let (psi, alpha, eta) = (0.7, 2.1, 1.3);
        let f = angles_to_frame(psi, alpha, eta);
        let want = Vector3::new(alpha.cos(), alpha.sin() * eta.cos(), alpha.sin() * eta.sin());
        assert!((f.g1 - want).norm() < 1e-15);
    }

    #[test]
    fn frames_are_orthonormal_and_right_handed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let (p, a, e) = random_angles(&mut rng);
            let m = angles_to_frame(p, a, e).matrix();
            assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
            assert!((m.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let (p, a, e) = random_angles(&mut rng);
            let f = angles_to_frame(p, a, e);
            let (p2, a2, e2) = frame_to_angles(&f);
            let f2 = angles_to_frame(p2, a2, e2);
            assert!((f.g1 - f2.g1).norm() < 1e-10, "{p} {a} {e}");
            // (gamma_2, gamma_3) is recovered up to a joint sign
            let d = (f.g2 - f2.g2).norm().min((f.g2 + f2.g2).norm());
            assert!(d < 1e-10, "{p} {a} {e} -> {p2} {a2} {e2}");
            assert!((a - a2).abs() < 1e-9 && (e - e2).abs() < 1e-9);
        }
    }

    #[test]
    fn transform_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (psi, alpha, eta) = random_angles(&mut rng);
            let kappa = rng.random_range(0.1..50.0);
            let p = KentParams::new(kappa, rng.random::<f64>() * kappa / 2.0, psi, alpha, eta);
            let back = KentParams::from_unconstrained(&p.to_unconstrained());
            for (x, y) in p.to_vec().iter().zip(back.to_vec()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{p:?} {back:?}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let phi = [1.2, 0.3, -0.4, 0.8, 1.5];
        let h = 1e-6;
        let mut log_det = 0.0;
        // the transform is coordinatewise, so the Jacobian is diagonal
        for i in 0..5 {
            let mut up = phi;
            let mut dn = phi;
            up[i] += h;
            dn[i] -= h;
            let d = (KentParams::from_unconstrained(&up).to_vec()[i] - KentParams::from_unconstrained(&dn).to_vec()[i]) / (2.0 * h);
            log_det += d.abs().ln();
        }
        assert!((log_det - log_jacobian(&phi)).abs() < 1e-8);
    }

    #[test]
    fn validation() {
        assert!(KentParams::new(5.0, 1.0, 1.0, 1.0, 1.0).validate().is_ok());
        assert!(KentParams::new(5.0, 2.5, 1.0, 1.0, 1.0).validate().is_err());
        assert!(KentParams::new(-1.0, 0.0, 1.0, 1.0, 1.0).validate().is_err());
        assert!(KentParams::new(5.0, 1.0, 4.0, 1.0, 1.0).validate().is_err());
    }
}
