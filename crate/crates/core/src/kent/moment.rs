//! Moment estimator.
//!
//! With `ybar` the sample mean and `S` the second-moment matrix, rotate `e_1`
//! onto `ybar / |ybar|` by `H`, then rotate about the new first axis by `psi`
//! so the lower-right block of `B = K^T H^T S H K` is diagonal with
//! `B_22 >= B_33`. With `r1 = |ybar|` and `r2 = B_22 - B_33`,
//!
//! ```text
//! kappa = 1 / (2 - 2 r1 - r2) + 1 / (2 - 2 r1 + r2)
//! beta  = (1 / (2 - 2 r1 - r2) - 1 / (2 - 2 r1 + r2)) / 2
//! ```

use serde::{Deserialize, Serialize};

use super::data::SphericalData;
use super::params::{rot_x, rot_z, Frame, KentParams};
use crate::error::{Error, Result};

/// Largest concentration the estimator reports.
pub const KAPPA_CAP: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub params: KentParams,
    /// The scatter block had (numerically) repeated eigenvalues, so the
    /// in-plane orientation is an arbitrary but deterministic choice.
    pub degenerate_scatter: bool,
    /// The concentration hit [`KAPPA_CAP`].
    pub capped: bool,
}

pub fn moment_estimate(data: &SphericalData) -> Result<MomentEstimate> {
    if data.len() < 3 {
        return Err(Error::Data(format!("moment estimate needs at least 3 observations, got {}", data.len())));
    }
    let stats = data.stats();
    let n = stats.n as f64;
    let mean = stats.sum / n;
    let s = stats.scatter / n;
    let r1 = mean.norm();
    if r1 == 0.0 {
        return Err(Error::Data("sample mean is zero, the mean direction is undefined".into()));
    }
    let u = mean / r1;
    let theta = u.x.clamp(-1.0, 1.0).acos();
    let phi = u.z.atan2(u.y);
    let h = rot_x(phi) * rot_z(theta);
    let b = h.transpose() * s * h;
    let (b22, b33, b23) = (b[(1, 1)], b[(2, 2)], b[(1, 2)]);
    let spread = (b22 - b33).hypot(2.0 * b23);
    let psi = 0.5 * (2.0 * b23).atan2(b22 - b33);
    let g = h * rot_x(psi);
    let r2 = spread;

    let d1 = 2.0 - 2.0 * r1 - r2;
    let d2 = 2.0 - 2.0 * r1 + r2;
    let (kappa, beta, capped) = if d1 <= 1.0 / KAPPA_CAP {
        (KAPPA_CAP, 0.0, true)
    } else {
        let kappa = 1.0 / d1 + 1.0 / d2;
        let beta = 0.5 * (1.0 / d1 - 1.0 / d2);
        if kappa > KAPPA_CAP {
            (KAPPA_CAP, beta * KAPPA_CAP / kappa, true)
        } else {
            (kappa, beta, false)
        }
    };
    Ok(MomentEstimate {
        params: KentParams::from_frame(kappa, beta, &Frame::from_matrix(&g)),
        degenerate_scatter: spread < 1e-12,
        capped,
    })
}
