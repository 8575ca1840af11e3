//! Signed block pseudo-marginal Metropolis-Hastings for doubly intractable models.
//!
//! The block-Poisson estimator ([`bp`]) turns unbiased draws of a normalizing
//! function into a signed, unbiased estimate of `exp(-nu Z(theta))`; [`pmmh`]
//! drives the correlated chain over it. Two model backends are provided:
//! [`ising`] and [`kent`].

pub mod bp;
pub mod error;
pub mod harness;
pub mod ising;
pub mod kent;
pub mod pmmh;
pub mod rng;
pub mod special;
pub mod tuning;

pub use error::{Error, Result};
