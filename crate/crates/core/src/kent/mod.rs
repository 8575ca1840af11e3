//! Kent (five-parameter Fisher-Bingham) distribution on the sphere.

pub mod bessel;
pub mod bootstrap;
pub mod classify;
pub mod data;
pub mod density;
pub mod mle;
pub mod model;
pub mod moment;
pub mod normalizer;
pub mod params;
pub mod sampler;

pub use bootstrap::{bootstrap, BootstrapResult, PointMethod};
pub use classify::{classify, cross_validate, ClassifierConfig, GroupPosterior};
pub use data::{SphericalData, SufficientStats};
pub use density::{log_density, log_f, log_prior, log_prior_unconstrained};
pub use mle::{mle_estimate, MleEstimate};
pub use model::{fit_pmmh, posterior_means, KentFitConfig, KentModel, KentPosteriorMeans};
pub use moment::{moment_estimate, MomentEstimate};
pub use normalizer::{c_hat, c_partial, c_term, log_c, KentNormalizer, NormalizerConfig, TailPmf};
pub use params::{angles_to_frame, frame_to_angles, Frame, KentParams};
pub use sampler::sample;
