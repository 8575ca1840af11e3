//! Ising lattice backend: `p(y|theta) = exp(theta S(y)) / Z(theta)` on an
//! `L x L` grid with free boundaries.

pub mod ais;
pub mod cftp;
pub mod exact;
pub mod exchange;
pub mod gibbs;
pub mod lattice;
pub mod model;

pub use ais::{ais_log_z_hat, ais_z_hat, AisConfig, AisProvider};
pub use cftp::{perfect_sample, DEFAULT_SWEEP_CAP};
pub use exact::{exact_log_z, exact_posterior, ExactPosterior, StatHistogram};
pub use exchange::{exchange_step, run_exchange};
pub use gibbs::{gibbs_sweep, prob_up, SweepMode};
pub use lattice::IsingLattice;
pub use model::{max_pseudo_likelihood, select_dataset, simulate_dataset, statistic_moments, IsingModel};
