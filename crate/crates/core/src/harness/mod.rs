//! Diagnostics, experiment orchestration, configuration and persistence.

pub mod config;
pub mod diagnostics;
pub mod io;
pub mod rmse;
pub mod runner;

pub use config::{ExperimentConfig, IsingMethod, KentMethod, ModelConfig};
pub use diagnostics::{ess, hpd, hpd_signed, iact, iact_signed, summarize, ChainSummary, ParamSummary};
pub use io::{read_chain_csv, write_chain_csv, Manifest};
pub use rmse::{rmse_study, RmseTable, Scenario, ScenarioConfig};
pub use runner::{run_experiment, RunOutcome};
