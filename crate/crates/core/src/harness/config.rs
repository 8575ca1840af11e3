//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "ising-bp"
//! seed = 11
//! n_iter = 20000
//! output_dir = "out/ising"
//!
//! [proposal]
//! kind = "fixed-rw"
//! step = 0.07
//!
//! [model]
//! kind = "ising"
//! data = "lattice.txt"
//! method = "bp"
//!
//! [model.bp]
//! lambda = 10
//! m = 1.0
//!
//! [model.ais]
//! n_temps = 4000
//! n_particles = 100
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::rmse::ScenarioConfig;
use crate::bp::BpConfig;
use crate::error::{Error, Result};
use crate::ising::{AisConfig, DEFAULT_SWEEP_CAP};
use crate::kent::NormalizerConfig;
use crate::pmmh::{ProposalConfig, RefreshPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsingMethod {
    Bp,
    BiasCorrected,
    Exchange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KentMethod {
    Bayes,
    Moment,
    Mle,
}

fn default_ising_bp() -> BpConfig {
    BpConfig::new(10, 1.0).expect("valid defaults")
}

fn default_kent_bp() -> BpConfig {
    BpConfig::new(20, 1.0).expect("valid defaults")
}

fn default_bias_blocks() -> usize {
    100
}

fn default_sweep_cap() -> u64 {
    DEFAULT_SWEEP_CAP
}

fn default_thin() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingOptions {
    /// Lattice file.
    pub data: PathBuf,
    pub method: IsingMethod,
    #[serde(default = "default_ising_bp")]
    pub bp: BpConfig,
    #[serde(default)]
    pub ais: AisConfig,
    /// Blocks of the bias-corrected estimator; each block holds
    /// `ais.n_particles / bias_blocks` single-particle draws.
    #[serde(default = "default_bias_blocks")]
    pub bias_blocks: usize,
    #[serde(default = "default_sweep_cap")]
    pub sweep_cap: u64,
    /// Thinning of the exchange sampler.
    #[serde(default = "default_thin")]
    pub thin: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KentOptions {
    /// CSV with `x,y,z` columns.
    pub data: PathBuf,
    pub method: KentMethod,
    #[serde(default = "default_kent_bp")]
    pub bp: BpConfig,
    #[serde(default)]
    pub normalizer: NormalizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Ising(IsingOptions),
    Kent(KentOptions),
    Study {
        #[serde(flatten)]
        scenario: ScenarioConfig,
        replicates: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub n_iter: usize,
    pub output_dir: PathBuf,
    pub proposal: ProposalConfig,
    #[serde(default)]
    pub refresh: RefreshPolicy,
    pub model: ModelConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::Config("n_iter must be positive".into()));
        }
        self.proposal.validate()?;
        match &self.model {
            ModelConfig::Ising(o) => {
                o.bp.validate()?;
                o.ais.validate()?;
                if o.method == IsingMethod::BiasCorrected {
                    if o.bias_blocks == 0 || o.ais.n_particles % o.bias_blocks != 0 {
                        return Err(Error::Config(format!(
                            "bias_blocks ({}) must divide the particle count ({})",
                            o.bias_blocks, o.ais.n_particles
                        )));
                    }
                    if o.ais.n_particles < 2 {
                        return Err(Error::Config("bias correction needs at least 2 particles".into()));
                    }
                }
                if o.thin == 0 {
                    return Err(Error::Config("thin must be positive".into()));
                }
            }
            ModelConfig::Kent(o) => {
                o.bp.validate()?;
                o.normalizer.validate()?;
            }
            ModelConfig::Study { replicates, .. } => {
                if *replicates == 0 {
                    return Err(Error::Config("a study needs at least one replicate".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISING: &str = r#"
name = "ising-bp"
seed = 11
n_iter = 20000
output_dir = "out/ising"

[proposal]
kind = "fixed-rw"
step = 0.07

[model]
kind = "ising"
data = "lattice.txt"
method = "bp"

[model.bp]
lambda = 10
m = 1.0

[model.ais]
n_temps = 4000
n_particles = 100
"#;

    #[test]
    fn parses_documented_example() {
        let cfg = ExperimentConfig::from_toml(ISING).unwrap();
        match &cfg.model {
            ModelConfig::Ising(o) => {
                assert_eq!(o.bp.lambda, 10);
                assert_eq!(o.method, IsingMethod::Bp);
                assert_eq!(o.sweep_cap, DEFAULT_SWEEP_CAP);
            }
            other => panic!("{other:?}"),
        }
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn kent_defaults() {
        let text = r#"
name = "k"
seed = 1
n_iter = 100
output_dir = "o"
proposal = { kind = "adaptive-rw", step = 0.1 }
model = { kind = "kent", data = "d.csv", method = "bayes" }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        match cfg.model {
            ModelConfig::Kent(o) => {
                assert_eq!(o.bp.lambda, 20);
                assert_eq!(o.normalizer.k, 10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn study_section() {
        let text = r#"
name = "s"
seed = 1
n_iter = 100
output_dir = "o"
proposal = { kind = "adaptive-rw", step = 0.1 }
model = { kind = "study", scenario = "kent-sim", kappa = 5.0, ratio = 0.25, n = 10, replicates = 3 }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert!(matches!(cfg.model, ModelConfig::Study { replicates: 3, .. }));
    }

    #[test]
    fn schema_errors_are_config_errors() {
        let bad = ISING.replace("lambda = 10", "lambda = 0");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().is_config());
        let unknown = ISING.replace("method = \"bp\"", "method = \"rr\"");
        assert!(ExperimentConfig::from_toml(&unknown).unwrap_err().is_config());
        let zero = ISING.replace("n_iter = 20000", "n_iter = 0");
        assert!(ExperimentConfig::from_toml(&zero).unwrap_err().is_config());
    }
}
