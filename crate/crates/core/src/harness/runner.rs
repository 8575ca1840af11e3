//! Runs an [`ExperimentConfig`] end to end and writes its outputs.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::config::{ExperimentConfig, IsingMethod, IsingOptions, KentMethod, KentOptions, ModelConfig};
use super::diagnostics::{summarize, ChainSummary};
use super::io::{write_chain_csv, write_json, Manifest};
use super::rmse::rmse_study;
use crate::error::Result;
use crate::ising::{max_pseudo_likelihood, run_exchange, AisConfig, IsingLattice, IsingModel};
use crate::kent::{fit_pmmh, mle_estimate, moment_estimate, posterior_means, KentFitConfig, SphericalData};
use crate::pmmh::{default_burn_in, run_chain, Chain, ChainConfig, LikelihoodEstimator};

pub const ISING_NAMES: [&str; 1] = ["theta"];
pub const KENT_NAMES: [&str; 5] = ["kappa", "beta", "psi", "alpha", "eta"];

#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub summary: Option<ChainSummary>,
    pub outputs: Vec<PathBuf>,
}

impl RunOutcome {
    /// False when a chain summary exists and its sign balance is too weak.
    pub fn reliable(&self) -> bool {
        self.summary.as_ref().is_none_or(|s| s.reliable)
    }
}

struct Writer<'a> {
    cfg: &'a ExperimentConfig,
    outputs: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&mut self, file: &str) -> PathBuf {
        let p = self.cfg.output_dir.join(file);
        self.outputs.push(p.clone());
        p
    }

    fn json<T: Serialize + ?Sized>(&mut self, file: &str, value: &T) -> Result<()> {
        let p = self.path(file);
        write_json(value, p)
    }

    fn chain(&mut self, chain: &Chain, names: &[&str]) -> Result<ChainSummary> {
        let p = self.path("chain.csv");
        write_chain_csv(chain, names, p)?;
        let summary = summarize(chain, default_burn_in(chain.samples.len()), 0.95)?.named(names);
        self.json("summary.json", &summary)?;
        Ok(summary)
    }
}

/// Runs the experiment, writing outputs and a manifest into `output_dir`.
/// `args` is recorded in the manifest.
pub fn run_experiment(cfg: &ExperimentConfig, command: &str, args: Vec<String>) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut w = Writer { cfg, outputs: Vec::new() };
    let mut manifest = Manifest::new(command, args, cfg)?.seed("seed", cfg.seed);
    let summary = match &cfg.model {
        ModelConfig::Ising(o) => {
            manifest = manifest.input(&o.data)?;
            Some(run_ising(cfg, o, &mut w)?)
        }
        ModelConfig::Kent(o) => {
            manifest = manifest.input(&o.data)?;
            run_kent(cfg, o, &mut w)?
        }
        ModelConfig::Study { scenario, replicates } => {
            let table = rmse_study(scenario.build().as_ref(), *replicates, cfg.seed);
            w.json("rmse.json", &table)?;
            let p = w.path("rmse.csv");
            let mut csv = csv::Writer::from_path(p)?;
            for c in &table.cells {
                csv.serialize(c)?;
            }
            csv.flush()?;
            None
        }
    };
    for p in &w.outputs {
        manifest = manifest.output(p);
    }
    let mpath = cfg.output_dir.join("manifest.json");
    manifest.write(&mpath)?;
    w.outputs.push(mpath);
    Ok(RunOutcome { summary, outputs: w.outputs })
}

fn run_ising(cfg: &ExperimentConfig, o: &IsingOptions, w: &mut Writer) -> Result<ChainSummary> {
    let lat = IsingLattice::read(&o.data)?;
    // start from the pseudo-likelihood estimate, kept inside the prior support
    let init = max_pseudo_likelihood(&lat).clamp(0.01, 0.99);
    let chain = match o.method {
        IsingMethod::Exchange => {
            run_exchange(lat.suff_stat(), lat.size(), cfg.proposal.step, cfg.n_iter, o.thin, init, cfg.seed, o.sweep_cap)?
        }
        IsingMethod::Bp | IsingMethod::BiasCorrected => {
            let (ais, estimator) = if o.method == IsingMethod::Bp {
                (o.ais.clone(), LikelihoodEstimator::BlockPoisson(o.bp.clone()))
            } else {
                let single = AisConfig { n_particles: 1, ..o.ais.clone() };
                (single, LikelihoodEstimator::BiasCorrected { blocks: o.bias_blocks, per_block: o.ais.n_particles / o.bias_blocks })
            };
            let model = IsingModel::new(&lat, ais)?;
            let chain_cfg = ChainConfig {
                estimator,
                proposal: cfg.proposal.clone(),
                n_iter: cfg.n_iter,
                seed: cfg.seed,
                refresh: cfg.refresh,
            };
            run_chain(&model, &chain_cfg, &[init], |_| {})?
        }
    };
    w.chain(&chain, &ISING_NAMES)
}

fn run_kent(cfg: &ExperimentConfig, o: &KentOptions, w: &mut Writer) -> Result<Option<ChainSummary>> {
    let data = SphericalData::read_csv(&o.data)?;
    match o.method {
        KentMethod::Bayes => {
            let fit = KentFitConfig {
                bp: o.bp.clone(),
                normalizer: o.normalizer,
                proposal: cfg.proposal.clone(),
                n_iter: cfg.n_iter,
                seed: cfg.seed,
                refresh: cfg.refresh,
            };
            let chain = fit_pmmh(&data, &fit)?;
            let summary = w.chain(&chain, &KENT_NAMES)?;
            w.json("posterior_means.json", &posterior_means(&chain, default_burn_in(chain.samples.len()))?)?;
            Ok(Some(summary))
        }
        KentMethod::Moment => {
            w.json("estimate.json", &moment_estimate(&data)?)?;
            Ok(None)
        }
        KentMethod::Mle => {
            w.json("estimate.json", &mle_estimate(&data)?)?;
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::io::read_chain_csv;
    use crate::ising::simulate_dataset;
    use crate::kent::{sample, KentParams};
    use crate::pmmh::ProposalConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base(dir: &std::path::Path, model: ModelConfig) -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            seed: 3,
            n_iter: 400,
            output_dir: dir.join("out"),
            proposal: ProposalConfig::fixed(0.07),
            refresh: Default::default(),
            model,
        }
    }

    #[test]
    fn ising_bp_run_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("lat.txt");
        simulate_dataset(0.2, 4, 1, 0).unwrap().write(&data).unwrap();
        let opts = IsingOptions {
            data,
            method: IsingMethod::Bp,
            bp: crate::bp::BpConfig::new(5, 1.0).unwrap(),
            ais: AisConfig { n_temps: 20, n_particles: 5 },
            bias_blocks: 5,
            sweep_cap: 1 << 16,
            thin: 1,
        };
        let cfg = base(dir.path(), ModelConfig::Ising(opts));
        let out = run_experiment(&cfg, "ising-fit", vec![]).unwrap();
        assert!(out.outputs.iter().all(|p| p.exists()));
        let (_, first) = read_chain_csv(cfg.output_dir.join("chain.csv")).unwrap();
        run_experiment(&cfg, "ising-fit", vec![]).unwrap();
        let (_, second) = read_chain_csv(cfg.output_dir.join("chain.csv")).unwrap();
        assert_eq!(first.samples, second.samples);
    }

    #[test]
    fn kent_point_estimates_written() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.csv");
        sample(&KentParams::new(5.0, 1.0, 1.0, 2.0, 1.0), 100, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap()
            .write_csv(&data)
            .unwrap();
        for method in [KentMethod::Moment, KentMethod::Mle] {
            let opts = KentOptions {
                data: data.clone(),
                method,
                bp: crate::bp::BpConfig::new(20, 1.0).unwrap(),
                normalizer: Default::default(),
            };
            let cfg = base(dir.path(), ModelConfig::Kent(opts));
            let out = run_experiment(&cfg, "kent-fit", vec![]).unwrap();
            assert!(out.summary.is_none() && out.reliable());
            assert!(cfg.output_dir.join("estimate.json").exists());
        }
    }
}
