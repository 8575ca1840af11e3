use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bpmcmc::bp::BpConfig;
use bpmcmc::harness::config::{IsingOptions, KentOptions};
use bpmcmc::harness::io::{read_json, write_json};
use bpmcmc::harness::{
    read_chain_csv, run_experiment, summarize, ExperimentConfig, IsingMethod, KentMethod, Manifest, ModelConfig,
};
use bpmcmc::ising::{
    exact_posterior, select_dataset, simulate_dataset, AisConfig, AisProvider, IsingLattice, StatHistogram,
    DEFAULT_SWEEP_CAP,
};
use bpmcmc::kent::{
    bootstrap, cross_validate, sample, ClassifierConfig, KentFitConfig, KentParams, NormalizerConfig, PointMethod,
    SphericalData,
};
use bpmcmc::kent::classify::two_group_data;
use bpmcmc::pmmh::{default_burn_in, ProposalConfig, RefreshPolicy};
use bpmcmc::rng::SubstreamKey;
use bpmcmc::tuning::{
    estimate_gamma, optimal_lambda, recommend, sweep_lambda, EmpiricalInefficiency, InefficiencyModel,
    SurrogateInefficiency, UnitInefficiency, SURROGATE_PARTICLES,
};
use bpmcmc::{Error, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

pub enum Status {
    Done,
    Unreliable,
}

fn status(reliable: bool) -> Status {
    if reliable {
        Status::Done
    } else {
        Status::Unreliable
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    // a closed pipe on stdout is not a failure of the run
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn finish(manifest: Manifest, out: &Path, outputs: &[PathBuf]) -> Result<()> {
    let manifest = outputs.iter().fold(manifest, |m, p| m.output(p));
    manifest.write(out.join("manifest.json"))
}

fn proposal(step: f64, adaptive: bool) -> ProposalConfig {
    if adaptive {
        ProposalConfig::adaptive(step)
    } else {
        ProposalConfig::fixed(step)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum IfModel {
    Unit,
    Surrogate,
    Empirical,
}

#[derive(Args, Debug, Serialize)]
pub struct TuneArgs {
    /// Intrinsic variance of the normalizer estimator. Estimated by AIS on an
    /// Ising lattice when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    /// Lattice side for estimating the variance.
    #[arg(long, default_value_t = 10)]
    ising_l: usize,
    #[arg(long, default_value_t = 11)]
    theta_grid: usize,
    #[arg(long, default_value_t = 4000)]
    n_temps: usize,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    /// Particles per normalizer draw.
    #[arg(long, default_value_t = SURROGATE_PARTICLES)]
    particles: usize,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Correlation of successive log estimates; `1 - 1/lambda` when omitted.
    #[arg(long)]
    rho: Option<f64>,
    /// Below about ten blocks the surrogate curve has a spurious corner where
    /// a single wide block is mostly positive.
    #[arg(long, default_value_t = 10)]
    lambda_min: usize,
    #[arg(long, default_value_t = 400)]
    lambda_max: usize,
    #[arg(long, value_enum, default_value_t = IfModel::Surrogate)]
    inefficiency: IfModel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct TuneReport {
    gamma: f64,
    lambda_opt: Option<usize>,
    recommendation: bpmcmc::tuning::TuningRecommendation,
}

pub fn tune(a: TuneArgs, args: Vec<String>) -> Result<Status> {
    if a.lambda_min == 0 || a.lambda_min > a.lambda_max {
        return Err(Error::Config("need 1 <= lambda_min <= lambda_max".into()));
    }
    if a.particles == 0 {
        return Err(Error::Config("particles must be positive".into()));
    }
    fs::create_dir_all(&a.out)?;
    let gamma = match a.gamma {
        Some(g) if g > 0.0 => g,
        Some(g) => return Err(Error::Config(format!("gamma must be positive, got {g}"))),
        None => {
            let ais = AisConfig { n_temps: a.n_temps, n_particles: a.particles };
            ais.validate()?;
            let provider = AisProvider { l: a.ising_l, config: ais };
            let steps = a.theta_grid.max(2) - 1;
            let grid: Vec<Vec<f64>> = (0..=steps).map(|i| vec![i as f64 / steps as f64]).collect();
            estimate_gamma(&grid, &provider, a.particles, a.replicates, a.seed).gamma_max
        }
    };
    let model: Box<dyn InefficiencyModel> = match a.inefficiency {
        IfModel::Unit => Box::new(UnitInefficiency),
        IfModel::Surrogate => Box::new(SurrogateInefficiency::default()),
        IfModel::Empirical => Box::new(EmpiricalInefficiency::default()),
    };
    let lambdas: Vec<usize> = (a.lambda_min..=a.lambda_max).collect();
    let rows = sweep_lambda(gamma, a.m, a.particles, a.rho, &lambdas, model.as_ref());
    let sweep = a.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&sweep)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let report = TuneReport { gamma, lambda_opt: optimal_lambda(&rows), recommendation: recommend(gamma) };
    let rec = a.out.join("recommendation.json");
    write_json(&report, &rec)?;
    print_json(&report)?;
    finish(Manifest::new("tune", args, &a)?.seed("seed", a.seed), &a.out, &[sweep, rec])?;
    Ok(Status::Done)
}

#[derive(Args, Debug, Serialize)]
pub struct IsingSimulateArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    l: usize,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Keep only datasets whose statistic is within this many standard
    /// deviations of its mean at `theta`.
    #[arg(long)]
    select_tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_tries: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn ising_simulate(a: IsingSimulateArgs, args: Vec<String>) -> Result<Status> {
    fs::create_dir_all(&a.out)?;
    let mut outputs = Vec::new();
    for i in 0..a.count {
        let lat = match a.select_tol {
            // each selected dataset searches its own index range
            Some(tol) => select_dataset(a.theta, a.l, SubstreamKey::root(a.seed, i).digest(), tol, a.max_tries)?.1,
            None => simulate_dataset(a.theta, a.l, a.seed, i)?,
        };
        let p = a.out.join(format!("lattice_{i}.txt"));
        lat.write(&p)?;
        outputs.push(p);
    }
    finish(Manifest::new("ising-simulate", args, &a)?.seed("seed", a.seed), &a.out, &outputs)?;
    Ok(Status::Done)
}

#[derive(Args, Debug, Serialize)]
pub struct IsingFitArgs {
    /// TOML experiment file; other options are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = IsingMethodArg::Bp)]
    method: IsingMethodArg,
    #[arg(long, default_value_t = 10)]
    lambda: usize,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 4000)]
    n_temps: usize,
    #[arg(long, default_value_t = 100)]
    particles: usize,
    #[arg(long, default_value_t = 100)]
    bias_blocks: usize,
    #[arg(long, default_value_t = 0.07)]
    step: f64,
    #[arg(long)]
    adaptive: bool,
    #[arg(long, default_value_t = 20_000)]
    n_iter: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = DEFAULT_SWEEP_CAP)]
    sweep_cap: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum IsingMethodArg {
    Bp,
    BiasCorrected,
    Exchange,
}

fn run_and_report(cfg: &ExperimentConfig, command: &str, args: Vec<String>) -> Result<Status> {
    let outcome = run_experiment(cfg, command, args)?;
    if let Some(s) = &outcome.summary {
        print_json(s)?;
    }
    Ok(status(outcome.reliable()))
}

pub fn ising_fit(a: IsingFitArgs, args: Vec<String>) -> Result<Status> {
    if let Some(path) = &a.config {
        let cfg = ExperimentConfig::load(path)?;
        if !matches!(cfg.model, ModelConfig::Ising(_)) {
            return Err(Error::Config("ising-fit needs a config with model.kind = \"ising\"".into()));
        }
        return run_and_report(&cfg, "ising-fit", args);
    }
    let method = match a.method {
        IsingMethodArg::Bp => IsingMethod::Bp,
        IsingMethodArg::BiasCorrected => IsingMethod::BiasCorrected,
        IsingMethodArg::Exchange => IsingMethod::Exchange,
    };
    let cfg = ExperimentConfig {
        name: "ising-fit".into(),
        seed: a.seed,
        n_iter: a.n_iter,
        output_dir: a.out,
        proposal: proposal(a.step, a.adaptive),
        refresh: RefreshPolicy::default(),
        model: ModelConfig::Ising(IsingOptions {
            data: a.data.expect("required by clap"),
            method,
            bp: BpConfig::new(a.lambda, a.m)?,
            ais: AisConfig { n_temps: a.n_temps, n_particles: a.particles },
            bias_blocks: a.bias_blocks,
            sweep_cap: a.sweep_cap,
            thin: a.thin,
        }),
    };
    run_and_report(&cfg, "ising-fit", args)
}

#[derive(Args, Debug, Serialize)]
pub struct IsingOracleArgs {
    #[arg(long)]
    l: Option<usize>,
    /// Print `log Z(theta)`.
    #[arg(long)]
    theta: Option<f64>,
    /// Lattice file; prints the exact posterior under a uniform prior on [0, 1].
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    intervals: usize,
    /// Also write the tabulated posterior density here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct OracleReport {
    l: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_obs: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    posterior_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    posterior_sd: Option<f64>,
}

pub fn ising_oracle(a: IsingOracleArgs, _args: Vec<String>) -> Result<Status> {
    let lattice = a.data.as_deref().map(IsingLattice::read).transpose()?;
    let l = match (&lattice, a.l) {
        (Some(lat), Some(l)) if lat.size() != l => {
            return Err(Error::Config(format!("--l {l} disagrees with the lattice side {}", lat.size())))
        }
        (Some(lat), _) => lat.size(),
        (None, Some(l)) => l,
        (None, None) => return Err(Error::Config("give --l or --data".into())),
    };
    if a.theta.is_none() && lattice.is_none() {
        return Err(Error::Config("give --theta and/or --data".into()));
    }
    let hist = StatHistogram::enumerate(l)?;
    let mut report = OracleReport {
        l,
        theta: a.theta,
        log_z: a.theta.map(|t| hist.log_z(t)),
        s_obs: None,
        posterior_mean: None,
        posterior_sd: None,
    };
    if let Some(lat) = &lattice {
        let post = exact_posterior(&hist, lat.suff_stat(), a.intervals);
        report.s_obs = Some(lat.suff_stat());
        report.posterior_mean = Some(post.mean);
        report.posterior_sd = Some(post.sd);
        if let Some(out) = &a.out {
            let mut w = csv::Writer::from_path(out)?;
            w.write_record(["theta", "density"])?;
            for (t, d) in post.grid.iter().zip(&post.density) {
                w.write_record([t.to_string(), d.to_string()])?;
            }
            w.flush()?;
        }
    }
    print_json(&report)?;
    Ok(Status::Done)
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum KentMethodArg {
    Bayes,
    Moment,
    Mle,
}

#[derive(Args, Debug, Serialize)]
pub struct KentFitArgs {
    /// TOML experiment file; other options are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KentMethodArg::Bayes)]
    method: KentMethodArg,
    #[arg(long, default_value_t = 20)]
    lambda: usize,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 10)]
    head_terms: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 20_000)]
    n_iter: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

pub fn kent_fit(a: KentFitArgs, args: Vec<String>) -> Result<Status> {
    if let Some(path) = &a.config {
        let cfg = ExperimentConfig::load(path)?;
        if !matches!(cfg.model, ModelConfig::Kent(_)) {
            return Err(Error::Config("kent-fit needs a config with model.kind = \"kent\"".into()));
        }
        return run_and_report(&cfg, "kent-fit", args);
    }
    let method = match a.method {
        KentMethodArg::Bayes => KentMethod::Bayes,
        KentMethodArg::Moment => KentMethod::Moment,
        KentMethodArg::Mle => KentMethod::Mle,
    };
    let cfg = ExperimentConfig {
        name: "kent-fit".into(),
        seed: a.seed,
        n_iter: a.n_iter,
        output_dir: a.out.clone(),
        proposal: ProposalConfig::adaptive(a.step),
        refresh: RefreshPolicy::default(),
        model: ModelConfig::Kent(KentOptions {
            data: a.data.expect("required by clap"),
            method,
            bp: BpConfig::new(a.lambda, a.m)?,
            normalizer: NormalizerConfig { k: a.head_terms, ..Default::default() },
        }),
    };
    let outcome = run_experiment(&cfg, "kent-fit", args)?;
    match &outcome.summary {
        Some(_) => print_json(&read_json::<serde_json::Value>(a.out.join("posterior_means.json"))?)?,
        None => print_json(&read_json::<serde_json::Value>(a.out.join("estimate.json"))?)?,
    }
    Ok(status(outcome.reliable()))
}

#[derive(Args, Debug, Serialize)]
pub struct KentSimulateArgs {
    /// `kappa,beta,psi,alpha,eta`
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    params: Vec<f64>,
    /// Parameters of a second group; the output is then labelled.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    group2: Option<Vec<f64>>,
    /// Observations (per group when labelled).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn kent_params(v: &[f64]) -> Result<KentParams> {
    if v.len() != 5 {
        return Err(Error::Config(format!("expected kappa,beta,psi,alpha,eta, got {} values", v.len())));
    }
    let p = KentParams::from_slice(v);
    p.validate()?;
    Ok(p)
}

pub fn kent_simulate(a: KentSimulateArgs, args: Vec<String>) -> Result<Status> {
    let p1 = kent_params(&a.params)?;
    let mut rng = SubstreamKey::root(a.seed, 0).rng();
    let data = match &a.group2 {
        Some(v) => two_group_data(&p1, &kent_params(v)?, a.n, &mut rng)?,
        None => sample(&p1, a.n, &mut rng)?,
    };
    data.write_csv(&a.out)?;
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let manifest = Manifest::new("kent-simulate", args, &a)?.seed("seed", a.seed).output(&a.out);
    manifest.write(dir.join("manifest.json"))?;
    Ok(Status::Done)
}

#[derive(Args, Debug, Serialize)]
pub struct KentClassifyArgs {
    /// Labelled CSV (`x,y,z,group`).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 20)]
    lambda: usize,
    #[arg(long, default_value_t = 10_000)]
    n_iter: usize,
    #[arg(long, default_value_t = 10)]
    n_nu: usize,
    #[arg(long, default_value_t = 20)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

pub fn kent_classify(a: KentClassifyArgs, args: Vec<String>) -> Result<Status> {
    let data = SphericalData::read_csv(&a.data)?;
    let bp = BpConfig::new(a.lambda, 1.0)?;
    let fit = KentFitConfig { bp: bp.clone(), n_iter: a.n_iter, seed: a.seed, ..Default::default() };
    let cfg = ClassifierConfig { bp, n_nu: a.n_nu, thin: a.thin, ..Default::default() };
    let folds = cross_validate(&data, a.folds, &fit, &cfg, a.seed)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("folds.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for f in &folds {
        w.serialize(f)?;
    }
    w.flush()?;
    let mean = |g: fn(&bpmcmc::kent::classify::FoldAccuracy) -> f64| folds.iter().map(g).sum::<f64>() / folds.len() as f64;
    print_json(&serde_json::json!({
        "folds": folds,
        "mean_accuracy": { "bayes": mean(|f| f.bayes), "moment": mean(|f| f.moment), "mle": mean(|f| f.mle) },
    }))?;
    let manifest = Manifest::new("kent-classify", args, &a)?.seed("seed", a.seed).input(&a.data)?;
    finish(manifest, &a.out, &[path])?;
    Ok(Status::Done)
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum PointMethodArg {
    Moment,
    Mle,
}

#[derive(Args, Debug, Serialize)]
pub struct KentBootstrapArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = PointMethodArg::Mle)]
    method: PointMethodArg,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

pub fn kent_bootstrap(a: KentBootstrapArgs, args: Vec<String>) -> Result<Status> {
    let data = SphericalData::read_csv(&a.data)?;
    let method = match a.method {
        PointMethodArg::Moment => PointMethod::Moment,
        PointMethodArg::Mle => PointMethod::Mle,
    };
    let result = bootstrap(&data, method, a.reps, a.level, a.seed)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("bootstrap.json");
    write_json(&result, &path)?;
    print_json(&result)?;
    let manifest = Manifest::new("kent-bootstrap", args, &a)?.seed("seed", a.seed).input(&a.data)?;
    finish(manifest, &a.out, &[path])?;
    Ok(Status::Done)
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    chain: PathBuf,
    /// Iterates to discard; a quarter of the chain by default.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    mass: f64,
    /// Write the summary JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn diagnose(a: DiagnoseArgs) -> Result<Status> {
    let (names, chain) = read_chain_csv(&a.chain)?;
    let burn_in = a.burn_in.unwrap_or_else(|| default_burn_in(chain.samples.len()));
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let summary = summarize(&chain, burn_in, a.mass)?.named(&names);
    if let Some(out) = &a.out {
        write_json(&summary, out)?;
    }
    print_json(&summary)?;
    Ok(status(summary.reliable))
}

pub fn run_config(path: &Path, args: Vec<String>) -> Result<Status> {
    let cfg = ExperimentConfig::load(path)?;
    run_and_report(&cfg, "run", args)
}
