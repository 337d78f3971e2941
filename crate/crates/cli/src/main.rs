use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use msdrift::bayes::{contraction_diagnostics, posterior, GaussianPrior, PosteriorKind};
use msdrift::estimators::{
    bayes_compatible_drift, diffusion_filtered, diffusion_quadratic_variation, filtered_drift, mle_drift,
    path_functionals, shift_averaged_drift, subsampled_drift,
};
use msdrift::filter::{filter, FilterParams, Filtered};
use msdrift::harness::{self, ExperimentConfig, ModelSpec};
use msdrift::homogenize::homogenize;
use msdrift::io::{read_trajectory, write_trajectory};
use msdrift::sim::{simulate_homogenized, simulate_multiscale, SimConfig};
use msdrift::MultiscaleModel;

#[derive(Parser)]
#[command(name = "msdrift", version, about = "Drift and diffusion estimation for multiscale diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the multiscale (or homogenized) SDE and write the path.
    Simulate(SimulateArgs),
    /// Apply the exponential-family filter to a trajectory file.
    Filter(FilterArgs),
    /// Print the homogenized coefficients as JSON.
    Homogenize(HomogenizeArgs),
    /// Evaluate one estimator on a trajectory file.
    Estimate(EstimateArgs),
    /// Gaussian posterior for the drift coefficient.
    Bayes(BayesArgs),
    /// Run a configured experiment and write CSV plus JSON metadata.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model as inline JSON or a path to a JSON file, e.g.
    /// '{"slow":{"kind":"quadratic"},"fast":{"kind":"cos"},"alpha":[1]}'.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let text = if self.model.trim_start().starts_with('{') {
            self.model.clone()
        } else {
            std::fs::read_to_string(&self.model).with_context(|| format!("reading model file {}", self.model))?
        };
        serde_json::from_str(&text).context("parsing model spec")
    }

    fn build(&self) -> Result<MultiscaleModel> {
        let s = self.spec()?;
        Ok(MultiscaleModel::new(s.slow, s.fast, s.alpha, self.sigma, self.epsilon)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    t_final: f64,
    /// Step size; defaults to ε³.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    /// Discarded initial time; defaults to 10% of the horizon.
    #[arg(long)]
    burn_in: Option<f64>,
    /// Simulate the homogenized SDE instead.
    #[arg(long)]
    homogenized: bool,
    /// Output file; `.bin` selects the binary format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    delta: f64,
}

#[derive(Args)]
struct HomogenizeArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorKind {
    Mle,
    Filtered,
    BayesCompatible,
    Subsampled,
    ShiftAveraged,
    DiffusionQv,
    DiffusionFiltered,
}

#[derive(Args)]
struct FilterOpts {
    /// Precomputed filtered path; otherwise it is computed from `--beta`/`--delta`.
    #[arg(long)]
    filtered: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    delta: Option<f64>,
}

impl FilterOpts {
    fn load(&self, x: &msdrift::Trajectory) -> Result<Filtered> {
        let delta = self.delta.context("--delta is required for filtered quantities")?;
        let params = FilterParams::new(self.beta, delta)?;
        match &self.filtered {
            Some(p) => Ok(Filtered {
                params,
                path: read_trajectory(p)?,
            }),
            None => Ok(filter(x, &params)?),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Slow potential and drift coefficient; only `slow` is used.
    #[arg(long)]
    model: String,
    #[arg(long, value_enum)]
    kind: EstimatorKind,
    #[command(flatten)]
    filter: FilterOpts,
    /// Subsampling stride (in samples).
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct BayesArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    filter: FilterOpts,
    /// Homogenized diffusion coefficient; computed from the model if absent.
    #[arg(long)]
    diffusion: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    prior_variance: f64,
    /// Use unfiltered data in the likelihood.
    #[arg(long)]
    plain: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full-scale defaults (more replicas, horizons and ε values).
    #[arg(long)]
    full: bool,
    #[arg(long)]
    threads: Option<usize>,
}

/// Exit code 2: the run finished but some cells failed.
#[derive(Debug)]
struct FailedCells(usize);

impl std::fmt::Display for FailedCells {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed cell(s)", self.0)
    }
}

impl std::error::Error for FailedCells {}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let model = a.model.build()?;
    let dt = a.dt.unwrap_or_else(|| model.epsilon.powi(3));
    let mut cfg = SimConfig::new(a.t_final, dt, a.seed).with_x0(a.x0);
    if let Some(b) = a.burn_in {
        cfg = cfg.with_burn_in(b);
    }
    let x = if a.homogenized {
        let h = homogenize(&model)?;
        simulate_homogenized(&h.a, h.sigma, &model.slow, &cfg)?
    } else {
        simulate_multiscale(&model, &cfg)?
    };
    write_trajectory(&x, &a.out)?;
    Ok(())
}

fn run_filter(a: FilterArgs) -> Result<()> {
    let x = read_trajectory(&a.input)?;
    let z = filter(&x, &FilterParams::new(a.beta, a.delta)?)?;
    write_trajectory(&z.path, &a.output)?;
    Ok(())
}

fn run_homogenize(a: HomogenizeArgs) -> Result<()> {
    let h = homogenize(&a.model.build()?)?;
    print_json(&json!({ "K": h.k, "A": h.a, "Sigma": h.sigma, "Z": h.z, "Z_hat": h.z_hat }))
}

fn run_estimate(a: EstimateArgs) -> Result<()> {
    let spec = ModelArgs {
        model: a.model.clone(),
        sigma: 1.0,
        epsilon: 1.0,
    }
    .spec()?;
    let slow = &spec.slow;
    let x = read_trajectory(&a.input)?;
    let stride = || a.stride.context("--stride is required for subsampled estimators");
    let out = match a.kind {
        EstimatorKind::Mle => serde_json::to_value(mle_drift(&path_functionals(&x, None, slow)?)?)?,
        EstimatorKind::Filtered | EstimatorKind::BayesCompatible => {
            let z = a.filter.load(&x)?;
            let pf = path_functionals(&x, Some(&z), slow)?;
            let est = match a.kind {
                EstimatorKind::Filtered => filtered_drift(&pf)?,
                _ => bayes_compatible_drift(&pf)?,
            };
            serde_json::to_value(est)?
        }
        EstimatorKind::Subsampled => serde_json::to_value(subsampled_drift(&x, slow, stride()?)?)?,
        EstimatorKind::ShiftAveraged => serde_json::to_value(shift_averaged_drift(&x, slow, stride()?)?)?,
        EstimatorKind::DiffusionQv => serde_json::to_value(diffusion_quadratic_variation(&x))?,
        EstimatorKind::DiffusionFiltered => {
            let z = a.filter.load(&x)?;
            serde_json::to_value(diffusion_filtered(&x, &z)?)?
        }
    };
    print_json(&out)
}

fn run_bayes(a: BayesArgs) -> Result<()> {
    let model = a.model.build()?;
    let x = read_trajectory(&a.input)?;
    let sigma = match a.diffusion {
        Some(s) => s,
        None => homogenize(&model)?.sigma,
    };
    let kind = if a.plain {
        PosteriorKind::Plain
    } else {
        PosteriorKind::Filtered
    };
    let z = if a.plain && a.filter.delta.is_none() {
        None
    } else {
        Some(a.filter.load(&x)?)
    };
    let pf = path_functionals(&x, z.as_ref(), &model.slow)?;
    let prior = GaussianPrior::isotropic(pf.dim(), a.prior_variance)?;
    let post = posterior(&prior, &pf, sigma, kind)?;
    let report = contraction_diagnostics(&post, &pf)?;
    let cov: Vec<Vec<f64>> = post.cov.row_iter().map(|r| r.iter().copied().collect()).collect();
    print_json(&json!({
        "mean": post.mean.iter().copied().collect::<Vec<f64>>(),
        "cov": cov,
        "trace": report.trace,
        "distance_to_mle": report.distance_to_point_estimate,
    }))
}

fn run_experiment(a: ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text, a.full)?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = a.replicas {
        cfg.replicas = r;
    }
    if let Some(o) = a.out {
        cfg.out = Some(o);
    }
    cfg.validate()?;
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| Path::new(&format!("{}.csv", cfg.experiment.as_str())).to_path_buf());
    let result = match a.threads {
        Some(n) => harness::run_with_threads(&cfg, n)?,
        None => harness::run(&cfg),
    };
    let meta = harness::emit(&result, &out)?;
    log::info!("wrote {} and {}", out.display(), meta.display());
    if result.has_failures() {
        for f in &result.failures {
            log::warn!("{}: {}", f.cell, f.error);
        }
        let failed = result.records.iter().filter(|r| r.failed()).count();
        return Err(FailedCells(failed).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Filter(a) => run_filter(a),
        Command::Homogenize(a) => run_homogenize(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Bayes(a) => run_bayes(a),
        Command::Experiment(a) => run_experiment(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<FailedCells>() => {
            eprintln!("msdrift: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("msdrift: {e:#}");
            ExitCode::FAILURE
        }
    }
}
