use log::warn;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{CellFailure, ExperimentResult, Record};
use crate::bayes::{contraction_diagnostics, posterior, GaussianPrior, PosteriorKind};
use crate::error::{Error, Result};
use crate::estimators::{
    bayes_compatible_drift, diffusion_filtered, diffusion_quadratic_variation, filtered_drift, mle_drift,
    path_functionals, shift_averaged_drift, subsampled_drift,
};
use crate::filter::{filter, filter_beta1, FilterParams, Filtered};
use crate::homogenize::homogenize;
use crate::model::{MultiscaleModel, SlowPotential};
use crate::sim::{simulate_multiscale, SimConfig, Trajectory};

const BALL_MASS_SAMPLES: usize = 4096;

/// Subsampling stride for width `delta` on a grid of spacing `tau`:
/// `max(1, round(delta/tau))`.
pub fn stride_for(delta: f64, tau: f64) -> usize {
    ((delta / tau).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tags {
    t_final: Option<f64>,
    zeta: Option<f64>,
    beta: Option<f64>,
    delta: Option<f64>,
    stride: Option<usize>,
}

impl Tags {
    fn at(t: f64) -> Self {
        Tags {
            t_final: Some(t),
            ..Tags::default()
        }
    }
}

/// Accumulates the rows of one (σ, ε, replica) cell.
struct Cell {
    experiment: ExperimentKind,
    sigma: f64,
    epsilon: f64,
    replica: Option<usize>,
    dim: usize,
    records: Vec<Record>,
    failures: Vec<CellFailure>,
}

impl Cell {
    fn new(experiment: ExperimentKind, sigma: f64, epsilon: f64, replica: Option<usize>, dim: usize) -> Self {
        Cell {
            experiment,
            sigma,
            epsilon,
            replica,
            dim,
            records: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn row(&self, tags: Tags, estimator: &'static str, component: usize, value: Option<f64>) -> Record {
        Record {
            experiment: self.experiment,
            sigma: self.sigma,
            epsilon: self.epsilon,
            t_final: tags.t_final,
            zeta: tags.zeta,
            beta: tags.beta,
            delta: tags.delta,
            stride: tags.stride,
            replica: self.replica,
            estimator,
            component,
            value,
        }
    }

    fn fail(&mut self, tags: Tags, estimator: &'static str, err: &Error) {
        self.failures.push(CellFailure {
            cell: format!(
                "sigma={} epsilon={} replica={:?} t_final={:?} zeta={:?} beta={:?} estimator={estimator}",
                self.sigma, self.epsilon, self.replica, tags.t_final, tags.zeta, tags.beta
            ),
            error: err.to_string(),
        });
    }

    /// Records a vector of `len` components, or `len` failed rows.
    fn push_vec(&mut self, tags: Tags, estimator: &'static str, len: usize, res: Result<Vec<f64>>) {
        match res {
            Ok(v) => {
                for (i, x) in v.into_iter().enumerate() {
                    let r = self.row(tags, estimator, i, Some(x));
                    self.records.push(r);
                }
            }
            Err(e) => {
                self.fail(tags, estimator, &e);
                for i in 0..len {
                    let r = self.row(tags, estimator, i, None);
                    self.records.push(r);
                }
            }
        }
    }

    fn push_drift(&mut self, tags: Tags, estimator: &'static str, res: Result<Vec<f64>>) {
        self.push_vec(tags, estimator, self.dim, res)
    }

    fn push_scalar(&mut self, tags: Tags, estimator: &'static str, res: Result<f64>) {
        self.push_vec(tags, estimator, 1, res.map(|v| vec![v]))
    }
}

fn prefix_filtered(z: &Filtered, t: f64) -> Result<Filtered> {
    Ok(Filtered {
        params: z.params,
        path: z.path.prefix_time(t)?,
    })
}

/// Warns when the leading term of `α·V` is not an even power with positive
/// coefficient; such potentials may not confine the process.
fn check_confinement(slow: &SlowPotential, alpha: &[f64]) {
    let leading = match slow {
        SlowPotential::Quadratic => Some((2, alpha[0])),
        SlowPotential::Bistable => Some((4, alpha[0])).filter(|l| l.1 != 0.0).or(Some((2, -alpha[1]))),
        SlowPotential::Chebyshev { n } => Some((*n, alpha[n - 1])),
        SlowPotential::Polynomial { coefficients } => {
            let degree = coefficients.iter().map(Vec::len).max().unwrap_or(0);
            (0..degree).rev().find_map(|k| {
                let c: f64 = coefficients
                    .iter()
                    .zip(alpha)
                    .map(|(p, a)| a * p.get(k).copied().unwrap_or(0.0))
                    .sum();
                (c != 0.0).then_some((k, c))
            })
        }
    };
    match leading {
        Some((deg, c)) if deg % 2 == 0 && deg > 0 && c > 0.0 => {}
        _ => warn!("slow potential {slow:?} with alpha {alpha:?} may not be confining"),
    }
}

/// Runs `body` on one simulated path per (σ, ε, replica) and adds the
/// homogenized ground truth per (σ, ε).
fn run_cells<F>(kind: ExperimentKind, cfg: &ExperimentConfig, body: F) -> ExperimentResult
where
    F: Fn(&mut Cell, &MultiscaleModel, &Trajectory) + Sync,
{
    let spec = &cfg.model;
    check_confinement(&spec.slow, &spec.alpha);
    let dim = spec.slow.dim();
    let mut jobs = Vec::new();
    for &sigma in &cfg.grid.sigma {
        for &epsilon in &cfg.grid.epsilon {
            jobs.push((sigma, epsilon, None));
            for r in 0..cfg.replicas {
                jobs.push((sigma, epsilon, Some(r)));
            }
        }
    }
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(sigma, epsilon, replica)| {
            let mut cell = Cell::new(kind, sigma, epsilon, replica, dim);
            let model = MultiscaleModel::new(spec.slow.clone(), spec.fast.clone(), spec.alpha.clone(), sigma, epsilon);
            let model = match model {
                Ok(m) => m,
                Err(e) => {
                    cell.push_scalar(Tags::default(), "simulation", Err(e));
                    return cell;
                }
            };
            match replica {
                None => {
                    let hom = homogenize(&model);
                    cell.push_drift(Tags::default(), "homogenized_a", hom.as_ref().map(|h| h.a.clone()).map_err(clone_err));
                    cell.push_scalar(Tags::default(), "homogenized_sigma", hom.as_ref().map(|h| h.sigma).map_err(clone_err));
                    cell.push_scalar(Tags::default(), "homogenized_k", hom.map(|h| h.k));
                }
                Some(r) => {
                    let sim = SimConfig {
                        t_final: cfg.t_max(),
                        dt: cfg.dt.dt(epsilon),
                        seed: cfg.base_seed.wrapping_add(r as u64),
                        x0: 0.0,
                        burn_in: cfg.burn_in,
                    };
                    match simulate_multiscale(&model, &sim) {
                        Ok(x) => body(&mut cell, &model, &x),
                        Err(e) => cell.push_scalar(Tags::default(), "simulation", Err(e)),
                    }
                }
            }
            cell
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for c in cells {
        records.extend(c.records);
        failures.extend(c.failures);
    }
    let mut cfg = cfg.clone();
    cfg.experiment = kind;
    ExperimentResult::new(cfg, records, failures)
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::QuadratureFailure(n) => Error::QuadratureFailure(*n),
        other => Error::InvalidParameter(other.to_string()),
    }
}

/// Filtered estimator `Â_k` across `δ = ε^ζ` with β = 1, plus the plain MLE
/// and both diffusion estimators.
pub fn run_zeta_sweep(cfg: &ExperimentConfig) -> ExperimentResult {
    run_cells(ExperimentKind::ZetaSweep, cfg, |cell, model, x| {
        let slow = &model.slow;
        for &t in &cfg.grid.t_final {
            let tags = Tags::at(t);
            let xp = x.prefix_time(t);
            let mle = xp
                .as_ref()
                .map_err(clone_err)
                .and_then(|xp| path_functionals(xp, None, slow))
                .and_then(|pf| mle_drift(&pf))
                .map(|e| e.value);
            cell.push_drift(tags, "mle", mle);
            let qv = xp.as_ref().map_err(clone_err).map(|xp| diffusion_quadratic_variation(xp).value);
            cell.push_scalar(tags, "diffusion_qv", qv);
        }
        for &zeta in &cfg.grid.zeta {
            let delta = model.epsilon.powf(zeta);
            let z = filter_beta1(x, delta);
            for &t in &cfg.grid.t_final {
                let tags = Tags {
                    t_final: Some(t),
                    zeta: Some(zeta),
                    beta: Some(1.0),
                    delta: Some(delta),
                    stride: None,
                };
                let pair = z
                    .as_ref()
                    .map_err(clone_err)
                    .and_then(|z| Ok((x.prefix_time(t)?, prefix_filtered(z, t)?)));
                let est = pair
                    .as_ref()
                    .map_err(clone_err)
                    .and_then(|(xp, zp)| path_functionals(xp, Some(zp), slow))
                    .and_then(|pf| filtered_drift(&pf))
                    .map(|e| e.value);
                cell.push_drift(tags, "filtered", est);
                let sig = pair
                    .as_ref()
                    .map_err(clone_err)
                    .and_then(|(xp, zp)| diffusion_filtered(xp, zp))
                    .map(|d| d.value);
                cell.push_scalar(tags, "diffusion_filtered", sig);
            }
        }
    })
}

fn filtered_cells(cell: &mut Cell, slow: &SlowPotential, x: &Trajectory, zeta: f64, betas: &[f64], t_list: &[f64]) {
    let delta = cell.epsilon.powf(zeta);
    for &beta in betas {
        let z = FilterParams::new(beta, delta).and_then(|fp| filter(x, &fp));
        for &t in t_list {
            let tags = Tags {
                t_final: Some(t),
                zeta: Some(zeta),
                beta: Some(beta),
                delta: Some(delta),
                stride: None,
            };
            let est = z
                .as_ref()
                .map_err(clone_err)
                .and_then(|z| path_functionals(&x.prefix_time(t)?, Some(&prefix_filtered(z, t)?), slow))
                .and_then(|pf| filtered_drift(&pf))
                .map(|e| e.value);
            cell.push_drift(tags, "filtered", est);
        }
    }
}

fn subsampled_cell(cell: &mut Cell, slow: &SlowPotential, x: &Trajectory, zeta: f64, t: f64, shift_average: bool) {
    let stride = stride_for(cell.epsilon.powf(zeta), x.tau);
    let tags = Tags {
        t_final: Some(t),
        zeta: Some(zeta),
        beta: None,
        delta: Some(stride as f64 * x.tau),
        stride: Some(stride),
    };
    let xp = x.prefix_time(t);
    let est = xp
        .as_ref()
        .map_err(clone_err)
        .and_then(|xp| subsampled_drift(xp, slow, stride))
        .map(|e| e.value);
    cell.push_drift(tags, "subsampled", est);
    if shift_average {
        let est = xp
            .as_ref()
            .map_err(clone_err)
            .and_then(|xp| shift_averaged_drift(xp, slow, stride))
            .map(|e| e.value);
        cell.push_drift(tags, "shift_averaged", est);
    }
}

fn mle_cell(cell: &mut Cell, slow: &SlowPotential, x: &Trajectory, t: f64) {
    let est = x
        .prefix_time(t)
        .and_then(|xp| path_functionals(&xp, None, slow))
        .and_then(|pf| mle_drift(&pf))
        .map(|e| e.value);
    cell.push_drift(Tags::at(t), "mle", est);
}

/// Subsampled MLE `Â_δ` against `Â_k` for every β, both at width `δ = ε^ζ`.
pub fn run_subsample_compare(cfg: &ExperimentConfig) -> ExperimentResult {
    run_cells(ExperimentKind::SubsampleCompare, cfg, |cell, model, x| {
        for &zeta in &cfg.grid.zeta {
            for &t in &cfg.grid.t_final {
                subsampled_cell(cell, &model.slow, x, zeta, t, false);
            }
            filtered_cells(cell, &model.slow, x, zeta, &cfg.grid.beta, &cfg.grid.t_final);
        }
    })
}

/// `Â_k` over the kernel exponent β at `δ = ε^ζ` (ζ = 1 by default).
pub fn run_beta_sweep(cfg: &ExperimentConfig) -> ExperimentResult {
    run_cells(ExperimentKind::BetaSweep, cfg, |cell, model, x| {
        for &zeta in &cfg.grid.zeta {
            filtered_cells(cell, &model.slow, x, zeta, &cfg.grid.beta, &cfg.grid.t_final);
        }
    })
}

fn fixed_width_filtered(cell: &mut Cell, slow: &SlowPotential, x: &Trajectory, delta: f64, betas: &[f64], t_list: &[f64]) {
    for &beta in betas {
        let z = FilterParams::new(beta, delta).and_then(|fp| filter(x, &fp));
        for &t in t_list {
            let tags = Tags {
                t_final: Some(t),
                zeta: None,
                beta: Some(beta),
                delta: Some(delta),
                stride: None,
            };
            let est = z
                .as_ref()
                .map_err(clone_err)
                .and_then(|z| path_functionals(&x.prefix_time(t)?, Some(&prefix_filtered(z, t)?), slow))
                .and_then(|pf| filtered_drift(&pf))
                .map(|e| e.value);
            cell.push_drift(tags, "filtered", est);
        }
    }
}

/// Replica distributions of `Â_k` (each β, fixed δ), `Â_δ` and `Â_δ^avg`.
pub fn run_variance_study(cfg: &ExperimentConfig) -> ExperimentResult {
    run_cells(ExperimentKind::VarianceStudy, cfg, |cell, model, x| {
        let g = &cfg.grid;
        fixed_width_filtered(cell, &model.slow, x, g.filter_delta, &g.beta, &g.t_final);
        for &t in &g.t_final {
            subsampled_cell(cell, &model.slow, x, g.subsample_zeta, t, true);
            mle_cell(cell, &model.slow, x, t);
        }
    })
}

/// `Â`, `Â_k` (fixed δ) and `Â_δ` for a multi-component slow potential.
pub fn run_multidim(cfg: &ExperimentConfig) -> ExperimentResult {
    run_cells(ExperimentKind::Multidim, cfg, |cell, model, x| {
        let g = &cfg.grid;
        fixed_width_filtered(cell, &model.slow, x, g.filter_delta, &g.beta, &g.t_final);
        for &t in &g.t_final {
            subsampled_cell(cell, &model.slow, x, g.subsample_zeta, t, false);
            mle_cell(cell, &model.slow, x, t);
        }
    })
}

/// Fraction of posterior mass outside the ball of `radius` around `center`,
/// by Monte Carlo.
fn mass_outside_ball(
    mean: &DVector<f64>,
    cov: &nalgebra::DMatrix<f64>,
    center: &[f64],
    radius: f64,
    seed: u64,
) -> Result<f64> {
    let l = cov.clone().cholesky().ok_or(Error::SingularCovariance)?.unpack();
    let n = mean.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut outside = 0usize;
    let mut xi = DVector::zeros(n);
    for _ in 0..BALL_MASS_SAMPLES {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let sample = mean + &l * &xi;
        let d2: f64 = sample.iter().zip(center).map(|(s, c)| (s - c).powi(2)).sum();
        if d2 > radius * radius {
            outside += 1;
        }
    }
    Ok(outside as f64 / BALL_MASS_SAMPLES as f64)
}

/// Filtered and plain Gaussian posteriors at each horizon, with `Σ` from
/// homogenization, plus `Ã_k` and the filtered diffusion estimate.
pub fn run_bayes_bistable(cfg: &ExperimentConfig) -> ExperimentResult {
    run_cells(ExperimentKind::BayesBistable, cfg, |cell, model, x| {
        let slow = &model.slow;
        let dim = slow.dim();
        let hom = homogenize(model);
        let prior = GaussianPrior::isotropic(dim, cfg.prior_variance);
        let seed = cfg.base_seed.wrapping_add(cell.replica.unwrap_or(0) as u64) ^ 0x9e37_79b9_7f4a_7c15;
        for &zeta in &cfg.grid.zeta {
            let delta = model.epsilon.powf(zeta);
            for &beta in &cfg.grid.beta {
                let z = FilterParams::new(beta, delta).and_then(|fp| filter(x, &fp));
                for &t in &cfg.grid.t_final {
                    let tags = Tags {
                        t_final: Some(t),
                        zeta: Some(zeta),
                        beta: Some(beta),
                        delta: Some(delta),
                        stride: None,
                    };
                    let pair = z
                        .as_ref()
                        .map_err(clone_err)
                        .and_then(|z| Ok((x.prefix_time(t)?, prefix_filtered(z, t)?)));
                    let pf = pair
                        .as_ref()
                        .map_err(clone_err)
                        .and_then(|(xp, zp)| path_functionals(xp, Some(zp), slow));

                    cell.push_drift(tags, "mle", pf.as_ref().map_err(clone_err).and_then(|pf| mle_drift(pf)).map(|e| e.value));
                    cell.push_drift(tags, "filtered", pf.as_ref().map_err(clone_err).and_then(|pf| filtered_drift(pf)).map(|e| e.value));
                    cell.push_drift(
                        tags,
                        "bayes_compatible",
                        pf.as_ref().map_err(clone_err).and_then(|pf| bayes_compatible_drift(pf)).map(|e| e.value),
                    );
                    let sig = pair
                        .as_ref()
                        .map_err(clone_err)
                        .and_then(|(xp, zp)| diffusion_filtered(xp, zp))
                        .map(|d| d.value);
                    cell.push_scalar(tags, "diffusion_filtered", sig);

                    let setup = pf.as_ref().map_err(clone_err).and_then(|pf| {
                        let h = hom.as_ref().map_err(clone_err)?;
                        let prior = prior.as_ref().map_err(clone_err)?;
                        Ok((pf, h, prior))
                    });
                    let filtered = setup
                        .as_ref()
                        .map_err(clone_err)
                        .and_then(|(pf, h, prior)| posterior(prior, pf, h.sigma, PosteriorKind::Filtered));
                    let plain = setup
                        .as_ref()
                        .map_err(clone_err)
                        .and_then(|(pf, h, prior)| posterior(prior, pf, h.sigma, PosteriorKind::Plain));
                    let post = || filtered.as_ref().map_err(clone_err);
                    cell.push_drift(tags, "posterior_mean", post().map(|p| p.mean.iter().copied().collect()));
                    cell.push_vec(
                        tags,
                        "posterior_cov",
                        dim * dim,
                        post().map(|p| p.cov.transpose().iter().copied().collect()),
                    );
                    cell.push_scalar(tags, "posterior_trace", post().map(|p| p.cov.trace()));
                    cell.push_drift(
                        tags,
                        "posterior_mean_plain",
                        plain.as_ref().map_err(clone_err).map(|p| p.mean.iter().copied().collect()),
                    );
                    cell.push_scalar(
                        tags,
                        "posterior_cov_equal",
                        match (&filtered, &plain) {
                            (Ok(a), Ok(b)) => Ok(if a.cov == b.cov { 1.0 } else { 0.0 }),
                            (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
                        },
                    );
                    let dist = post().and_then(|p| {
                        let pf = pf.as_ref().map_err(clone_err)?;
                        contraction_diagnostics(p, pf).map(|r| r.distance_to_point_estimate)
                    });
                    cell.push_scalar(tags, "posterior_distance", dist);
                    let mass = post().and_then(|p| {
                        let h = hom.as_ref().map_err(clone_err)?;
                        mass_outside_ball(&p.mean, &p.cov, &h.a, cfg.ball_radius, seed)
                    });
                    cell.push_scalar(tags, "posterior_mass_outside_ball", mass);
                }
            }
        }
    })
}

/// Dispatches on `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> ExperimentResult {
    match cfg.experiment {
        ExperimentKind::ZetaSweep => run_zeta_sweep(cfg),
        ExperimentKind::SubsampleCompare => run_subsample_compare(cfg),
        ExperimentKind::BetaSweep => run_beta_sweep(cfg),
        ExperimentKind::VarianceStudy => run_variance_study(cfg),
        ExperimentKind::Multidim => run_multidim(cfg),
        ExperimentKind::BayesBistable => run_bayes_bistable(cfg),
    }
}

/// [`run`] on a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| run(cfg)))
}
