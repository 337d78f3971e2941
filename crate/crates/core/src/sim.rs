//! Euler–Maruyama simulation of the multiscale and homogenized SDEs.
//!
//! Randomness comes from ChaCha12 (`rand_chacha::ChaCha12Rng`) seeded with
//! `seed_from_u64`, and standard normals from the ziggurat sampler of
//! `rand_distr::StandardNormal`. Replica `r` of an experiment with base seed
//! `s` uses seed `s + r` (wrapping).

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{slow_drift, MultiscaleModel, SlowPotential, MAX_BASIS};

/// A uniformly sampled real-valued path `values[j] = X(t0 + j·tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub tau: f64,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn new(t0: f64, tau: f64, values: Vec<f64>) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
        }
        if values.len() < 2 {
            return Err(Error::invalid("a trajectory needs at least two samples"));
        }
        if !t0.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trajectory values must be finite"));
        }
        Ok(Trajectory { t0, tau, values })
    }

    /// Number of steps n (one less than the number of samples).
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Observation length `T = n·tau`.
    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.tau
    }

    /// The first `steps` steps (so `steps + 1` samples).
    pub fn prefix(&self, steps: usize) -> Result<Trajectory> {
        if steps == 0 || steps > self.steps() {
            return Err(Error::invalid(format!(
                "prefix of {steps} steps out of range 1..={}",
                self.steps()
            )));
        }
        Ok(Trajectory {
            t0: self.t0,
            tau: self.tau,
            values: self.values[..=steps].to_vec(),
        })
    }

    /// Prefix covering observation time `t` (rounded to the nearest step).
    pub fn prefix_time(&self, t: f64) -> Result<Trajectory> {
        self.prefix((t / self.tau).round() as usize)
    }

    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.values.len() == other.values.len() && self.tau == other.tau && self.t0 == other.t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Observed duration after burn-in.
    pub t_final: f64,
    /// Integrator step, also the output spacing.
    pub dt: f64,
    pub seed: u64,
    pub x0: f64,
    /// Simulated time discarded before the first recorded sample.
    pub burn_in: f64,
}

impl SimConfig {
    /// `x0 = 0` and a burn-in of 10% of `t_final`.
    pub fn new(t_final: f64, dt: f64, seed: u64) -> Self {
        SimConfig {
            t_final,
            dt,
            seed,
            x0: 0.0,
            burn_in: 0.1 * t_final,
        }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(Error::invalid(format!(
                "t_final must be >= dt, got t_final = {} and dt = {}",
                self.t_final, self.dt
            )));
        }
        if !(self.burn_in.is_finite() && self.burn_in >= 0.0) {
            return Err(Error::invalid("burn_in must be >= 0"));
        }
        if !self.x0.is_finite() {
            return Err(Error::invalid("x0 must be finite"));
        }
        Ok(())
    }

    fn steps(&self) -> (usize, usize) {
        let burn = (self.burn_in / self.dt).round() as usize;
        let n = ((self.t_final / self.dt).round() as usize).max(1);
        (burn, n)
    }
}

fn euler_maruyama<F>(cfg: &SimConfig, noise_coef: f64, mut drift: F) -> Result<Trajectory>
where
    F: FnMut(f64) -> f64,
{
    cfg.validate()?;
    let (burn, n) = cfg.steps();
    let dt = cfg.dt;
    let noise = (2.0 * noise_coef * dt).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut x = cfg.x0;
    let mut values = Vec::with_capacity(n + 1);
    if burn == 0 {
        values.push(x);
    }
    for step in 1..=burn + n {
        let xi: f64 = StandardNormal.sample(&mut rng);
        x = x + drift(x) * dt + noise * xi;
        if !x.is_finite() {
            return Err(Error::NonFinite {
                step,
                time: step as f64 * dt,
            });
        }
        if step >= burn {
            values.push(x);
        }
    }
    Ok(Trajectory {
        t0: burn as f64 * dt,
        tau: dt,
        values,
    })
}

/// Simulates `dX = (−α·V'(X) − p'(X/ε)/ε) dt + sqrt(2σ) dW`.
pub fn simulate_multiscale(model: &MultiscaleModel, cfg: &SimConfig) -> Result<Trajectory> {
    model.validate()?;
    let eps2 = model.epsilon * model.epsilon;
    if cfg.dt > 0.1 * eps2 {
        warn!(
            "dt = {} exceeds eps^2/10 = {}; discretisation may bias estimators",
            cfg.dt,
            0.1 * eps2
        );
    }
    let mut buf = [0.0; MAX_BASIS];
    euler_maruyama(cfg, model.sigma, |x| model.drift_with(x, &mut buf))
}

/// Simulates `dX = −A·V'(X) dt + sqrt(2Σ) dW`.
pub fn simulate_homogenized(
    drift_coef: &[f64],
    sigma: f64,
    slow: &SlowPotential,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    slow.validate()?;
    if drift_coef.len() != slow.dim() {
        return Err(Error::invalid("drift coefficient length does not match the slow potential"));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut buf = [0.0; MAX_BASIS];
    euler_maruyama(cfg, sigma, |x| slow_drift(slow, drift_coef, x, &mut buf))
}

/// Every `stride`-th sample starting at `offset`, with spacing `stride·tau`.
pub fn subsample(x: &Trajectory, stride: usize, offset: usize) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    if offset >= stride {
        return Err(Error::invalid(format!("offset {offset} must be < stride {stride}")));
    }
    let values: Vec<f64> = x.values.iter().skip(offset).step_by(stride).copied().collect();
    if values.len() < 2 {
        return Err(Error::EmptyResult);
    }
    Ok(Trajectory {
        t0: x.t0 + offset as f64 * x.tau,
        tau: stride as f64 * x.tau,
        values,
    })
}
