use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FastPotential, SlowPotential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ZetaSweep,
    SubsampleCompare,
    BetaSweep,
    VarianceStudy,
    Multidim,
    BayesBistable,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ZetaSweep => "zeta_sweep",
            ExperimentKind::SubsampleCompare => "subsample_compare",
            ExperimentKind::BetaSweep => "beta_sweep",
            ExperimentKind::VarianceStudy => "variance_study",
            ExperimentKind::Multidim => "multidim",
            ExperimentKind::BayesBistable => "bayes_bistable",
        }
    }
}

/// Slow/fast potentials and the multiscale drift coefficient. σ and ε are
/// grid axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub slow: SlowPotential,
    pub fast: FastPotential,
    pub alpha: Vec<f64>,
}

/// Integrator step rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtRule {
    /// Fixed step.
    Fixed(f64),
    /// `dt = ε^power`; the default is `ε³`.
    EpsilonPower { epsilon_power: f64 },
}

impl Default for DtRule {
    fn default() -> Self {
        DtRule::EpsilonPower { epsilon_power: 3.0 }
    }
}

impl DtRule {
    pub fn dt(&self, epsilon: f64) -> f64 {
        match *self {
            DtRule::Fixed(dt) => dt,
            DtRule::EpsilonPower { epsilon_power } => epsilon.powf(epsilon_power),
        }
    }
}

/// Parameter axes. Which axes an experiment reads is listed on
/// [`ExperimentConfig::defaults`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub sigma: Vec<f64>,
    pub epsilon: Vec<f64>,
    /// Filter/subsampling width exponents, `δ = ε^ζ`.
    pub zeta: Vec<f64>,
    pub beta: Vec<f64>,
    /// Observation horizons. One path of the longest horizon is simulated
    /// per replica and shorter horizons use its prefixes.
    pub t_final: Vec<f64>,
    /// Fixed filter width used by `variance_study` and `multidim`.
    pub filter_delta: f64,
    /// Subsampling width exponent used by `variance_study` and `multidim`.
    pub subsample_zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    pub grid: Grid,
    pub replicas: usize,
    pub base_seed: u64,
    pub dt: DtRule,
    pub burn_in: f64,
    /// Isotropic prior variance for `bayes_bistable`.
    pub prior_variance: f64,
    /// Posterior mass is reported outside a ball of this radius around the
    /// homogenized A (`bayes_bistable`).
    pub ball_radius: f64,
    pub out: Option<PathBuf>,
}

/// A config file: `experiment` is required, every other field overrides
/// the defaults of that experiment.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    experiment: Option<ExperimentKind>,
    model: Option<PartialModel>,
    grid: Option<PartialGrid>,
    replicas: Option<usize>,
    base_seed: Option<u64>,
    dt: Option<DtRule>,
    burn_in: Option<f64>,
    prior_variance: Option<f64>,
    ball_radius: Option<f64>,
    out: Option<PathBuf>,
    full: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialModel {
    slow: Option<SlowPotential>,
    fast: Option<FastPotential>,
    alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialGrid {
    sigma: Option<Vec<f64>>,
    epsilon: Option<Vec<f64>>,
    zeta: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    t_final: Option<Vec<f64>>,
    filter_delta: Option<f64>,
    subsample_zeta: Option<f64>,
}

fn steps(lo: i32, hi: i32, denom: f64) -> Vec<f64> {
    (lo..=hi).map(|i| i as f64 / denom).collect()
}

fn bistable_scalar() -> SlowPotential {
    SlowPotential::polynomial(vec![vec![0.0, 0.0, -0.5, 0.0, 0.25]])
}

impl ExperimentConfig {
    /// Desk-scale defaults, or full scale with `full`.
    ///
    /// | experiment | model | axes read |
    /// |---|---|---|
    /// | `zeta_sweep` | `x²/2`, α = 1 | σ, ε, ζ, T |
    /// | `subsample_compare` | `x²/2`, α = 1 | σ, ε, ζ, β, T |
    /// | `beta_sweep` | `x²/2`, α = 1 | σ, ε, ζ, β, T |
    /// | `variance_study` | `x⁴/4 − x²/2`, α = 1 | σ, ε, β, T, `filter_delta`, `subsample_zeta` |
    /// | `multidim` | Chebyshev T₁..T₄, α = (−1, −½, ½, 1) | σ, ε, β, T, `filter_delta`, `subsample_zeta` |
    /// | `bayes_bistable` | `(x⁴/4, −x²/2)`, α = (1, 2) | σ, ε, ζ, β, T |
    pub fn defaults(kind: ExperimentKind, full: bool) -> Self {
        let quad = ModelSpec {
            slow: SlowPotential::Quadratic,
            fast: FastPotential::Cos,
            alpha: vec![1.0],
        };
        let base_grid = Grid {
            sigma: vec![1.0],
            epsilon: vec![0.1],
            zeta: vec![1.0],
            beta: vec![1.0],
            t_final: vec![1000.0],
            filter_delta: 1.0,
            subsample_zeta: 2.0 / 3.0,
        };
        let (model, grid, replicas) = match kind {
            ExperimentKind::ZetaSweep => {
                let grid = Grid {
                    zeta: steps(0, 30, 10.0),
                    epsilon: if full { vec![0.1, 0.05, 0.025] } else { vec![0.1] },
                    t_final: if full { vec![100.0, 300.0, 1000.0] } else { vec![1000.0] },
                    ..base_grid
                };
                (quad, grid, 4)
            }
            ExperimentKind::SubsampleCompare => {
                let grid = Grid {
                    sigma: vec![0.5, 0.7, 1.0],
                    zeta: steps(0, 10, 10.0),
                    beta: vec![1.0, 5.0],
                    ..base_grid
                };
                (quad, grid, 4)
            }
            ExperimentKind::BetaSweep => {
                let grid = Grid {
                    sigma: vec![0.5, 0.7, 1.0],
                    beta: steps(1, 10, 1.0),
                    ..base_grid
                };
                (quad, grid, 4)
            }
            ExperimentKind::VarianceStudy => {
                let model = ModelSpec {
                    slow: bistable_scalar(),
                    fast: FastPotential::Cos,
                    alpha: vec![1.0],
                };
                let grid = Grid {
                    beta: vec![1.0, 5.0],
                    t_final: vec![500.0, 1000.0],
                    ..base_grid
                };
                (model, grid, if full { 500 } else { 100 })
            }
            ExperimentKind::Multidim => {
                let model = ModelSpec {
                    slow: SlowPotential::chebyshev(4),
                    fast: FastPotential::Cos,
                    alpha: vec![-1.0, -0.5, 0.5, 1.0],
                };
                let grid = Grid {
                    epsilon: vec![0.05],
                    ..base_grid
                };
                (model, grid, 4)
            }
            ExperimentKind::BayesBistable => {
                let model = ModelSpec {
                    slow: SlowPotential::Bistable,
                    fast: FastPotential::Cos,
                    alpha: vec![1.0, 2.0],
                };
                let grid = Grid {
                    sigma: vec![0.7],
                    epsilon: vec![0.05],
                    t_final: vec![100.0, 200.0, 400.0],
                    ..base_grid
                };
                (model, grid, 8)
            }
        };
        ExperimentConfig {
            experiment: kind,
            model,
            grid,
            replicas,
            base_seed: 1,
            dt: DtRule::default(),
            burn_in: 50.0,
            prior_variance: 1.0,
            ball_radius: 0.1,
            out: None,
        }
    }

    /// Parses a JSON config, overlaying it on the experiment's defaults.
    /// `full` selects full-scale defaults (a `"full": true` field in the
    /// file does the same).
    pub fn from_json(text: &str, full: bool) -> Result<Self> {
        let partial: PartialConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        let kind = partial
            .experiment
            .ok_or_else(|| Error::Config("missing field `experiment`".into()))?;
        let mut cfg = Self::defaults(kind, full || partial.full.unwrap_or(false));
        if let Some(m) = partial.model {
            if let Some(v) = m.slow {
                cfg.model.slow = v;
            }
            if let Some(v) = m.fast {
                cfg.model.fast = v;
            }
            if let Some(v) = m.alpha {
                cfg.model.alpha = v;
            }
        }
        if let Some(g) = partial.grid {
            let grid = &mut cfg.grid;
            macro_rules! overlay {
                ($($field:ident),*) => { $( if let Some(v) = g.$field { grid.$field = v; } )* };
            }
            overlay!(sigma, epsilon, zeta, beta, t_final, filter_delta, subsample_zeta);
        }
        macro_rules! overlay_top {
            ($($field:ident),*) => { $( if let Some(v) = partial.$field { cfg.$field = v; } )* };
        }
        overlay_top!(replicas, base_seed, dt, burn_in, prior_variance, ball_radius);
        if partial.out.is_some() {
            cfg.out = partial.out;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let g = &self.grid;
        for (name, axis) in [
            ("sigma", &g.sigma),
            ("epsilon", &g.epsilon),
            ("zeta", &g.zeta),
            ("beta", &g.beta),
            ("t_final", &g.t_final),
        ] {
            if axis.is_empty() {
                return bad(format!("grid.{name} must not be empty"));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return bad(format!("grid.{name} must be finite"));
            }
        }
        if g.sigma.iter().any(|&s| s < 0.0) {
            return bad("grid.sigma must be >= 0".into());
        }
        if g.epsilon.iter().any(|&e| e <= 0.0) {
            return bad("grid.epsilon must be > 0".into());
        }
        if g.beta.iter().any(|&b| b < 1.0) {
            return bad("grid.beta must be >= 1".into());
        }
        if g.t_final.iter().any(|&t| t <= 0.0) {
            return bad("grid.t_final must be > 0".into());
        }
        if !(g.filter_delta > 0.0) {
            return bad("grid.filter_delta must be > 0".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1".into());
        }
        if !(self.burn_in >= 0.0) {
            return bad("burn_in must be >= 0".into());
        }
        if !(self.prior_variance > 0.0) {
            return bad("prior_variance must be > 0".into());
        }
        for &eps in &g.epsilon {
            let dt = self.dt.dt(eps);
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt rule gives dt = {dt} at epsilon = {eps}"));
            }
        }
        self.model.slow.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.model.fast.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.model.alpha.len() != self.model.slow.dim() {
            return bad(format!(
                "model.alpha has {} components, slow potential has {}",
                self.model.alpha.len(),
                self.model.slow.dim()
            ));
        }
        Ok(())
    }

    pub fn t_max(&self) -> f64 {
        self.grid.t_final.iter().copied().fold(0.0, f64::max)
    }
}
