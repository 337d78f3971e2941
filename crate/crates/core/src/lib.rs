//! Estimation of effective drift and diffusion coefficients for overdamped
//! Langevin dynamics with a fast periodic perturbation.
//!
//! The data model is the two-scale SDE
//!
//! ```text
//! dX = -α·V'(X) dt - (1/ε) p'(X/ε) dt + sqrt(2σ) dW
//! ```
//!
//! whose law converges, as ε → 0, to the single-scale SDE
//! `dX = -A·V'(X) dt + sqrt(2Σ) dW` with `A = Kα` and `Σ = Kσ`. The plain
//! maximum likelihood estimator applied to multiscale data recovers α, not A.
//! Smoothing the path with an exponential low-pass kernel and substituting
//! the smoothed path for one occurrence of X in the estimator removes that
//! bias.
//!
//! Modules:
//! - [`model`]: slow and fast potentials, multiscale drift.
//! - [`sim`]: seeded Euler–Maruyama trajectories and subsampling.
//! - [`homogenize`]: the coefficient K, partition functions, corrector Φ'.
//! - [`filter`]: the exponential kernel family and filtered paths.
//! - [`estimators`]: drift and diffusion estimators as path functionals.
//! - [`bayes`]: conjugate Gaussian posteriors over the drift.
//! - [`harness`]: config-driven numerical experiments.

pub mod bayes;
pub mod error;
pub mod estimators;
pub mod filter;
pub mod harness;
pub mod homogenize;
pub mod io;
mod linalg;
pub mod model;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use estimators::{DiffusionEstimate, DriftEstimate, PathFunctionals};
pub use filter::{FilterParams, Filtered};
pub use homogenize::HomogenizedModel;
pub use model::{FastPotential, MultiscaleModel, SlowPotential};
pub use sim::{SimConfig, Trajectory};
