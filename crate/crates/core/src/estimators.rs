//! Drift and diffusion estimators as discretised path functionals.
//!
//! On a grid with spacing τ and `T = nτ`:
//!
//! ```text
//! M  = (τ/T) Σ V'(X_j) ⊗ V'(X_j)      h  = (1/T) Σ V'(X_j) (X_{j+1} − X_j)
//! M̃ = (τ/T) Σ V'(Z_j) ⊗ V'(X_j)      h̃ = (1/T) Σ V'(Z_j) (X_{j+1} − X_j)
//! ```
//!
//! The stochastic integrals always use the left-endpoint integrand and the
//! forward increment of X, never of Z. M̃ is used as is, not symmetrised.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterParams, Filtered};
use crate::linalg;
use crate::model::{SlowPotential, MAX_BASIS};
use crate::sim::{subsample, Trajectory};

/// Smallest admissible eigenvalue of M.
pub const LAMBDA_MIN_TOL: f64 = 1e-10;
/// Largest admissible condition number of M̃.
pub const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctionals {
    pub m: DMatrix<f64>,
    pub h: DVector<f64>,
    pub m_tilde: DMatrix<f64>,
    pub h_tilde: DVector<f64>,
    pub t_final: f64,
    pub tau: f64,
    /// λ_min(M), the data-side conditioning check for the Gram matrix.
    pub lambda_min: f64,
    pub filter: Option<FilterParams>,
}

impl PathFunctionals {
    /// Assembles functionals from given parts.
    pub fn from_parts(
        m: DMatrix<f64>,
        h: DVector<f64>,
        m_tilde: DMatrix<f64>,
        h_tilde: DVector<f64>,
        t_final: f64,
    ) -> Self {
        let lambda_min = linalg::lambda_min(&m);
        PathFunctionals {
            m,
            h,
            m_tilde,
            h_tilde,
            t_final,
            tau: f64::NAN,
            lambda_min,
            filter: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }
}

/// Riemann/Itô sums over `x`, and over the filtered path `z` when given.
/// Without `z`, `M̃ = M` and `h̃ = h`.
pub fn path_functionals(
    x: &Trajectory,
    z: Option<&Filtered>,
    slow: &SlowPotential,
) -> Result<PathFunctionals> {
    slow.validate()?;
    if let Some(z) = z {
        if !x.same_grid(&z.path) {
            return Err(Error::GridMismatch(format!(
                "x has {} samples at tau = {}, z has {} at tau = {}",
                x.values.len(),
                x.tau,
                z.path.values.len(),
                z.path.tau
            )));
        }
    }
    let n = slow.dim();
    let steps = x.steps();
    let t_final = x.duration();
    let mut m = vec![0.0; n * n];
    let mut h = vec![0.0; n];
    let mut mt = vec![0.0; n * n];
    let mut ht = vec![0.0; n];
    let mut gx = [0.0; MAX_BASIS];
    let mut gz = [0.0; MAX_BASIS];
    for j in 0..steps {
        let xj = x.values[j];
        let dx = x.values[j + 1] - xj;
        slow.grad_into(xj, &mut gx[..n]);
        for r in 0..n {
            h[r] += gx[r] * dx;
            for c in 0..n {
                m[r * n + c] += gx[r] * gx[c];
            }
        }
        if let Some(z) = z {
            slow.grad_into(z.path.values[j], &mut gz[..n]);
            for r in 0..n {
                ht[r] += gz[r] * dx;
                for c in 0..n {
                    mt[r * n + c] += gz[r] * gx[c];
                }
            }
        }
    }
    let scale_m = x.tau / t_final;
    let scale_h = 1.0 / t_final;
    let m = DMatrix::from_row_slice(n, n, &m) * scale_m;
    let h = DVector::from_vec(h) * scale_h;
    let (m_tilde, h_tilde) = if z.is_some() {
        (DMatrix::from_row_slice(n, n, &mt) * scale_m, DVector::from_vec(ht) * scale_h)
    } else {
        (m.clone(), h.clone())
    };
    let lambda_min = linalg::lambda_min(&m);
    Ok(PathFunctionals {
        m,
        h,
        m_tilde,
        h_tilde,
        t_final,
        tau: x.tau,
        lambda_min,
        filter: z.map(|z| z.params),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Mle,
    Filtered,
    BayesCompatible,
    Subsampled,
    ShiftAveraged,
}

impl DriftKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriftKind::Mle => "mle",
            DriftKind::Filtered => "filtered",
            DriftKind::BayesCompatible => "bayes_compatible",
            DriftKind::Subsampled => "subsampled",
            DriftKind::ShiftAveraged => "shift_averaged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lambda_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    pub t_final: f64,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub value: Vec<f64>,
    pub kind: DriftKind,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionKind {
    QuadraticVariation,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEstimate {
    pub value: f64,
    pub kind: DiffusionKind,
}

fn check_gram(pf: &PathFunctionals) -> Result<()> {
    if !(pf.lambda_min > LAMBDA_MIN_TOL) {
        return Err(Error::SingularGram(format!(
            "lambda_min(M) = {:e} <= {LAMBDA_MIN_TOL:e}",
            pf.lambda_min
        )));
    }
    Ok(())
}

// All drift estimators go through the same LU solve so that Z = X yields
// bitwise-identical results.
fn solve_negated(mat: &DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<Vec<f64>> {
    let sol = linalg::lu_solve(mat, rhs).ok_or_else(|| Error::SingularGram(format!("{what} is singular")))?;
    let value: Vec<f64> = sol.iter().map(|v| -v).collect();
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularGram(format!("{what} solve produced non-finite values")));
    }
    Ok(value)
}

fn diagnostics(pf: &PathFunctionals, condition: Option<f64>) -> Diagnostics {
    Diagnostics {
        lambda_min: pf.lambda_min,
        condition,
        t_final: pf.t_final,
        tau: pf.tau,
        filter: pf.filter,
        stride: None,
    }
}

/// `Â = −M⁻¹h`.
pub fn mle_drift(pf: &PathFunctionals) -> Result<DriftEstimate> {
    check_gram(pf)?;
    Ok(DriftEstimate {
        value: solve_negated(&pf.m, &pf.h, "M")?,
        kind: DriftKind::Mle,
        diagnostics: diagnostics(pf, None),
    })
}

/// `Â_k = −M̃⁻¹h̃`.
pub fn filtered_drift(pf: &PathFunctionals) -> Result<DriftEstimate> {
    let cond = linalg::condition_number(&pf.m_tilde);
    if !(cond <= CONDITION_CAP) {
        return Err(Error::SingularGram(format!("cond(M~) = {cond:e} > {CONDITION_CAP:e}")));
    }
    Ok(DriftEstimate {
        value: solve_negated(&pf.m_tilde, &pf.h_tilde, "M~")?,
        kind: DriftKind::Filtered,
        diagnostics: diagnostics(pf, Some(cond)),
    })
}

/// `Ã_k = −M⁻¹h̃`, the maximiser of the filtered-data likelihood.
pub fn bayes_compatible_drift(pf: &PathFunctionals) -> Result<DriftEstimate> {
    check_gram(pf)?;
    Ok(DriftEstimate {
        value: solve_negated(&pf.m, &pf.h_tilde, "M")?,
        kind: DriftKind::BayesCompatible,
        diagnostics: diagnostics(pf, None),
    })
}

fn subsampled_at(x: &Trajectory, slow: &SlowPotential, stride: usize, offset: usize) -> Result<DriftEstimate> {
    let sub = subsample(x, stride, offset)?;
    let pf = path_functionals(&sub, None, slow)?;
    let mut est = mle_drift(&pf)?;
    est.kind = DriftKind::Subsampled;
    est.diagnostics.stride = Some(stride);
    Ok(est)
}

/// MLE on every `stride`-th sample, i.e. with subsampling width `stride·τ`.
pub fn subsampled_drift(x: &Trajectory, slow: &SlowPotential, stride: usize) -> Result<DriftEstimate> {
    subsampled_at(x, slow, stride, 0)
}

/// Mean over all offsets `0..stride` of the offset-shifted subsampled MLE.
pub fn shift_averaged_drift(x: &Trajectory, slow: &SlowPotential, stride: usize) -> Result<DriftEstimate> {
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    let mut sum = vec![0.0; slow.dim()];
    let mut first = None;
    for offset in 0..stride {
        let est = subsampled_at(x, slow, stride, offset)?;
        for (s, v) in sum.iter_mut().zip(&est.value) {
            *s += v;
        }
        first.get_or_insert(est.diagnostics);
    }
    let mut diagnostics = first.expect("stride >= 1");
    diagnostics.stride = Some(stride);
    Ok(DriftEstimate {
        value: sum.into_iter().map(|s| s / stride as f64).collect(),
        kind: DriftKind::ShiftAveraged,
        diagnostics,
    })
}

/// `(1/2T) Σ (X_{j+1} − X_j)²`, consistent for σ on multiscale data.
pub fn diffusion_quadratic_variation(x: &Trajectory) -> DiffusionEstimate {
    let qv: f64 = x.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    DiffusionEstimate {
        value: qv / (2.0 * x.duration()),
        kind: DiffusionKind::QuadraticVariation,
    }
}

/// `Σ̂_k = (1/δT) Σ τ (X_j − Z_j)²` (left endpoint). The filter must be the
/// β = 1 kernel; δ is taken from it.
pub fn diffusion_filtered(x: &Trajectory, z: &Filtered) -> Result<DiffusionEstimate> {
    if !x.same_grid(&z.path) {
        return Err(Error::GridMismatch("x and z differ in length, t0 or tau".into()));
    }
    if !z.params.is_exponential() {
        return Err(Error::invalid(format!(
            "filtered diffusion estimator needs beta = 1, got {}",
            z.params.beta
        )));
    }
    let steps = x.steps();
    let sum: f64 = (0..steps).map(|j| (x.values[j] - z.path.values[j]).powi(2)).sum();
    Ok(DiffusionEstimate {
        value: x.tau * sum / (z.params.delta * x.duration()),
        kind: DiffusionKind::Filtered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::filter_beta1;

    fn traj(values: Vec<f64>, tau: f64) -> Trajectory {
        Trajectory::new(0.0, tau, values).unwrap()
    }

    fn with_z(z: Vec<f64>, tau: f64) -> Filtered {
        Filtered {
            params: FilterParams::exponential(0.5).unwrap(),
            path: traj(z, tau),
        }
    }

    #[test]
    fn functionals_hand_example() {
        let x = traj(vec![0.0, 1.0, 2.0], 1.0);
        let pf = path_functionals(&x, None, &SlowPotential::Quadratic).unwrap();
        assert_eq!(pf.m[(0, 0)], 0.5);
        assert_eq!(pf.h[0], 0.5);
        assert_eq!(pf.t_final, 2.0);
        assert_eq!(mle_drift(&pf).unwrap().value, vec![-1.0]);

        let z = with_z(vec![0.0, 0.0, 1.0], 1.0);
        let pf = path_functionals(&x, Some(&z), &SlowPotential::Quadratic).unwrap();
        assert_eq!(pf.m_tilde[(0, 0)], 0.0);
        assert_eq!(pf.h_tilde[0], 0.0);
        assert_eq!(bayes_compatible_drift(&pf).unwrap().value, vec![0.0]);
        assert!(matches!(filtered_drift(&pf), Err(Error::SingularGram(_))));
    }

    #[test]
    fn constant_path() {
        let x = traj(vec![1.5; 6], 0.1);
        let pf = path_functionals(&x, None, &SlowPotential::Bistable).unwrap();
        assert!(pf.h.iter().all(|&v| v == 0.0));
        let g = SlowPotential::Bistable.grad(1.5);
        for r in 0..2 {
            for c in 0..2 {
                assert!((pf.m[(r, c)] - g[r] * g[c]).abs() < 1e-12);
            }
        }
        // rank one: singular Gram
        assert!(matches!(mle_drift(&pf), Err(Error::SingularGram(_))));
    }

    #[test]
    fn zero_increment_gives_zero_estimate() {
        let x = traj(vec![1.0, 1.0], 0.5);
        let pf = path_functionals(&x, None, &SlowPotential::Quadratic).unwrap();
        assert_eq!(mle_drift(&pf).unwrap().value, vec![0.0]);
    }

    #[test]
    fn grid_mismatch() {
        let x = traj(vec![0.0, 1.0, 2.0], 1.0);
        let z = with_z(vec![0.0, 1.0], 1.0);
        assert!(matches!(
            path_functionals(&x, Some(&z), &SlowPotential::Quadratic),
            Err(Error::GridMismatch(_))
        ));
        let z = with_z(vec![0.0, 1.0, 2.0], 0.5);
        assert!(matches!(diffusion_filtered(&x, &z), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn degenerate_filter_identity() {
        let vals: Vec<f64> = (0..40).map(|j| ((j * 7919) % 23) as f64 / 10.0 - 1.0).collect();
        let x = traj(vals.clone(), 0.01);
        let z = with_z(vals, 0.01);
        let slow = SlowPotential::Bistable;
        let plain = path_functionals(&x, None, &slow).unwrap();
        let pf = path_functionals(&x, Some(&z), &slow).unwrap();
        let a = mle_drift(&pf).unwrap().value;
        assert_eq!(a, filtered_drift(&pf).unwrap().value);
        assert_eq!(a, bayes_compatible_drift(&pf).unwrap().value);
        assert_eq!(a, mle_drift(&plain).unwrap().value);
    }

    #[test]
    fn subsample_hand_examples() {
        let x = traj(vec![1.0, 2.0, 3.0], 1.0);
        let est = subsampled_drift(&x, &SlowPotential::Quadratic, 2).unwrap();
        assert_eq!(est.value, vec![-1.0]);
        assert_eq!(est.diagnostics.stride, Some(2));

        let x = traj(vec![1.0, 2.0, 3.0, 4.0], 1.0);
        let est = shift_averaged_drift(&x, &SlowPotential::Quadratic, 2).unwrap();
        assert!((est.value[0] + 0.75).abs() < 1e-15);
        assert_eq!(est.kind, DriftKind::ShiftAveraged);

        let pf = path_functionals(&x, None, &SlowPotential::Quadratic).unwrap();
        let mle = mle_drift(&pf).unwrap().value;
        assert_eq!(subsampled_drift(&x, &SlowPotential::Quadratic, 1).unwrap().value, mle);
        assert_eq!(shift_averaged_drift(&x, &SlowPotential::Quadratic, 1).unwrap().value, mle);
        assert!(matches!(
            subsampled_drift(&x, &SlowPotential::Quadratic, 5),
            Err(Error::EmptyResult)
        ));
    }

    #[test]
    fn diffusion_examples() {
        let x = traj(vec![0.0, 1.0, 0.0, 1.0], 1.0);
        assert_eq!(diffusion_quadratic_variation(&x).value, 0.5);
        assert_eq!(diffusion_quadratic_variation(&traj(vec![2.0; 5], 0.1)).value, 0.0);

        let x = traj(vec![0.0, 1.0], 1.0);
        let z = with_z(vec![0.0, 0.0], 1.0);
        assert_eq!(diffusion_filtered(&x, &z).unwrap().value, 0.0);

        let x = traj(vec![0.3, 1.0, -0.4], 0.1);
        let z = Filtered {
            params: FilterParams::exponential(0.2).unwrap(),
            path: x.clone(),
        };
        assert_eq!(diffusion_filtered(&x, &z).unwrap().value, 0.0);
        let z = filter_beta1(&x, 0.2).unwrap();
        let expect = 0.1 * (0.3f64.powi(2) + (1.0 - z.path.values[1]).powi(2)) / (0.2 * 0.2);
        assert!((diffusion_filtered(&x, &z).unwrap().value - expect).abs() < 1e-14);
    }

    #[test]
    fn filtered_diffusion_requires_beta_one() {
        let x = traj(vec![0.0, 1.0, 0.5], 0.1);
        let z = Filtered {
            params: FilterParams::new(2.0, 0.2).unwrap(),
            path: x.clone(),
        };
        assert!(matches!(diffusion_filtered(&x, &z), Err(Error::InvalidParameter(_))));
    }
}
