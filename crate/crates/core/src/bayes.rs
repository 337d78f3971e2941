//! Conjugate Gaussian posterior over the effective drift coefficient.
//!
//! Precision `C⁻¹ = C₀⁻¹ + (T/2Σ) M` and mean `C⁻¹m = C₀⁻¹A₀ − (T/2Σ) h`.
//! The filtered variant replaces h by h̃ in the mean and keeps the symmetric
//! M in the precision, so both posteriors share one covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{bayes_compatible_drift, mle_drift, PathFunctionals};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::invalid("prior covariance shape does not match the mean"));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::invalid("prior covariance must be symmetric"));
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::invalid("prior covariance must be positive definite"));
        }
        Ok(GaussianPrior { mean, cov })
    }

    /// `N(0, s·I)` in dimension `n`.
    pub fn isotropic(n: usize, variance: f64) -> Result<Self> {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n) * variance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorKind {
    /// Likelihood of the raw path.
    Plain,
    /// Modified likelihood with h̃ in place of h.
    Filtered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub kind: PosteriorKind,
}

pub fn posterior(
    prior: &GaussianPrior,
    pf: &PathFunctionals,
    sigma: f64,
    kind: PosteriorKind,
) -> Result<GaussianPosterior> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("Sigma must be > 0, got {sigma}")));
    }
    if !(pf.t_final >= 0.0) {
        return Err(Error::invalid("T must be >= 0"));
    }
    if prior.mean.len() != pf.dim() {
        return Err(Error::invalid("prior dimension does not match the path functionals"));
    }
    if pf.t_final == 0.0 {
        return Ok(GaussianPosterior {
            mean: prior.mean.clone(),
            cov: prior.cov.clone(),
            kind,
        });
    }
    let prior_precision = prior
        .cov
        .clone()
        .cholesky()
        .ok_or(Error::SingularCovariance)?
        .inverse();
    let weight = pf.t_final / (2.0 * sigma);
    let precision = &prior_precision + &pf.m * weight;
    let h = match kind {
        PosteriorKind::Plain => &pf.h,
        PosteriorKind::Filtered => &pf.h_tilde,
    };
    let rhs = &prior_precision * &prior.mean - h * weight;
    let chol = precision.cholesky().ok_or(Error::SingularCovariance)?;
    let mean = chol.solve(&rhs);
    let cov = chol.inverse();
    let cov = (&cov + cov.transpose()) * 0.5;
    if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    Ok(GaussianPosterior { mean, cov, kind })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub trace: f64,
    /// Spectral norm of the covariance (its largest eigenvalue).
    pub spectral_norm: f64,
    /// Euclidean distance from the posterior mean to the matching point
    /// estimate: the MLE for plain posteriors, `−M⁻¹h̃` for filtered ones.
    pub distance_to_point_estimate: f64,
    pub point_estimate: Vec<f64>,
}

pub fn contraction_diagnostics(post: &GaussianPosterior, pf: &PathFunctionals) -> Result<ContractionReport> {
    let point = match post.kind {
        PosteriorKind::Plain => mle_drift(pf)?,
        PosteriorKind::Filtered => bayes_compatible_drift(pf)?,
    }
    .value;
    let distance = post
        .mean
        .iter()
        .zip(&point)
        .map(|(m, p)| (m - p).powi(2))
        .sum::<f64>()
        .sqrt();
    let spectral_norm = post
        .cov
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok(ContractionReport {
        trace: post.cov.trace(),
        spectral_norm,
        distance_to_point_estimate: distance,
        point_estimate: point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_pf(m: f64, h: f64, t: f64) -> PathFunctionals {
        PathFunctionals::from_parts(
            DMatrix::from_element(1, 1, m),
            DVector::from_element(1, h),
            DMatrix::from_element(1, 1, m),
            DVector::from_element(1, h),
            t,
        )
    }

    fn synthetic_pf(t: f64) -> PathFunctionals {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let h = DVector::from_vec(vec![-1.0, 0.4]);
        let ht = DVector::from_vec(vec![-0.7, 0.2]);
        PathFunctionals::from_parts(m.clone(), h, m, ht, t)
    }

    #[test]
    fn no_data_returns_prior() {
        let prior = GaussianPrior::new(DVector::from_vec(vec![0.3, -1.0]), DMatrix::identity(2, 2) * 2.0).unwrap();
        let post = posterior(&prior, &synthetic_pf(0.0), 1.0, PosteriorKind::Filtered).unwrap();
        assert_eq!(post.mean, prior.mean);
        assert_eq!(post.cov, prior.cov);
        let report = contraction_diagnostics(&post, &synthetic_pf(0.0)).unwrap();
        let point = bayes_compatible_drift(&synthetic_pf(0.0)).unwrap().value;
        let d = ((0.3 - point[0]).powi(2) + (-1.0 - point[1]).powi(2)).sqrt();
        assert!((report.distance_to_point_estimate - d).abs() < 1e-14);
    }

    #[test]
    fn tiny_horizon_recovers_prior() {
        let prior = GaussianPrior::new(DVector::from_vec(vec![0.3, -1.0]), DMatrix::identity(2, 2)).unwrap();
        let post = posterior(&prior, &synthetic_pf(1e-16), 1.0, PosteriorKind::Plain).unwrap();
        assert!((&post.mean - &prior.mean).amax() < 1e-14);
        assert!((&post.cov - &prior.cov).amax() < 1e-14);
    }

    #[test]
    fn scalar_hand_example() {
        let prior = GaussianPrior::isotropic(1, 1.0).unwrap();
        let post = posterior(&prior, &scalar_pf(1.0, -1.0, 2.0), 1.0, PosteriorKind::Plain).unwrap();
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((post.mean[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn plain_and_filtered_share_covariance() {
        let prior = GaussianPrior::isotropic(2, 1.0).unwrap();
        let pf = synthetic_pf(50.0);
        let a = posterior(&prior, &pf, 0.3, PosteriorKind::Plain).unwrap();
        let b = posterior(&prior, &pf, 0.3, PosteriorKind::Filtered).unwrap();
        assert_eq!(a.cov, b.cov);
        assert_ne!(a.mean, b.mean);
    }

    #[test]
    fn doubling_horizon_halves_trace() {
        let prior = GaussianPrior::isotropic(2, 1.0).unwrap();
        let t = 1e4;
        let a = posterior(&prior, &synthetic_pf(t), 1.0, PosteriorKind::Plain).unwrap();
        let b = posterior(&prior, &synthetic_pf(2.0 * t), 1.0, PosteriorKind::Plain).unwrap();
        let ratio = b.cov.trace() / a.cov.trace();
        assert!((ratio - 0.5).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn diffuse_prior_matches_point_estimates() {
        let prior = GaussianPrior::isotropic(2, 1e8).unwrap();
        let pf = synthetic_pf(1e4);
        for kind in [PosteriorKind::Plain, PosteriorKind::Filtered] {
            let post = posterior(&prior, &pf, 1.0, kind).unwrap();
            let report = contraction_diagnostics(&post, &pf).unwrap();
            let norm = report.point_estimate.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(report.distance_to_point_estimate <= 1e-6 * norm, "{kind:?}: {report:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let prior = GaussianPrior::isotropic(1, 1.0).unwrap();
        assert!(posterior(&prior, &scalar_pf(1.0, 0.0, 1.0), 0.0, PosteriorKind::Plain).is_err());
        assert!(GaussianPrior::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        // indefinite M drives the precision non-positive-definite
        let pf = scalar_pf(-10.0, 0.0, 10.0);
        assert!(matches!(
            posterior(&prior, &pf, 1.0, PosteriorKind::Plain),
            Err(Error::SingularCovariance)
        ));
    }

    proptest! {
        #[test]
        fn covariance_is_symmetric_positive_definite(
            a in prop::collection::vec(-2.0f64..2.0, 9),
            t in 0.0f64..1e4,
            sigma in 0.05f64..3.0,
            prior_var in 0.01f64..100.0,
        ) {
            // M = BᵀB is positive semidefinite
            let b = DMatrix::from_row_slice(3, 3, &a);
            let m = b.transpose() * &b;
            let h = DVector::from_vec(vec![a[0], a[4], a[8]]);
            let pf = PathFunctionals::from_parts(m.clone(), h.clone(), m, h, t);
            let prior = GaussianPrior::isotropic(3, prior_var).unwrap();
            let post = posterior(&prior, &pf, sigma, PosteriorKind::Plain).unwrap();
            let asym = (&post.cov - post.cov.transpose()).amax();
            prop_assert!(asym <= 1e-12 * post.cov.amax().max(1e-300));
            prop_assert!(post.cov.clone().cholesky().is_some());
        }
    }
}
