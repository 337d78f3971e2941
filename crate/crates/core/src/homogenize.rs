//! Homogenized coefficients of the one-dimensional multiscale model.
//!
//! With `Z = ∫₀ᴸ e^{−p/σ}` and `Ẑ = ∫₀ᴸ e^{p/σ}` the homogenization factor is
//! `K = L²/(ZẐ)`, and the effective model has `A = Kα`, `Σ = Kσ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FastPotential, MultiscaleModel};

const QUAD_START_POINTS: usize = 16;
const QUAD_MAX_DOUBLINGS: usize = 20;
const QUAD_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedModel {
    pub k: f64,
    /// Effective drift coefficient `A = Kα`.
    pub a: Vec<f64>,
    /// Effective diffusion coefficient `Σ = Kσ`.
    pub sigma: f64,
    pub z: f64,
    pub z_hat: f64,
}

/// Trapezoid rule over one period of a periodic integrand, doubling the
/// number of nodes until two successive estimates agree to 1e-12 relative.
/// For smooth periodic integrands the error decays exponentially in the
/// number of nodes.
pub fn periodic_trapezoid<F>(f: F, period: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut n = QUAD_START_POINTS;
    let mut h = period / n as f64;
    let mut sum: f64 = (0..n).map(|i| f(i as f64 * h)).sum();
    let mut estimate = sum * h;
    for _ in 0..QUAD_MAX_DOUBLINGS {
        // the new nodes are the midpoints of the current ones
        let mid: f64 = (0..n).map(|i| f((i as f64 + 0.5) * h)).sum();
        sum += mid;
        n *= 2;
        h = period / n as f64;
        let next = sum * h;
        if !next.is_finite() {
            break;
        }
        if (next - estimate).abs() <= QUAD_RTOL * next.abs() {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::QuadratureFailure(QUAD_MAX_DOUBLINGS))
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("homogenization requires sigma > 0, got {sigma}")))
    }
}

/// `(Z, Ẑ)`: period integrals of `e^{−p/σ}` and `e^{p/σ}`.
pub fn partition_functions(fast: &FastPotential, sigma: f64) -> Result<(f64, f64)> {
    check_sigma(sigma)?;
    fast.validate()?;
    let l = fast.period();
    let z = periodic_trapezoid(|y| (-fast.value(y) / sigma).exp(), l)?;
    let z_hat = periodic_trapezoid(|y| (fast.value(y) / sigma).exp(), l)?;
    Ok((z, z_hat))
}

/// `K = L²/(ZẐ)`, in `(0, 1]`.
pub fn coefficient_k(fast: &FastPotential, sigma: f64) -> Result<f64> {
    let (z, z_hat) = partition_functions(fast, sigma)?;
    let l = fast.period();
    Ok(l * l / (z * z_hat))
}

pub fn homogenize(model: &MultiscaleModel) -> Result<HomogenizedModel> {
    model.validate()?;
    let (z, z_hat) = partition_functions(&model.fast, model.sigma)?;
    let l = model.fast.period();
    let k = l * l / (z * z_hat);
    Ok(HomogenizedModel {
        k,
        a: model.alpha.iter().map(|a| k * a).collect(),
        sigma: k * model.sigma,
        z,
        z_hat,
    })
}

/// Derivative of the cell-problem corrector, `Φ'(y) = L e^{p(y)/σ}/Ẑ − 1`.
///
/// Integrating `σΦ'' − p'Φ' = p'` once gives `1 + Φ' = c·e^{p/σ}`, and
/// periodicity of Φ forces `∫₀ᴸ Φ' = 0`, hence `c = L/Ẑ`.
pub fn phi_prime(fast: &FastPotential, sigma: f64, y: f64) -> Result<f64> {
    let (_, z_hat) = partition_functions(fast, sigma)?;
    Ok(phi_prime_with(fast, sigma, z_hat, y))
}

/// [`phi_prime`] with a precomputed `Ẑ`.
pub fn phi_prime_with(fast: &FastPotential, sigma: f64, z_hat: f64, y: f64) -> f64 {
    fast.period() * (fast.value(y) / sigma).exp() / z_hat - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SlowPotential;
    use std::f64::consts::PI;

    /// I₀(x) = Σ (x/2)^{2k} / (k!)².
    fn bessel_i0(x: f64) -> f64 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    #[test]
    fn zero_potential() {
        let (z, zh) = partition_functions(&FastPotential::Zero, 0.3).unwrap();
        assert!((z - 2.0 * PI).abs() < 1e-12 && (zh - 2.0 * PI).abs() < 1e-12);
        assert!((coefficient_k(&FastPotential::Zero, 2.0).unwrap() - 1.0).abs() < 1e-14);
        for y in [0.0, 1.0, 4.0] {
            assert!(phi_prime(&FastPotential::Zero, 1.0, y).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_partition_functions_match_bessel() {
        for sigma in [1.0, 0.5, 0.7, 2.0] {
            let (z, zh) = partition_functions(&FastPotential::Cos, sigma).unwrap();
            let oracle = 2.0 * PI * bessel_i0(1.0 / sigma);
            assert!(((z - oracle) / oracle).abs() < 1e-10, "sigma={sigma}");
            assert!(((zh - oracle) / oracle).abs() < 1e-10, "sigma={sigma}");
        }
        let (z, _) = partition_functions(&FastPotential::Cos, 1.0).unwrap();
        assert!((z - 7.95493).abs() < 1e-5);
    }

    #[test]
    fn k_values() {
        let k = coefficient_k(&FastPotential::Cos, 1.0).unwrap();
        assert!((k - 1.0 / bessel_i0(1.0).powi(2)).abs() < 1e-12);
        assert!((k - 0.623860).abs() < 1e-6, "K = {k}");
        let k7 = coefficient_k(&FastPotential::Cos, 0.7).unwrap();
        assert!((k7 * 0.7 - 0.2807).abs() < 5e-4, "Kσ = {}", k7 * 0.7);
    }

    #[test]
    fn homogenize_examples() {
        let m = MultiscaleModel::new(SlowPotential::Quadratic, FastPotential::Zero, vec![2.0], 1.0, 0.1)
            .unwrap();
        let h = homogenize(&m).unwrap();
        assert!((h.k - 1.0).abs() < 1e-14 && (h.a[0] - 2.0).abs() < 1e-13 && (h.sigma - 1.0).abs() < 1e-14);

        let m = MultiscaleModel::new(
            SlowPotential::chebyshev(4),
            FastPotential::Cos,
            vec![-1.0, -0.5, 0.5, 1.0],
            1.0,
            0.05,
        )
        .unwrap();
        let h = homogenize(&m).unwrap();
        for (a, t) in h.a.iter().zip([-0.62, -0.31, 0.31, 0.62]) {
            assert!((a - t).abs() < 0.005, "{:?}", h.a);
        }

        let m = MultiscaleModel::new(SlowPotential::Bistable, FastPotential::Cos, vec![1.0, 2.0], 0.7, 0.05)
            .unwrap();
        let h = homogenize(&m).unwrap();
        assert!((h.sigma - 0.2807).abs() < 5e-4);
        assert_eq!(h.a[1], 2.0 * h.k);
    }

    #[test]
    fn phi_prime_at_zero() {
        let v = phi_prime(&FastPotential::Cos, 1.0, 0.0).unwrap();
        let oracle = 1.0f64.exp() / bessel_i0(1.0) - 1.0;
        assert!((v - oracle).abs() < 1e-10);
        assert!((v - 1.147030).abs() < 1e-6, "{v}");
        let l = FastPotential::Cos.period();
        let at_l = phi_prime(&FastPotential::Cos, 1.0, l).unwrap();
        assert!((v - at_l).abs() < 1e-12);
    }

    #[test]
    fn cell_problem_residual() {
        let fast = FastPotential::Cos;
        let sigma = 1.0;
        let (_, zh) = partition_functions(&fast, sigma).unwrap();
        let h = 1e-5;
        for i in 0..50 {
            let y = fast.period() * i as f64 / 50.0 + 0.013;
            let d1 = phi_prime_with(&fast, sigma, zh, y);
            let d2 = (phi_prime_with(&fast, sigma, zh, y + h) - phi_prime_with(&fast, sigma, zh, y - h)) / (2.0 * h);
            let dp = fast.derivative(y);
            let residual = -dp * d1 + sigma * d2 - dp;
            assert!(residual.abs() <= 1e-6, "y={y} residual={residual}");
        }
    }

    #[test]
    fn corrector_formula_for_k_agrees() {
        for sigma in [0.5, 1.0, 1.7] {
            let fast = FastPotential::Cos;
            let (z, zh) = partition_functions(&fast, sigma).unwrap();
            let k_corrector = periodic_trapezoid(
                |y| {
                    let u = 1.0 + phi_prime_with(&fast, sigma, zh, y);
                    u * u * (-fast.value(y) / sigma).exp() / z
                },
                fast.period(),
            )
            .unwrap();
            let k = coefficient_k(&fast, sigma).unwrap();
            assert!((k_corrector - k).abs() < 1e-8);
        }
    }

    #[test]
    fn k_is_shift_invariant() {
        let k = coefficient_k(&FastPotential::Cos, 1.0).unwrap();
        for c in [-3.0, 0.5, 4.0] {
            let shifted = FastPotential::Cos.scaled(1.0, c);
            let ks = coefficient_k(&shifted, 1.0).unwrap();
            assert!((ks - k).abs() < 1e-10, "c={c}");
        }
    }

    #[test]
    fn k_decreases_with_amplitude() {
        let ks: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&lam| coefficient_k(&FastPotential::Cos.scaled(lam, 0.0), 1.0).unwrap())
            .collect();
        assert!(ks[0] > ks[1] && ks[1] > ks[2], "{ks:?}");
        assert!(ks.iter().all(|&k| k > 0.0 && k <= 1.0));
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        assert!(coefficient_k(&FastPotential::Cos, 0.0).is_err());
        assert!(partition_functions(&FastPotential::Cos, -1.0).is_err());
    }

    #[test]
    fn quadrature_failure_is_reported() {
        // non-periodic, discontinuous at the seam: trapezoid converges only algebraically
        let r = periodic_trapezoid(|y| if y < 0.3 { 1.0 } else { y.sqrt() }, 1.0);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
