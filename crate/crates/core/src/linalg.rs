//! Small dense helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn lambda_min(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// 2-norm condition number `σ_max/σ_min`; infinite when singular.
pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `m⁻¹ b` by LU with partial pivoting.
pub(crate) fn lu_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(b)
}
