//! Small dense helpers: PSD checks and a semidefinite-tolerant Cholesky.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative floor on the smallest eigenvalue: `λ_min ≥ -PSD_REL_TOL · λ_max`.
pub const PSD_REL_TOL: f64 = 1e-10;

/// Jitter added on the diagonal, relative to `trace / q`, when the plain
/// factorization fails.
pub const JITTER_REL: f64 = 1e-12;

/// Extreme eigenvalues of a symmetric matrix.
pub fn eigen_range(a: &DMatrix<f64>) -> (f64, f64) {
    if a.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(a.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn is_psd(a: &DMatrix<f64>) -> bool {
    let (min, max) = eigen_range(a);
    min >= -PSD_REL_TOL * max.abs().max(f64::MIN_POSITIVE)
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `a` by `(a + aᵀ)/2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

fn cholesky_semidefinite(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let zero_tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let neg_tol = PSD_REL_TOL * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot < -neg_tol {
            return None;
        }
        if pivot <= zero_tol {
            // Degenerate direction: the remaining column must vanish too.
            for i in (j + 1)..n {
                let mut r = a[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                if r.abs() > 1e3 * zero_tol.max(neg_tol) {
                    return None;
                }
            }
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut r = a[(i, j)];
            for k in 0..j {
                r -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = r / d;
        }
    }
    Some(l)
}

/// Lower-triangular `L` with `L Lᵀ = a`, tolerating exactly singular PSD
/// input. Falls back to one retry with diagonal jitter
/// `JITTER_REL · trace/q`.
pub fn psd_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(l) = cholesky_semidefinite(a) {
        return Ok(l);
    }
    let n = a.nrows();
    let jitter = JITTER_REL * a.trace().abs() / n.max(1) as f64;
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += jitter;
    }
    cholesky_semidefinite(&b).ok_or_else(|| {
        let (min, max) = eigen_range(a);
        Error::Factorization(format!(
            "matrix is not positive semidefinite (eigenvalues in [{min:e}, {max:e}], jitter {jitter:e})"
        ))
    })
}
