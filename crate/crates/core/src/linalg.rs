//! Small dense solves with condition guards.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves above this condition estimate are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative ridge added to the diagonal when regularization is requested.
pub const RIDGE_SCALE: f64 = 1e-10;

/// Solution of a guarded linear solve.
#[derive(Clone, Debug)]
pub struct Solved {
    pub x: DVector<f64>,
    pub condition: f64,
}

/// Spectral condition number of a symmetric matrix, `inf` when singular.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let eig = m.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if lo == 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Adds `RIDGE_SCALE * trace(m) / k` to the diagonal of `m`.
pub fn add_ridge(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    if k == 0 {
        return;
    }
    let lambda = RIDGE_SCALE * m.trace().abs() / k as f64;
    for i in 0..k {
        m[(i, i)] += lambda;
    }
}

/// Solves the symmetric system `m x = b`.
///
/// Uses Cholesky when `m` is positive definite and falls back to LU with
/// partial pivoting for indefinite matrices. Rejects systems whose spectral
/// condition exceeds [`MAX_CONDITION`].
pub fn solve_symmetric(m: &DMatrix<f64>, b: &DVector<f64>, ridge: bool) -> Result<Solved> {
    let k = m.nrows();
    if m.ncols() != k || b.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: b.len(),
        });
    }
    let mut a = (m + m.transpose()) * 0.5;
    if ridge {
        add_ridge(&mut a);
    }
    let condition = symmetric_condition(&a);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let x = match a.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => a.lu().solve(b).ok_or(Error::Singular { condition })?,
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { condition });
    }
    Ok(Solved { x, condition })
}

fn norm_1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverts a general square matrix by LU with partial pivoting, returning the
/// inverse and the 1-norm condition number.
pub fn lu_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let inv = m.clone().lu().try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = norm_1(m) * norm_1(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok((inv, condition))
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ch = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(ch.inverse())
}
