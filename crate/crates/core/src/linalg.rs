//! Small dense linear algebra helpers on top of `nalgebra`.
//!
//! Every system solved in this crate is symmetric positive definite in exact
//! arithmetic (Gram matrices plus a positive ridge term), so the primary path
//! is a Cholesky factorization. When the factorization fails the caller gets
//! an SVD pseudo-solution together with [`SolveMethod::PseudoInverse`], never
//! a silent substitution.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{BanditError, Result};

/// Which route produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cholesky,
    PseudoInverse,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<f64>,
    pub method: SolveMethod,
}

pub(crate) fn check_finite_matrix(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(BanditError::Numeric(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn check_finite_vector(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(BanditError::Numeric(format!("{what} has non-finite entries")))
    }
}

/// Solve `(a + shift I) x = b` for symmetric positive definite `a + shift I`.
pub fn spd_solve_shifted(a: &DMatrix<f64>, shift: f64, b: &DVector<f64>) -> Result<Solution> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(BanditError::InvalidArgument(format!(
            "system shape mismatch: {}x{} matrix, {} rhs",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    check_finite_matrix(a, "system matrix")?;
    check_finite_vector(b, "right-hand side")?;
    if !shift.is_finite() {
        return Err(BanditError::Numeric(format!("shift {shift} is not finite")));
    }
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += shift;
    }
    match Cholesky::new(m.clone()) {
        Some(chol) => Ok(Solution {
            x: chol.solve(b),
            method: SolveMethod::Cholesky,
        }),
        None => {
            let x = m
                .svd(true, true)
                .solve(b, 1e-12)
                .map_err(|e| BanditError::Numeric(format!("pseudo-solve failed: {e}")))?;
            log::warn!("Cholesky factorization failed; fell back to SVD pseudo-solve");
            Ok(Solution {
                x,
                method: SolveMethod::PseudoInverse,
            })
        }
    }
}

/// Solve `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Solution> {
    spd_solve_shifted(a, 0.0, b)
}

/// Cholesky factor of `a + shift I`, or a numeric error if it is not positive definite.
pub fn cholesky_shifted(a: &DMatrix<f64>, shift: f64) -> Result<Cholesky<f64, Dyn>> {
    check_finite_matrix(a, "matrix")?;
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += shift;
    }
    Cholesky::new(m).ok_or_else(|| BanditError::Numeric("matrix is not positive definite".into()))
}

/// `a += s * x xᵀ`, touching only the entries of a symmetric matrix.
pub fn add_outer(a: &mut DMatrix<f64>, x: &[f64], s: f64) {
    let d = x.len();
    for j in 0..d {
        let xj = s * x[j];
        if xj == 0.0 {
            continue;
        }
        for i in 0..d {
            a[(i, j)] += x[i] * xj;
        }
    }
}

/// `v += s * x`.
pub fn axpy(v: &mut DVector<f64>, x: &[f64], s: f64) {
    for (vi, xi) in v.iter_mut().zip(x) {
        *vi += s * xi;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `sqrt(eᵀ m e)`; negative quadratic forms from rounding are clamped to zero.
pub fn mahalanobis(m: &DMatrix<f64>, e: &DVector<f64>) -> f64 {
    e.dot(&(m * e)).max(0.0).sqrt()
}

pub fn symmetric_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn frobenius_relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shifted_solve_scalar() {
        let a = DMatrix::from_element(1, 1, 3.0);
        let b = DVector::from_element(1, 4.0);
        let sol = spd_solve_shifted(&a, 1.0, &b).unwrap();
        assert_eq!(sol.method, SolveMethod::Cholesky);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_matrix_reports_fallback() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let sol = spd_solve(&a, &b).unwrap();
        assert_eq!(sol.method, SolveMethod::PseudoInverse);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let a = DMatrix::from_element(1, 1, f64::NAN);
        let b = DVector::from_element(1, 1.0);
        assert!(matches!(spd_solve(&a, &b), Err(BanditError::Numeric(_))));
    }

    #[test]
    fn outer_product_update() {
        let mut a = DMatrix::identity(2, 2);
        add_outer(&mut a, &[1.0, 2.0], 0.5);
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.5, 1.0, 1.0, 3.0]));
    }
}
