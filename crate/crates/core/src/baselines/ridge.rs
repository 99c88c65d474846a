use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::bandit::ContextSet;
use crate::error::{ensure_arg, BanditError, Result};
use crate::linalg::{add_outer, axpy, check_finite_matrix};

/// Ridge statistics on selected pairs: `A = Σ x xᵀ + λ I`, `b = Σ x y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeState {
    a: DMatrix<f64>,
    b: DVector<f64>,
    regularizer: f64,
}

/// A factorized snapshot of a [`RidgeState`] for scoring many contexts.
pub struct RidgeView {
    chol: Cholesky<f64, Dyn>,
    pub theta: DVector<f64>,
}

impl RidgeView {
    pub(crate) fn from_parts(chol: Cholesky<f64, Dyn>, theta: DVector<f64>) -> Self {
        Self { chol, theta }
    }

    /// `√(xᵀ A⁻¹ x)`.
    pub fn width(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let sol = self.chol.solve(&xv);
        xv.dot(&sol).max(0.0).sqrt()
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(x, self.theta.as_slice())
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }
}

impl RidgeState {
    pub fn new(dim: usize, regularizer: f64) -> Result<Self> {
        ensure_arg!(dim >= 1, "dimension must be >= 1");
        ensure_arg!(
            regularizer > 0.0 && regularizer.is_finite(),
            "regularizer must be positive, got {regularizer}"
        );
        Ok(Self {
            a: DMatrix::identity(dim, dim) * regularizer,
            b: DVector::zeros(dim),
            regularizer,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn moments(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        ensure_arg!(x.len() == self.dim(), "context dimension mismatch");
        if !y.is_finite() {
            return Err(BanditError::Numeric(format!("reward {y} is not finite")));
        }
        add_outer(&mut self.a, x, 1.0);
        axpy(&mut self.b, x, y);
        Ok(())
    }

    pub fn view(&self) -> Result<RidgeView> {
        check_finite_matrix(&self.a, "ridge Gram matrix")?;
        let chol = Cholesky::new(self.a.clone())
            .ok_or_else(|| BanditError::Numeric("ridge Gram matrix is not positive definite".into()))?;
        let theta = chol.solve(&self.b);
        Ok(RidgeView { chol, theta })
    }

    pub fn estimate(&self) -> Result<DVector<f64>> {
        Ok(self.view()?.theta)
    }

    pub(crate) fn check_contexts(&self, contexts: &ContextSet) -> Result<()> {
        ensure_arg!(
            contexts.dim() == self.dim(),
            "contexts have dimension {}, state expects {}",
            contexts.dim(),
            self.dim()
        );
        Ok(())
    }
}
