use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use super::ridge::{RidgeState, RidgeView};
use crate::bandit::{select_arm, ContextSet};
use crate::error::{ensure_arg, Result};
use crate::policy::Policy;
use crate::rng::StreamRng;

/// Draw from `N(θ, v² A⁻¹)` given the Cholesky factor `A = L Lᵀ`:
/// `θ + v L⁻ᵀ ξ` has covariance `v² (L Lᵀ)⁻¹`.
pub fn sample_posterior<R: Rng + ?Sized>(view: &RidgeView, v: f64, rng: &mut R) -> DVector<f64> {
    let d = view.theta.len();
    let xi = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let l = view.cholesky().l();
    let z = l
        .transpose()
        .solve_upper_triangular(&xi)
        .expect("Cholesky factor has a positive diagonal");
    &view.theta + z * v
}

/// Linear Thompson sampling on the shared ridge posterior.
#[derive(Debug, Clone)]
pub struct LinTs {
    ridge: RidgeState,
    v: f64,
    rng: StreamRng,
}

impl LinTs {
    pub fn new(dim: usize, v: f64, regularizer: f64, seed: u64) -> Result<Self> {
        ensure_arg!(v > 0.0 && v.is_finite(), "v must be positive, got {v}");
        Ok(Self {
            ridge: RidgeState::new(dim, regularizer)?,
            v,
            rng: StreamRng::seed_from_u64(seed),
        })
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn sample_parameter(&mut self) -> Result<DVector<f64>> {
        let view = self.ridge.view()?;
        Ok(sample_posterior(&view, self.v, &mut self.rng))
    }
}

impl Policy for LinTs {
    fn name(&self) -> &'static str {
        "lints"
    }

    fn select(&mut self, contexts: &ContextSet) -> Result<usize> {
        self.ridge.check_contexts(contexts)?;
        let beta = self.sample_parameter()?;
        select_arm(contexts, beta.as_slice())
    }

    fn observe(&mut self, contexts: &ContextSet, arm: usize, reward: f64) -> Result<Option<usize>> {
        self.ridge.update(contexts.arm(arm), reward)?;
        Ok(None)
    }
}
