use super::ridge::RidgeState;
use crate::bandit::{argmax_lowest, ContextSet};
use crate::error::{ensure_arg, Result};
use crate::policy::Policy;

/// Shared-parameter LinUCB: `argmaxᵢ xᵢᵀθ + α √(xᵢᵀA⁻¹xᵢ)`.
#[derive(Debug, Clone)]
pub struct LinUcb {
    ridge: RidgeState,
    alpha: f64,
}

impl LinUcb {
    pub fn new(dim: usize, alpha: f64, regularizer: f64) -> Result<Self> {
        ensure_arg!(alpha >= 0.0 && alpha.is_finite(), "alpha must be >= 0, got {alpha}");
        Ok(Self {
            ridge: RidgeState::new(dim, regularizer)?,
            alpha,
        })
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn ucb_values(&self, contexts: &ContextSet) -> Result<Vec<f64>> {
        self.ridge.check_contexts(contexts)?;
        let view = self.ridge.view()?;
        Ok(contexts
            .iter()
            .map(|x| view.mean(x) + self.alpha * view.width(x))
            .collect())
    }
}

impl Policy for LinUcb {
    fn name(&self) -> &'static str {
        "linucb"
    }

    fn select(&mut self, contexts: &ContextSet) -> Result<usize> {
        Ok(argmax_lowest(&self.ucb_values(contexts)?))
    }

    fn observe(&mut self, contexts: &ContextSet, arm: usize, reward: f64) -> Result<Option<usize>> {
        self.ridge.update(contexts.arm(arm), reward)?;
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::select_arm;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_cold_start_ties_to_first() {
        let mut p = LinUcb::new(2, 1.0, 1.0).unwrap();
        let c = ContextSet::from_vectors(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1).unwrap();
        assert_eq!(p.ucb_values(&c).unwrap(), vec![1.0, 1.0]);
        assert_eq!(p.select(&c).unwrap(), 0);
    }

    #[test]
    fn manual_ucb_value() {
        let mut p = LinUcb::new(1, 1.0, 1.0).unwrap();
        let c = ContextSet::from_vectors(&[vec![1.0], vec![0.0]], 1).unwrap();
        p.observe(&c, 0, 1.0).unwrap();
        // A = 2, b = 1: 0.5 + √0.5
        assert_abs_diff_eq!(p.ucb_values(&c).unwrap()[0], 1.2071, epsilon = 1e-4);
    }

    #[test]
    fn zero_alpha_is_greedy_ridge() {
        let mut p = LinUcb::new(2, 0.0, 1.0).unwrap();
        let c = ContextSet::from_vectors(&[vec![0.6, 0.2], vec![-0.1, 0.7], vec![0.3, 0.3]], 1)
            .unwrap();
        for (arm, y) in [(0, 0.2), (1, 0.9), (2, 0.1), (1, 0.8)] {
            p.observe(&c, arm, y).unwrap();
        }
        let theta = p.ridge().estimate().unwrap();
        assert_eq!(
            p.select(&c).unwrap(),
            select_arm(&c, theta.as_slice()).unwrap()
        );
    }
}
