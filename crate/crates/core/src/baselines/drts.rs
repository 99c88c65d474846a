//! Doubly robust Thompson sampling. Experimental: enabled only with an
//! explicit opt-in.
//!
//! With DR estimation switched on, the posterior mean is a doubly robust
//! estimate built from all arms' contexts, the probability of the played
//! arm is estimated by re-drawing the posterior, and rounds whose estimated
//! probability falls below `min_prob` contribute nothing to the DR
//! statistics. With DR estimation off the policy consumes its random stream
//! exactly like [`super::LinTs`] and makes the same choices.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;

use super::lints::sample_posterior;
use super::ridge::{RidgeState, RidgeView};
use crate::bandit::{select_arm, ContextSet};
use crate::error::{ensure_arg, BanditError, Result};
use crate::linalg::{add_outer, axpy, dot};
use crate::policy::Policy;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrtsConfig {
    pub v: f64,
    pub regularizer: f64,
    pub dr: bool,
    pub resample_draws: usize,
    pub min_prob: f64,
}

impl DrtsConfig {
    pub fn new(v: f64) -> Self {
        Self {
            v,
            regularizer: 1.0,
            dr: true,
            resample_draws: 100,
            min_prob: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Drts {
    cfg: DrtsConfig,
    ridge: RidgeState,
    dr_gram: DMatrix<f64>,
    dr_moment: DVector<f64>,
    rng: StreamRng,
    pending: Option<(usize, f64)>,
}

impl Drts {
    pub fn new(dim: usize, cfg: DrtsConfig, seed: u64, allow_experimental: bool) -> Result<Self> {
        if !allow_experimental {
            return Err(BanditError::Unsupported(
                "DRTS is experimental; enable it explicitly".into(),
            ));
        }
        ensure_arg!(cfg.v > 0.0 && cfg.v.is_finite(), "v must be positive");
        ensure_arg!(
            cfg.min_prob >= 0.0 && cfg.min_prob < 1.0,
            "min_prob must lie in [0, 1)"
        );
        Ok(Self {
            cfg,
            ridge: RidgeState::new(dim, cfg.regularizer)?,
            dr_gram: DMatrix::identity(dim, dim) * cfg.regularizer,
            dr_moment: DVector::zeros(dim),
            rng: StreamRng::seed_from_u64(seed),
            pending: None,
        })
    }

    fn dr_view(&self) -> Result<RidgeView> {
        let chol = Cholesky::new(self.dr_gram.clone())
            .ok_or_else(|| BanditError::Numeric("DR Gram matrix is not positive definite".into()))?;
        let theta = chol.solve(&self.dr_moment);
        Ok(RidgeView::from_parts(chol, theta))
    }
}

impl Policy for Drts {
    fn name(&self) -> &'static str {
        "drts"
    }

    fn select(&mut self, contexts: &ContextSet) -> Result<usize> {
        self.ridge.check_contexts(contexts)?;
        if !self.cfg.dr {
            let view = self.ridge.view()?;
            let beta = sample_posterior(&view, self.cfg.v, &mut self.rng);
            let arm = select_arm(contexts, beta.as_slice())?;
            self.pending = Some((arm, 1.0));
            return Ok(arm);
        }
        let view = self.dr_view()?;
        let beta = sample_posterior(&view, self.cfg.v, &mut self.rng);
        let arm = select_arm(contexts, beta.as_slice())?;
        let mut hits = 1usize;
        for _ in 0..self.cfg.resample_draws {
            let b = sample_posterior(&view, self.cfg.v, &mut self.rng);
            if select_arm(contexts, b.as_slice())? == arm {
                hits += 1;
            }
        }
        let prob = hits as f64 / (self.cfg.resample_draws + 1) as f64;
        self.pending = Some((arm, prob));
        Ok(arm)
    }

    fn observe(&mut self, contexts: &ContextSet, arm: usize, reward: f64) -> Result<Option<usize>> {
        let (pending_arm, prob) = self.pending.take().ok_or_else(|| {
            BanditError::ContractViolation("observe called without a pending selection".into())
        })?;
        if pending_arm != arm {
            return Err(BanditError::ContractViolation(format!(
                "observed arm {arm} but selected {pending_arm}"
            )));
        }
        if self.cfg.dr && prob >= self.cfg.min_prob {
            let impute = self.ridge.estimate()?;
            for (i, x) in contexts.iter().enumerate() {
                let imputed = dot(x, impute.as_slice());
                let y = if i == arm {
                    imputed + (reward - imputed) / prob
                } else {
                    imputed
                };
                add_outer(&mut self.dr_gram, x, 1.0);
                axpy(&mut self.dr_moment, x, y);
            }
        }
        self.ridge.update(contexts.arm(arm), reward)?;
        Ok(None)
    }
}
