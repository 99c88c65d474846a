//! Reference policies: LinUCB, LinTS, SupLinUCB and (experimental) DRTS.

mod drts;
mod lints;
mod linucb;
mod ridge;
mod suplinucb;

pub use drts::{Drts, DrtsConfig};
pub use lints::{sample_posterior, LinTs};
pub use linucb::LinUcb;
pub use ridge::{RidgeState, RidgeView};
pub use suplinucb::{level_count, SupDecision, SupLinUcb};

use rand::Rng;

use crate::bandit::ContextSet;
use crate::error::Result;
use crate::policy::Policy;
use crate::rng::StreamRng;

/// Picks an arm uniformly at random; a reference point for regret checks.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    rng: StreamRng,
}

impl UniformRandom {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        Self {
            rng: StreamRng::seed_from_u64(seed),
        }
    }
}

impl Policy for UniformRandom {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn select(&mut self, contexts: &ContextSet) -> Result<usize> {
        Ok(self.rng.gen_range(0..contexts.num_arms()))
    }

    fn observe(&mut self, _: &ContextSet, _: usize, _: f64) -> Result<Option<usize>> {
        Ok(None)
    }
}
