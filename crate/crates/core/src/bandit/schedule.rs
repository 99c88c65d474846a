use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};

/// Regularization schedule `λ_t` for the hybrid estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RegularizationSchedule {
    /// `d · log((t + 1)²)`, the schedule used in the simulations.
    Practical { d: usize },
    /// `d · log(4t² / δ)`, the schedule under which the regret bound holds.
    Theory { d: usize, delta: f64 },
}

impl RegularizationSchedule {
    pub fn practical(d: usize) -> Self {
        RegularizationSchedule::Practical { d }
    }

    pub fn theory(d: usize, delta: f64) -> Result<Self> {
        ensure_arg!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1), got {delta}");
        Ok(RegularizationSchedule::Theory { d, delta })
    }

    pub fn lambda(&self, t: u64) -> Result<f64> {
        ensure_arg!(t >= 1, "rounds are numbered from 1");
        let tf = t as f64;
        match *self {
            RegularizationSchedule::Practical { d } => Ok(d as f64 * ((tf + 1.0).powi(2)).ln()),
            RegularizationSchedule::Theory { d, delta } => {
                ensure_arg!(
                    delta > 0.0 && delta < 1.0,
                    "delta must lie in (0, 1), got {delta}"
                );
                Ok(d as f64 * (4.0 * tf * tf / delta).ln())
            }
        }
    }
}
