//! Hybridization variable and doubly robust pseudo-rewards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::ContextSet;
use crate::error::{ensure_arg, BanditError, Result};
use crate::linalg::dot;

/// Distribution of the hybridization variable `h_t` given the played arm.
///
/// The played arm gets mass `p`; every other arm gets `(1 - p) / (N - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridizationConfig {
    p: f64,
    num_arms: usize,
}

impl HybridizationConfig {
    pub fn new(p: f64, num_arms: usize) -> Result<Self> {
        ensure_arg!(p > 0.0 && p < 1.0, "p must lie in (0, 1), got {p}");
        if num_arms < 2 {
            return Err(BanditError::Unsupported(format!(
                "hybridization needs at least two arms, got {num_arms}"
            )));
        }
        Ok(Self { p, num_arms })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    /// `π_j` when `chosen` was played.
    pub fn probability(&self, arm: usize, chosen: usize) -> f64 {
        if arm == chosen {
            self.p
        } else {
            (1.0 - self.p) / (self.num_arms - 1) as f64
        }
    }

    pub fn probabilities(&self, chosen: usize) -> Vec<f64> {
        (0..self.num_arms)
            .map(|j| self.probability(j, chosen))
            .collect()
    }
}

/// Draw `h_t`. Consumes exactly two uniforms from `rng` per call.
pub fn sample_hybridization<R: Rng + ?Sized>(
    chosen: usize,
    config: &HybridizationConfig,
    rng: &mut R,
) -> Result<usize> {
    let n = config.num_arms();
    ensure_arg!(chosen < n, "chosen arm {chosen} out of range for {n} arms");
    let u: f64 = rng.gen();
    let other = rng.gen_range(0..n - 1);
    if u < config.p() {
        Ok(chosen)
    } else if other >= chosen {
        Ok(other + 1)
    } else {
        Ok(other)
    }
}

/// Pseudo-rewards `Ỹ_{·,t}` of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRewardVector {
    pub values: Vec<f64>,
}

/// Doubly robust pseudo-rewards for every arm of a round in which the
/// hybridization variable landed on the played arm.
///
/// `Ỹᵢ = (1 - 1(h=i)/πᵢ) xᵢᵀ impute + 1(h=i)/πᵢ · Y`.
pub fn compute_pseudo_rewards(
    contexts: &ContextSet,
    chosen: usize,
    h: usize,
    observed_reward: f64,
    impute: &[f64],
    config: &HybridizationConfig,
) -> Result<PseudoRewardVector> {
    if h != chosen {
        return Err(BanditError::ContractViolation(format!(
            "pseudo-rewards need the reward of arm h={h}, but arm {chosen} was played"
        )));
    }
    ensure_arg!(
        impute.len() == contexts.dim(),
        "imputation estimate has dimension {}, contexts have {}",
        impute.len(),
        contexts.dim()
    );
    ensure_arg!(
        contexts.num_arms() == config.num_arms(),
        "config is for {} arms, round has {}",
        config.num_arms(),
        contexts.num_arms()
    );
    ensure_arg!(chosen < contexts.num_arms(), "chosen arm out of range");
    let values = contexts
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let imputed = dot(x, impute);
            if i == h {
                let w = 1.0 / config.probability(i, chosen);
                (1.0 - w) * imputed + w * observed_reward
            } else {
                imputed
            }
        })
        .collect();
    Ok(PseudoRewardVector { values })
}
