//! SupLinUCB with `S = ⌈log₂ T⌉` levels.
//!
//! Each level keeps its own ridge statistics and only learns from rounds
//! recorded at that level. Rounds settled by the `1/√T` exploitation branch
//! update no level.

use super::ridge::RidgeState;
use crate::bandit::ContextSet;
use crate::error::{ensure_arg, BanditError, Result};
use crate::policy::Policy;

/// How a round's arm was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupDecision {
    /// All widths at or below `1/√T`; the round is not recorded.
    Exploit,
    /// An arm with width above `2^{-s}` was explored at `level` (1-based).
    Recorded { level: usize },
}

#[derive(Debug, Clone)]
pub struct SupLinUcb {
    levels: Vec<RidgeState>,
    alpha: f64,
    horizon: u64,
    pending: Option<(usize, SupDecision)>,
    decisions: Vec<SupDecision>,
}

pub fn level_count(horizon: u64) -> usize {
    let mut s = 0usize;
    while (1u128 << s) < horizon as u128 {
        s += 1;
    }
    s.max(1)
}

impl SupLinUcb {
    pub fn new(dim: usize, alpha: f64, horizon: u64) -> Result<Self> {
        ensure_arg!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive, got {alpha}");
        ensure_arg!(horizon >= 1, "SupLinUCB needs the horizon T >= 1");
        let levels = (0..level_count(horizon))
            .map(|_| RidgeState::new(dim, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            levels,
            alpha,
            horizon,
            pending: None,
            decisions: Vec::new(),
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, s: usize) -> &RidgeState {
        &self.levels[s - 1]
    }

    /// Decision of every completed round, in order.
    pub fn decisions(&self) -> &[SupDecision] {
        &self.decisions
    }

    pub fn decide(&self, contexts: &ContextSet) -> Result<(usize, SupDecision)> {
        self.levels[0].check_contexts(contexts)?;
        let exploit_width = 1.0 / (self.horizon as f64).sqrt();
        let mut candidates: Vec<usize> = (0..contexts.num_arms()).collect();
        let mut s = 1usize;
        loop {
            if s > self.levels.len() {
                return Err(BanditError::Internal(format!(
                    "SupLinUCB descended past level {}",
                    self.levels.len()
                )));
            }
            let view = self.levels[s - 1].view()?;
            let scored: Vec<(usize, f64, f64)> = candidates
                .iter()
                .map(|&i| {
                    let x = contexts.arm(i);
                    let w = self.alpha * view.width(x);
                    (i, view.mean(x) + w, w)
                })
                .collect();
            let threshold = 0.5f64.powi(s as i32);

            if scored.iter().all(|&(_, _, w)| w <= exploit_width) {
                let best = scored
                    .iter()
                    .fold(scored[0], |b, &c| if c.1 > b.1 { c } else { b });
                return Ok((best.0, SupDecision::Exploit));
            }
            if scored.iter().all(|&(_, _, w)| w <= threshold) {
                let top = scored.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
                candidates = scored
                    .iter()
                    .filter(|c| c.1 >= top - 2.0 * threshold)
                    .map(|c| c.0)
                    .collect();
                s += 1;
                continue;
            }
            let widest = scored
                .iter()
                .filter(|c| c.2 > threshold)
                .fold(None::<(usize, f64, f64)>, |b, &c| match b {
                    Some(b) if b.2 >= c.2 => Some(b),
                    _ => Some(c),
                })
                .expect("some width exceeds the threshold");
            return Ok((widest.0, SupDecision::Recorded { level: s }));
        }
    }
}

impl Policy for SupLinUcb {
    fn name(&self) -> &'static str {
        "suplinucb"
    }

    fn select(&mut self, contexts: &ContextSet) -> Result<usize> {
        let (arm, decision) = self.decide(contexts)?;
        self.pending = Some((arm, decision));
        Ok(arm)
    }

    fn observe(&mut self, contexts: &ContextSet, arm: usize, reward: f64) -> Result<Option<usize>> {
        let (pending_arm, decision) = self.pending.take().ok_or_else(|| {
            BanditError::ContractViolation("observe called without a pending selection".into())
        })?;
        if pending_arm != arm {
            return Err(BanditError::ContractViolation(format!(
                "observed arm {arm} but selected {pending_arm}"
            )));
        }
        if let SupDecision::Recorded { level } = decision {
            self.levels[level - 1].update(contexts.arm(arm), reward)?;
        }
        self.decisions.push(decision);
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_counts() {
        assert_eq!(level_count(1), 1);
        assert_eq!(level_count(2), 1);
        assert_eq!(level_count(3), 2);
        assert_eq!(level_count(1024), 10);
        assert_eq!(level_count(5000), 13);
    }

    #[test]
    fn cold_start_records_at_first_level() {
        let p = SupLinUcb::new(2, 0.8, 100).unwrap();
        let c = ContextSet::from_vectors(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1).unwrap();
        let (arm, d) = p.decide(&c).unwrap();
        assert_eq!(d, SupDecision::Recorded { level: 1 });
        assert_eq!(arm, 0);
    }

    #[test]
    fn exploitation_updates_no_level() {
        // α below 1/√T: every width is small enough to exploit immediately
        let mut p = SupLinUcb::new(2, 0.01, 100).unwrap();
        let c = ContextSet::from_vectors(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1).unwrap();
        let a = p.select(&c).unwrap();
        p.observe(&c, a, 1.0).unwrap();
        assert_eq!(p.decisions(), &[SupDecision::Exploit]);
        for s in 1..=p.num_levels() {
            assert_eq!(p.level(s).moments().norm(), 0.0);
        }
    }
}
