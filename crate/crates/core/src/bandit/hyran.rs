//! The HyRan bandit: greedy selection on the hybrid estimator, followed by
//! a hybridization draw that decides which score the round contributes.

use nalgebra::DVector;
use rand::SeedableRng;

use super::context::{select_arm, ContextSet};
use super::hybrid::sample_hybridization;
use super::schedule::RegularizationSchedule;
use super::state::{BanditState, HyRanConfig};
use crate::error::{BanditError, Result};
use crate::policy::Policy;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEvent {
    Selected { round: u64, arm: usize },
    Hybridized { round: u64, h: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRound {
    /// `None` when the log was recorded without contexts.
    pub contexts: Option<ContextSet>,
    pub chosen: usize,
    pub h: usize,
    pub reward: f64,
    pub pseudo_rewards: Option<Vec<f64>>,
    pub impute_used: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogDetail {
    Full,
    ActionsOnly,
}

/// Everything a HyRan run did, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub dim: usize,
    pub num_arms: usize,
    pub h_seed: u64,
    pub rounds: Vec<LoggedRound>,
    pub events: Vec<LogEvent>,
}

impl TrajectoryLog {
    fn new(dim: usize, num_arms: usize, h_seed: u64) -> Self {
        Self {
            dim,
            num_arms,
            h_seed,
            rounds: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn has_contexts(&self) -> bool {
        self.rounds.iter().all(|r| r.contexts.is_some())
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

pub struct HyRanBandit {
    state: BanditState,
    schedule: RegularizationSchedule,
    h_rng: StreamRng,
    h_seed: u64,
    pending: Option<usize>,
    detail: Option<LogDetail>,
    log: TrajectoryLog,
}

impl HyRanBandit {
    pub fn new(
        dim: usize,
        num_arms: usize,
        config: HyRanConfig,
        schedule: RegularizationSchedule,
        h_seed: u64,
    ) -> Result<Self> {
        let state = BanditState::new(dim, num_arms, config)?;
        Ok(Self {
            state,
            schedule,
            h_rng: StreamRng::seed_from_u64(h_seed),
            h_seed,
            pending: None,
            detail: None,
            log: TrajectoryLog::new(dim, num_arms, h_seed),
        })
    }

    /// Record every round into a [`TrajectoryLog`].
    pub fn with_log(mut self, detail: LogDetail) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn state(&self) -> &BanditState {
        &self.state
    }

    pub fn schedule(&self) -> &RegularizationSchedule {
        &self.schedule
    }

    pub fn h_seed(&self) -> u64 {
        self.h_seed
    }

    pub fn log(&self) -> Option<&TrajectoryLog> {
        self.detail.map(|_| &self.log)
    }

    pub fn into_log(self) -> Option<TrajectoryLog> {
        self.detail.map(|_| self.log)
    }

    /// `β̂_t`, the estimate that will drive selection in round `t + 1`.
    pub fn current_estimate(&self) -> Result<DVector<f64>> {
        let lambda = self.schedule.lambda(self.state.round() + 1)?;
        self.state.estimate(lambda)
    }
}

impl Policy for HyRanBandit {
    fn name(&self) -> &'static str {
        "hyran"
    }

    fn select(&mut self, contexts: &ContextSet) -> Result<usize> {
        let beta = self.current_estimate()?;
        let arm = select_arm(contexts, beta.as_slice())?;
        self.pending = Some(arm);
        if self.detail.is_some() {
            self.log.events.push(LogEvent::Selected {
                round: self.state.round() + 1,
                arm,
            });
        }
        Ok(arm)
    }

    fn observe(&mut self, contexts: &ContextSet, arm: usize, reward: f64) -> Result<Option<usize>> {
        match self.pending.take() {
            Some(a) if a == arm => {}
            other => {
                return Err(BanditError::ContractViolation(format!(
                    "observed arm {arm} but the pending selection is {other:?}"
                )))
            }
        }
        let h = sample_hybridization(arm, self.state.hybridization(), &mut self.h_rng)?;
        let update = self.state.update(contexts, arm, h, reward)?;
        if let Some(detail) = self.detail {
            self.log.events.push(LogEvent::Hybridized {
                round: update.round,
                h,
            });
            self.log.rounds.push(LoggedRound {
                contexts: (detail == LogDetail::Full).then(|| contexts.clone()),
                chosen: arm,
                h,
                reward,
                pseudo_rewards: update.pseudo_rewards.map(|p| p.values),
                impute_used: update.impute_used.map(|v| v.as_slice().to_vec()),
            });
        }
        Ok(Some(h))
    }
}

/// Re-run the estimator over a logged trajectory with a fresh
/// hybridization stream, holding contexts, arms and rewards fixed.
pub fn replay_state(log: &TrajectoryLog, config: HyRanConfig, h_seed: u64) -> Result<BanditState> {
    if !log.has_contexts() {
        return Err(BanditError::InsufficientData(
            "trajectory log was recorded without contexts".into(),
        ));
    }
    let mut state = BanditState::new(log.dim, log.num_arms, config)?;
    let mut rng = StreamRng::seed_from_u64(h_seed);
    for r in &log.rounds {
        let contexts = r.contexts.as_ref().expect("checked above");
        let h = sample_hybridization(r.chosen, state.hybridization(), &mut rng)?;
        state.update(contexts, r.chosen, h, r.reward)?;
    }
    Ok(state)
}

/// `β̂_t` after replaying the whole log.
pub fn replay_estimate(
    log: &TrajectoryLog,
    config: HyRanConfig,
    schedule: &RegularizationSchedule,
    h_seed: u64,
) -> Result<DVector<f64>> {
    let state = replay_state(log, config, h_seed)?;
    state.estimate(schedule.lambda(state.round() + 1)?)
}
