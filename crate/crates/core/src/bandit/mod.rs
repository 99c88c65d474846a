//! The hybrid estimator and the HyRan bandit built on it.

mod context;
mod hybrid;
mod hyran;
mod schedule;
mod state;

pub use context::{argmax_lowest, select_arm, ContextSet, NORM_SLACK};
pub use hybrid::{compute_pseudo_rewards, sample_hybridization, HybridizationConfig, PseudoRewardVector};
pub use hyran::{
    replay_estimate, replay_state, HyRanBandit, LogDetail, LogEvent, LoggedRound, TrajectoryLog,
};
pub use schedule::RegularizationSchedule;
pub use state::{
    clip_to_unit_ball, BanditState, HyRanConfig, ImputationMode, ImputeTiming, RoundUpdate,
};
