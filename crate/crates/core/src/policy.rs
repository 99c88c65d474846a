use crate::bandit::ContextSet;
use crate::error::Result;

/// An online decision rule for the linear contextual bandit.
///
/// Each round the driver calls [`Policy::select`] with that round's contexts,
/// draws the reward of the returned arm, then calls [`Policy::observe`].
/// Policies own their random streams, so a policy is deterministic given
/// the seed it was built with.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn select(&mut self, contexts: &ContextSet) -> Result<usize>;

    /// Feed back the reward of the played arm. Returns the hybridization
    /// draw `h_t` for policies that sample one.
    fn observe(&mut self, contexts: &ContextSet, arm: usize, reward: f64) -> Result<Option<usize>>;
}
