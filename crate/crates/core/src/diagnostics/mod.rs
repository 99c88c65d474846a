//! Monte-Carlo checks of the estimator's guarantees: subsample size,
//! self-normalized error bound, regret decomposition, imputation error,
//! the minimax lower bound, pseudo-reward unbiasedness and the estimator
//! cloud.
//!
//! Every check is a pure function of its config (including the seed) and
//! returns a [`DiagnosticReport`].

mod cloud;
mod decomposition;
mod imputation;
mod lower_bound;
mod psi;
mod report;
mod self_normalized;
mod unbiased;

pub use cloud::{
    check_cloud_collapse, cloud_robust_spread, cloud_seeds, cloud_spread, estimator_cloud, record_trajectory,
    write_cloud_scatter, CloudConfig, CloudOutcome,
};
pub use decomposition::{check_regret_decomposition, max_residual, DecompositionConfig};
pub use imputation::{check_imputation_error, log_log_slope, ImputationConfig};
pub use lower_bound::{check_lower_bound, LowerBoundConfig};
pub use psi::{check_psi_size, PsiConfig};
pub use report::{DiagnosticReport, SeriesPoint};
pub use self_normalized::{check_self_normalized, self_normalized_bound, SelfNormalizedConfig};
pub use unbiased::{check_pseudo_reward_unbiasedness, UnbiasednessConfig};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bandit::{HyRanBandit, HyRanConfig, ImputationMode, RegularizationSchedule};
use crate::environment::{Environment, EnvironmentSpec};
use crate::error::{ensure_arg, Result};
use crate::harness::simulate;
use crate::linalg::{add_outer, symmetric_min_eigenvalue};
use crate::rng::{derive_seed, Purpose, StreamRng, TrajectorySeeds};

/// Check names understood by the command line, in a stable order.
pub const CHECK_NAMES: [&str; 7] = [
    "psi-size",
    "self-normalized",
    "regret-decomposition",
    "imputation-error",
    "lower-bound",
    "unbiasedness",
    "cloud",
];

/// Constants appearing in the estimation and regret guarantees.
///
/// `c_placeholder` stands in for an unspecified absolute constant; no
/// pass/fail decision depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub p: f64,
    pub sigma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub phi_sq_hat: f64,
    pub c_placeholder: f64,
}

impl BoundParams {
    pub fn new(p: f64, sigma: f64, delta: f64, phi_sq_hat: f64) -> Result<Self> {
        ensure_arg!(p > 0.0 && p < 1.0, "p must lie in (0, 1)");
        ensure_arg!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        ensure_arg!(sigma >= 0.0, "sigma must be >= 0");
        ensure_arg!(phi_sq_hat > 0.0, "phi^2 must be positive");
        Ok(Self {
            p,
            sigma,
            delta,
            epsilon: 0.5,
            phi_sq_hat,
            c_placeholder: 1.0,
        })
    }

    /// `D = 1 + 4√2/(1-p) + σ/p`.
    pub fn d_const(&self) -> f64 {
        1.0 + 4.0 * 2f64.sqrt() / (1.0 - self.p) + self.sigma / self.p
    }

    /// `C = 8(2-p)/((1-p)√p) + √2·C₀·σ/p² + 8/√p`.
    pub fn c_const(&self) -> f64 {
        let p = self.p;
        8.0 * (2.0 - p) / ((1.0 - p) * p.sqrt())
            + 2f64.sqrt() * self.c_placeholder * self.sigma / (p * p)
            + 8.0 / p.sqrt()
    }

    /// `ℰ = max{(8/p) log(T/δ), C N² φ⁻⁴ log(2T/δ)}`, at least 1.
    pub fn burn_in(&self, horizon: u64, n_arms: usize) -> f64 {
        let t = horizon.max(1) as f64;
        let a = 8.0 / self.p * (t / self.delta).ln();
        let b = self.c_const() * (n_arms * n_arms) as f64 / self.phi_sq_hat.powi(2)
            * (2.0 * t / self.delta).ln();
        a.max(b).max(1.0)
    }
}

/// `λ_min` of the time average of `N⁻¹ Σᵢ xᵢxᵢᵀ` over `rounds` context draws.
pub fn estimate_phi_sq(env: &Environment, rounds: u64, rng: &mut StreamRng) -> Result<f64> {
    ensure_arg!(rounds >= 1, "need at least one round");
    let d = env.spec().d;
    let n = env.spec().n_arms as f64;
    let mut acc = DMatrix::zeros(d, d);
    for t in 1..=rounds {
        for x in env.contexts(t, rng)?.iter() {
            add_outer(&mut acc, x, 1.0 / n);
        }
    }
    Ok(symmetric_min_eigenvalue(&(acc / rounds as f64)))
}

/// `(mean, standard error)` with the `n - 1` variance.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Standard error of a proportion `q` estimated from `n` trials.
pub(crate) fn binomial_se(q: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (q * (1.0 - q) / n as f64).sqrt()
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Everything needed to run one seeded HyRan trajectory in a diagnostic.
pub(crate) struct TrialSetup {
    pub env: Environment,
    pub bandit: HyRanBandit,
    pub contexts: StreamRng,
    pub rewards: StreamRng,
    pub aux: StreamRng,
}

impl TrialSetup {
    pub fn new(
        spec: &EnvironmentSpec,
        config: HyRanConfig,
        schedule: RegularizationSchedule,
        seed: u64,
        trial: usize,
    ) -> Result<Self> {
        let seeds = TrajectorySeeds::new(seed, 0, trial as u64);
        let env = spec.instantiate(&mut seeds.rng(Purpose::Instance))?;
        let bandit = HyRanBandit::new(
            spec.d,
            spec.n_arms,
            config,
            schedule,
            seeds.seed(Purpose::Hybridization),
        )?;
        Ok(Self {
            env,
            bandit,
            contexts: seeds.rng(Purpose::Contexts),
            rewards: seeds.rng(Purpose::Rewards),
            aux: seeds.rng(Purpose::Diagnostic),
        })
    }

    /// Run `horizon` rounds, calling `f` after every update.
    pub fn run<F>(&mut self, horizon: u64, mut f: F) -> Result<()>
    where
        F: FnMut(&HyRanBandit, &Environment, &crate::bandit::ContextSet, &mut StreamRng) -> Result<()>,
    {
        let env = &self.env;
        let aux = &mut self.aux;
        simulate(
            env,
            &mut self.bandit,
            horizon,
            &mut self.contexts,
            &mut self.rewards,
            |b, ctx, _| f(b, env, ctx, aux),
        )?;
        Ok(())
    }
}

/// Theory-mode HyRan config and schedule with confidence `delta`.
pub(crate) fn theory_setup(p: f64, d: usize, delta: f64) -> Result<(HyRanConfig, RegularizationSchedule)> {
    Ok((
        HyRanConfig::new(p).with_imputation(ImputationMode::Theory { delta }),
        RegularizationSchedule::theory(d, delta)?,
    ))
}

/// Seed for an auxiliary stream of `check`.
pub(crate) fn check_seed(seed: u64, check: u64, k: u64) -> u64 {
    derive_seed(&[seed, check, k])
}
