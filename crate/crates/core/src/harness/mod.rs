//! Experiment driver: policy construction, seeded trajectories, grid
//! search, aggregation and file output.

mod config;
mod csv_io;
mod grid;
mod plot;

pub use config::{ConfigFile, EnvironmentSection, ExperimentSection, HyRanSection};
pub use csv_io::{read_trace_rows, write_aggregate_csv, write_best_csv, write_trace_csv, TraceRow};
pub use grid::{aggregate, aggregate_rows, run_grid, select_best, AggregateCurve, AggregateResult, GridOutcome};
pub use plot::{emit_plot, render_svg, PlotCurve, MAX_PLOT_POINTS};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bandit::{
    ContextSet, HyRanBandit, HyRanConfig, ImputationMode, ImputeTiming, RegularizationSchedule,
};
use crate::baselines::{Drts, DrtsConfig, LinTs, LinUcb, SupLinUcb};
use crate::environment::{
    EnvKind, Environment, EnvironmentSpec, RegretTrace, TraceMeta, TraceRecord,
};
use crate::error::{ensure_arg, BanditError, Result};
use crate::exec::Execution;
use crate::policy::Policy;
use crate::rng::{derive_seed, Purpose, StreamRng, TrajectorySeeds};

/// Grid searched for `α` (LinUCB, SupLinUCB) and `v` (LinTS, DRTS).
pub const SCALE_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
/// Grid searched for the hybridization probability `p`.
pub const P_GRID: [f64; 4] = [0.5, 0.65, 0.8, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    HyRan,
    LinUcb,
    LinTs,
    SupLinUcb,
    Drts,
}

impl AlgorithmKind {
    pub const BENCHMARKED: [AlgorithmKind; 4] = [
        AlgorithmKind::HyRan,
        AlgorithmKind::LinUcb,
        AlgorithmKind::LinTs,
        AlgorithmKind::SupLinUcb,
    ];

    pub fn id(self) -> &'static str {
        match self {
            AlgorithmKind::HyRan => "hyran",
            AlgorithmKind::LinUcb => "linucb",
            AlgorithmKind::LinTs => "lints",
            AlgorithmKind::SupLinUcb => "suplinucb",
            AlgorithmKind::Drts => "drts",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hyran" => Ok(AlgorithmKind::HyRan),
            "linucb" => Ok(AlgorithmKind::LinUcb),
            "lints" => Ok(AlgorithmKind::LinTs),
            "suplinucb" => Ok(AlgorithmKind::SupLinUcb),
            "drts" => Ok(AlgorithmKind::Drts),
            other => Err(BanditError::InvalidArgument(format!("unknown algorithm '{other}'"))),
        }
    }

    pub fn hyper_name(self) -> &'static str {
        match self {
            AlgorithmKind::HyRan => "p",
            AlgorithmKind::LinUcb | AlgorithmKind::SupLinUcb => "alpha",
            AlgorithmKind::LinTs | AlgorithmKind::Drts => "v",
        }
    }

    pub fn benchmark_grid(self) -> Vec<f64> {
        match self {
            AlgorithmKind::HyRan => P_GRID.to_vec(),
            _ => SCALE_GRID.to_vec(),
        }
    }

    pub fn default_hyper(self) -> f64 {
        match self {
            AlgorithmKind::HyRan => 0.5,
            _ => 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Practical,
    Theory,
}

/// HyRan-specific switches shared by every cell of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyRanOptions {
    pub imputation: ImputationMode,
    pub timing: ImputeTiming,
    pub schedule: ScheduleMode,
    /// Confidence parameter for the theory schedule.
    pub delta: f64,
}

impl Default for HyRanOptions {
    fn default() -> Self {
        Self {
            imputation: ImputationMode::Practical,
            timing: ImputeTiming::Lagged,
            schedule: ScheduleMode::Practical,
            delta: 0.05,
        }
    }
}

impl HyRanOptions {
    pub fn theory(delta: f64) -> Self {
        Self {
            imputation: ImputationMode::Theory { delta },
            timing: ImputeTiming::Lagged,
            schedule: ScheduleMode::Theory,
            delta,
        }
    }

    pub fn schedule(&self, d: usize) -> Result<RegularizationSchedule> {
        match self.schedule {
            ScheduleMode::Practical => Ok(RegularizationSchedule::practical(d)),
            ScheduleMode::Theory => RegularizationSchedule::theory(d, self.delta),
        }
    }

    pub fn config(&self, p: f64) -> HyRanConfig {
        HyRanConfig::new(p)
            .with_imputation(self.imputation)
            .with_timing(self.timing)
    }
}

/// One (algorithm, hyperparameter) configuration in an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub algo: AlgorithmKind,
    pub hyper: f64,
    pub env: EnvironmentSpec,
    pub horizon: u64,
    pub master_seed: u64,
    pub hyran: HyRanOptions,
    pub allow_experimental: bool,
}

impl CellSpec {
    pub fn new(algo: AlgorithmKind, hyper: f64, env: EnvironmentSpec, horizon: u64, master_seed: u64) -> Self {
        Self {
            algo,
            hyper,
            env,
            horizon,
            master_seed,
            hyran: HyRanOptions::default(),
            allow_experimental: false,
        }
    }

    /// Stable index of this configuration, independent of grid order.
    pub fn config_index(&self) -> u64 {
        derive_seed(&[self.algo as u64 + 1, self.hyper.to_bits()])
    }

    /// Environment streams depend only on the repetition, so every
    /// configuration faces the same instances, contexts and noise.
    pub fn environment_seeds(&self, rep: usize) -> TrajectorySeeds {
        TrajectorySeeds::new(self.master_seed, 0, rep as u64)
    }

    pub fn policy_seeds(&self, rep: usize) -> TrajectorySeeds {
        TrajectorySeeds::new(self.master_seed, self.config_index(), rep as u64)
    }

    pub fn build_policy(&self, rep: usize) -> Result<Box<dyn Policy>> {
        let d = self.env.d;
        let seeds = self.policy_seeds(rep);
        Ok(match self.algo {
            AlgorithmKind::HyRan => Box::new(HyRanBandit::new(
                d,
                self.env.n_arms,
                self.hyran.config(self.hyper),
                self.hyran.schedule(d)?,
                seeds.seed(Purpose::Hybridization),
            )?),
            AlgorithmKind::LinUcb => Box::new(LinUcb::new(d, self.hyper, 1.0)?),
            AlgorithmKind::LinTs => Box::new(LinTs::new(d, self.hyper, 1.0, seeds.seed(Purpose::Policy))?),
            AlgorithmKind::SupLinUcb => Box::new(SupLinUcb::new(d, self.hyper, self.horizon)?),
            AlgorithmKind::Drts => Box::new(Drts::new(
                d,
                DrtsConfig::new(self.hyper),
                seeds.seed(Purpose::Policy),
                self.allow_experimental,
            )?),
        })
    }

    /// The environment instance of repetition `rep`. Hard instances cycle
    /// through the parameter family `β_{rep mod d}`.
    pub fn environment(&self, rep: usize) -> Result<Environment> {
        match self.env.kind {
            EnvKind::CorrelatedGaussian => {
                self.env.instantiate(&mut self.environment_seeds(rep).rng(Purpose::Instance))
            }
            EnvKind::HardInstance => {
                let gap = self.env.delta_gap.ok_or_else(|| {
                    BanditError::InvalidArgument("hard instance needs a gap".into())
                })?;
                let mut beta = vec![0.0; self.env.d];
                beta[rep % self.env.d] = gap;
                self.env.with_beta(beta)
            }
        }
    }
}

/// Drive `policy` for `horizon` rounds. `on_round` sees the policy after
/// each round's update.
pub fn simulate<P, F>(
    env: &Environment,
    policy: &mut P,
    horizon: u64,
    context_rng: &mut StreamRng,
    reward_rng: &mut StreamRng,
    mut on_round: F,
) -> Result<Vec<TraceRecord>>
where
    P: Policy + ?Sized,
    F: FnMut(&P, &ContextSet, &TraceRecord) -> Result<()>,
{
    let mut records = Vec::with_capacity(horizon as usize);
    let mut cum = 0.0;
    for t in 1..=horizon {
        let contexts = env.contexts(t, context_rng)?;
        let arm = policy.select(&contexts)?;
        ensure_arg!(arm < contexts.num_arms(), "policy returned arm {arm}");
        let reward = env.reward(contexts.arm(arm), reward_rng);
        let h = policy.observe(&contexts, arm, reward)?;
        let regret = env.regret(&contexts, arm);
        cum += regret;
        let rec = TraceRecord {
            t,
            arm,
            h,
            reward,
            regret,
            cum_regret: cum,
        };
        on_round(policy, &contexts, &rec)?;
        records.push(rec);
    }
    Ok(records)
}

pub fn run_trajectory(cell: &CellSpec, rep: usize) -> Result<RegretTrace> {
    if cell.env.kind == EnvKind::HardInstance {
        ensure_arg!(
            cell.env.d <= cell.env.n_arms,
            "hard instance needs d <= N (d={}, N={})",
            cell.env.d,
            cell.env.n_arms
        );
    }
    let env = cell.environment(rep)?;
    let mut policy = cell.build_policy(rep)?;
    let seeds = cell.environment_seeds(rep);
    let records = simulate(
        &env,
        policy.as_mut(),
        cell.horizon,
        &mut seeds.rng(Purpose::Contexts),
        &mut seeds.rng(Purpose::Rewards),
        |_, _, _| Ok(()),
    )?;
    Ok(RegretTrace {
        meta: TraceMeta {
            algo: cell.algo.id().to_string(),
            hyper_name: cell.algo.hyper_name().to_string(),
            hyper_value: cell.hyper,
            seed: cell.master_seed,
            d: cell.env.d,
            n_arms: cell.env.n_arms,
            horizon: cell.horizon,
            rep,
        },
        records,
    })
}

/// Full description of a `run` or `grid` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithms: Vec<AlgorithmKind>,
    /// Hyperparameter grid per algorithm, aligned with `algorithms`.
    pub grids: Vec<Vec<f64>>,
    pub env: EnvironmentSpec,
    pub horizon: u64,
    pub reps: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub hyran: HyRanOptions,
    pub allow_experimental: bool,
    pub execution: Execution,
}

impl ExperimentConfig {
    /// The benchmark preset: every benchmarked algorithm over its full grid.
    pub fn benchmark_preset(env: EnvironmentSpec, horizon: u64, reps: usize, master_seed: u64) -> Self {
        let algorithms = AlgorithmKind::BENCHMARKED.to_vec();
        Self {
            grids: algorithms.iter().map(|a| a.benchmark_grid()).collect(),
            algorithms,
            env,
            horizon,
            reps,
            master_seed,
            out_dir: PathBuf::from("out"),
            hyran: HyRanOptions::default(),
            allow_experimental: false,
            execution: Execution::Parallel,
        }
    }

    pub fn cells(&self) -> Vec<CellSpec> {
        self.algorithms
            .iter()
            .zip(&self.grids)
            .flat_map(|(&algo, grid)| {
                grid.iter().map(move |&hyper| CellSpec {
                    algo,
                    hyper,
                    env: self.env.clone(),
                    horizon: self.horizon,
                    master_seed: self.master_seed,
                    hyran: self.hyran,
                    allow_experimental: self.allow_experimental,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_arg!(!self.algorithms.is_empty(), "no algorithms selected");
        ensure_arg!(
            self.algorithms.len() == self.grids.len(),
            "every algorithm needs a grid"
        );
        ensure_arg!(self.grids.iter().all(|g| !g.is_empty()), "empty hyperparameter grid");
        self.env.validate()
    }
}
