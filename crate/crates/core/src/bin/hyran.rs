//! Command-line front end: `run`, `grid`, `diagnose` and `plot`.
//!
//! Exit codes: 0 on success, 1 when a diagnostic fails or a run errors,
//! 2 on usage or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyran::bandit::{ImputationMode, ImputeTiming};
use hyran::diagnostics::{
    self, check_cloud_collapse, check_imputation_error, check_lower_bound,
    check_pseudo_reward_unbiasedness, check_psi_size, check_regret_decomposition,
    check_self_normalized, write_cloud_scatter, CloudConfig, DecompositionConfig,
    DiagnosticReport, ImputationConfig, LowerBoundConfig, PsiConfig, SelfNormalizedConfig,
    UnbiasednessConfig,
};
use hyran::environment::{default_means, gen_hard_instance, EnvKind, EnvironmentSpec};
use hyran::exec::Execution;
use hyran::harness::{
    aggregate_rows, emit_plot, read_trace_rows, run_grid, AlgorithmKind, ConfigFile,
    ExperimentConfig, HyRanOptions, PlotCurve, ScheduleMode,
};
use hyran::{BanditError, Result};

const OUT_DIR_ENV: &str = "HYRAN_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "hyran", version, about = "Linear contextual bandit simulations and diagnostics")]
struct Cli {
    /// TOML file with [experiment], [environment] and [hyran] sections.
    /// Command-line flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one algorithm with one hyperparameter for several repetitions.
    Run(RunArgs),
    /// Search hyperparameter grids and report the best configuration per algorithm.
    Grid(GridArgs),
    /// Run a Monte-Carlo diagnostic.
    Diagnose(DiagnoseArgs),
    /// Plot mean cumulative regret from trace CSV files.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct CommonArgs {
    /// Environment: `correlated` or `hard`.
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Number of arms.
    #[arg(long = "N", alias = "n-arms")]
    n_arms: Option<usize>,
    /// Horizon.
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $HYRAN_OUT_DIR, else `out`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Reward noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// HyRan imputation estimator: `practical` or `theory`.
    #[arg(long)]
    imputation: Option<String>,
    /// HyRan imputation timing: `lagged` or `concurrent`.
    #[arg(long)]
    timing: Option<String>,
    /// HyRan regularization schedule: `practical` or `theory`.
    #[arg(long)]
    schedule: Option<String>,
    /// Confidence parameter of the theory schedule and imputation.
    #[arg(long)]
    delta: Option<f64>,
    /// Run every cell on the calling thread.
    #[arg(long)]
    serial: bool,
    /// Enable experimental algorithms (DRTS).
    #[arg(long)]
    allow_experimental: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// hyran, linucb, lints, suplinucb or drts.
    #[arg(long)]
    algo: Option<String>,
    /// Hybridization probability (HyRan).
    #[arg(long)]
    p: Option<f64>,
    /// Confidence width (LinUCB, SupLinUCB).
    #[arg(long)]
    alpha: Option<f64>,
    /// Posterior scale (LinTS, DRTS).
    #[arg(long)]
    v: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("grid_source").args(["preset", "grid"])))]
struct GridArgs {
    /// Comma-separated algorithms (default: hyran,linucb,lints,suplinucb).
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<String>>,
    /// `benchmark` (alias `paper`): α, v ∈ {0.001, 0.01, 0.1, 1} and p ∈ {0.5, 0.65, 0.8, 0.95}.
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated values searched for every selected algorithm.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// psi-size, self-normalized, regret-decomposition, imputation-error,
    /// lower-bound, unbiasedness or cloud.
    #[arg(long)]
    check: String,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Audit start when the theoretical burn-in exceeds the horizon.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Fresh context draws per conditional expectation.
    #[arg(long)]
    mc_contexts: Option<usize>,
    /// Estimator-cloud replays.
    #[arg(long)]
    replays: Option<usize>,
    #[arg(long)]
    runs_per_instance: Option<usize>,
    /// Hybridization draws per snapshot (unbiasedness).
    #[arg(long)]
    draws: Option<usize>,
    /// Algorithm for the lower-bound check.
    #[arg(long)]
    algo: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Trace CSV files (`algo,d,N,T,hyper_name,hyper_value,rep,t,cum_regret`).
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Command-line values merged over the config file.
struct Resolved {
    file: ConfigFile,
    common: CommonArgs,
}

impl Resolved {
    fn horizon(&self, default: u64) -> u64 {
        self.common.horizon.or(self.file.experiment.horizon).unwrap_or(default)
    }

    fn reps(&self, default: usize) -> usize {
        self.common.reps.or(self.file.experiment.reps).unwrap_or(default)
    }

    fn seed(&self, default: u64) -> u64 {
        self.common.seed.or(self.file.experiment.seed).unwrap_or(default)
    }

    fn out_dir(&self) -> PathBuf {
        self.common
            .out_dir
            .clone()
            .or_else(|| self.file.experiment.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn execution(&self) -> Execution {
        if self.common.serial || self.file.experiment.serial == Some(true) {
            Execution::Serial
        } else {
            Execution::Parallel
        }
    }

    fn allow_experimental(&self) -> bool {
        self.common.allow_experimental || self.file.experiment.allow_experimental == Some(true)
    }

    fn delta(&self, default: f64) -> f64 {
        self.common.delta.or(self.file.hyran.delta).unwrap_or(default)
    }

    fn env_spec(&self, d: usize, n_arms: usize) -> Result<EnvironmentSpec> {
        let e = &self.file.environment;
        let kind = self.common.env.clone().or_else(|| e.kind.clone());
        let kind = match kind.as_deref() {
            None | Some("correlated") | Some("correlated_gaussian") => EnvKind::CorrelatedGaussian,
            Some("hard") | Some("hard_instance") => EnvKind::HardInstance,
            Some(other) => return Err(usage(format!("unknown environment '{other}'"))),
        };
        let d = self.common.d.or(e.d).unwrap_or(d);
        let n_arms = self.common.n_arms.or(e.n_arms).unwrap_or(n_arms);
        let sigma = self.common.sigma.or(e.noise_sigma).unwrap_or(1.0);
        let mut spec = match kind {
            EnvKind::CorrelatedGaussian => EnvironmentSpec {
                means: e.means.clone().unwrap_or_else(|| default_means(n_arms)),
                cross_corr: e.cross_corr.unwrap_or(0.5),
                beta_star: e.beta_star.clone(),
                ..EnvironmentSpec::correlated_gaussian(d, n_arms)
            },
            EnvKind::HardInstance => {
                let mut spec = gen_hard_instance(d, n_arms, self.horizon(5000))?.spec;
                if let Some(gap) = e.delta_gap {
                    spec.delta_gap = Some(gap);
                }
                spec
            }
        };
        spec.noise_sigma = sigma;
        spec.validate()?;
        Ok(spec)
    }

    fn hyran_options(&self) -> Result<HyRanOptions> {
        let h = &self.file.hyran;
        let delta = self.delta(0.05);
        let imputation = match self.common.imputation.clone().or_else(|| h.imputation.clone()).as_deref() {
            None | Some("practical") => ImputationMode::Practical,
            Some("theory") => ImputationMode::Theory { delta },
            Some(other) => return Err(usage(format!("unknown imputation '{other}'"))),
        };
        let timing = match self.common.timing.clone().or_else(|| h.timing.clone()).as_deref() {
            None | Some("lagged") => ImputeTiming::Lagged,
            Some("concurrent") => ImputeTiming::Concurrent,
            Some(other) => return Err(usage(format!("unknown timing '{other}'"))),
        };
        let schedule = match self.common.schedule.clone().or_else(|| h.schedule.clone()).as_deref() {
            None | Some("practical") => ScheduleMode::Practical,
            Some("theory") => ScheduleMode::Theory,
            Some(other) => return Err(usage(format!("unknown schedule '{other}'"))),
        };
        Ok(HyRanOptions {
            imputation,
            timing,
            schedule,
            delta,
        })
    }

    fn experiment(&self, algorithms: Vec<AlgorithmKind>, grids: Vec<Vec<f64>>) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            algorithms,
            grids,
            env: self.env_spec(5, 10)?,
            horizon: self.horizon(5000),
            reps: self.reps(10),
            master_seed: self.seed(1),
            out_dir: self.out_dir(),
            hyran: self.hyran_options()?,
            allow_experimental: self.allow_experimental(),
            execution: self.execution(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn usage(msg: String) -> BanditError {
    BanditError::InvalidArgument(msg)
}

fn parse_algo(s: &str) -> Result<AlgorithmKind> {
    AlgorithmKind::parse(s)
}

fn cmd_run(res: &Resolved, args: &RunArgs) -> Result<bool> {
    let algo_name = args
        .algo
        .clone()
        .or_else(|| res.file.experiment.algo.as_ref().and_then(|a| a.first().cloned()))
        .ok_or_else(|| usage("run needs --algo".into()))?;
    let algo = parse_algo(&algo_name)?;
    let hyper = match algo {
        AlgorithmKind::HyRan => args.p,
        AlgorithmKind::LinUcb | AlgorithmKind::SupLinUcb => args.alpha,
        AlgorithmKind::LinTs | AlgorithmKind::Drts => args.v,
    }
    .or_else(|| res.file.experiment.grid.as_ref().and_then(|g| g.first().copied()))
    .unwrap_or_else(|| algo.default_hyper());
    let cfg = res.experiment(vec![algo], vec![vec![hyper]])?;
    let outcome = run_grid(&cfg)?;
    for path in outcome.write(&cfg.out_dir)? {
        println!("wrote {}", path.display());
    }
    for c in &outcome.aggregate.curves {
        println!(
            "{} final mean cumulative regret {:.4} (std {:.4}, {} reps)",
            c.label(),
            c.final_mean(),
            c.final_std(),
            c.reps
        );
    }
    Ok(true)
}

fn cmd_grid(res: &Resolved, args: &GridArgs) -> Result<bool> {
    let names = args
        .algo
        .clone()
        .or_else(|| res.file.experiment.algo.clone())
        .unwrap_or_else(|| AlgorithmKind::BENCHMARKED.iter().map(|a| a.id().to_string()).collect());
    let algorithms = names.iter().map(|s| parse_algo(s)).collect::<Result<Vec<_>>>()?;
    let preset = args.preset.clone().or_else(|| res.file.experiment.preset.clone());
    let list = args.grid.clone().or_else(|| res.file.experiment.grid.clone());
    let grids = match (preset.as_deref(), list) {
        (_, Some(list)) if args.preset.is_none() => vec![list; algorithms.len()],
        (Some("benchmark" | "paper"), _) => algorithms.iter().map(|a| a.benchmark_grid()).collect(),
        (Some(other), _) => return Err(usage(format!("unknown preset '{other}'"))),
        (None, _) => return Err(usage("grid needs --preset benchmark or --grid <list>".into())),
    };
    let cfg = res.experiment(algorithms, grids)?;
    let outcome = run_grid(&cfg)?;
    for path in outcome.write(&cfg.out_dir)? {
        println!("wrote {}", path.display());
    }
    for (algo, i) in &outcome.aggregate.best {
        let c = &outcome.aggregate.curves[*i];
        println!("best {algo}: {}={} final mean {:.4}", c.hyper_name, c.hyper_value, c.final_mean());
    }
    Ok(true)
}

fn cmd_diagnose(res: &Resolved, args: &DiagnoseArgs) -> Result<bool> {
    let exec = res.execution();
    let c = &res.common;
    let out_dir = res.out_dir();
    let env = |d: usize, n: usize| res.env_spec(d, n);
    let report: DiagnosticReport = match args.check.as_str() {
        "psi-size" => {
            let dflt = PsiConfig::default();
            check_psi_size(&PsiConfig {
                p: args.p.unwrap_or(dflt.p),
                epsilon: args.epsilon.unwrap_or(dflt.epsilon),
                horizon: res.horizon(dflt.horizon),
                delta: res.delta(dflt.delta),
                trials: args.trials.unwrap_or(dflt.trials),
                n_arms: c.n_arms.unwrap_or(dflt.n_arms),
                seed: res.seed(dflt.seed),
                execution: exec,
            })?
        }
        "self-normalized" => {
            let dflt = SelfNormalizedConfig::default();
            check_self_normalized(&SelfNormalizedConfig {
                env: env(5, 10)?,
                p: args.p.unwrap_or(dflt.p),
                delta: res.delta(dflt.delta),
                horizon: res.horizon(dflt.horizon),
                trials: args.trials.unwrap_or(dflt.trials),
                surrogate_burn_in: args.burn_in.unwrap_or(dflt.surrogate_burn_in),
                seed: res.seed(dflt.seed),
                execution: exec,
                ..dflt
            })?
        }
        "regret-decomposition" => {
            let dflt = DecompositionConfig::default();
            let env = env(5, 10)?;
            let options = res.hyran_options()?;
            check_regret_decomposition(&DecompositionConfig {
                hyran: options.config(args.p.unwrap_or(dflt.hyran.p)),
                schedule: options.schedule(env.d)?,
                env,
                horizon: res.horizon(dflt.horizon),
                trials: args.trials.unwrap_or(dflt.trials),
                mc_contexts: args.mc_contexts.unwrap_or(dflt.mc_contexts),
                seed: res.seed(dflt.seed),
                execution: exec,
                ..dflt
            })?
        }
        "imputation-error" => {
            let dflt = ImputationConfig::default();
            check_imputation_error(&ImputationConfig {
                env: env(5, 10)?,
                p: args.p.unwrap_or(dflt.p),
                delta: res.delta(dflt.delta),
                horizon: res.horizon(dflt.horizon),
                trials: args.trials.unwrap_or(dflt.trials),
                surrogate_burn_in: args.burn_in.unwrap_or(dflt.surrogate_burn_in),
                seed: res.seed(dflt.seed),
                execution: exec,
                ..dflt
            })?
        }
        "lower-bound" => {
            let dflt = LowerBoundConfig::default();
            let algo = match &args.algo {
                Some(a) => parse_algo(a)?,
                None => dflt.algo,
            };
            check_lower_bound(&LowerBoundConfig {
                algo,
                hyper: args.p.filter(|_| algo == AlgorithmKind::HyRan).unwrap_or_else(|| algo.default_hyper()),
                hyran: res.hyran_options()?,
                d: c.d.unwrap_or(dflt.d),
                n_arms: c.n_arms.unwrap_or(dflt.n_arms),
                horizon: res.horizon(dflt.horizon),
                runs_per_instance: args.runs_per_instance.unwrap_or(dflt.runs_per_instance),
                seed: res.seed(dflt.seed),
                execution: exec,
            })?
        }
        "unbiasedness" => {
            let dflt = UnbiasednessConfig::default();
            check_pseudo_reward_unbiasedness(&UnbiasednessConfig {
                env: env(5, 10)?,
                p: args.p.unwrap_or(dflt.p),
                snapshots: args.trials.unwrap_or(dflt.snapshots),
                draws: args.draws.unwrap_or(dflt.draws),
                seed: res.seed(dflt.seed),
                execution: exec,
                ..dflt
            })?
        }
        "cloud" => {
            let dflt = CloudConfig::default();
            let out = check_cloud_collapse(&CloudConfig {
                env: env(2, 10)?,
                p: args.p.unwrap_or(dflt.p),
                horizon: res.horizon(dflt.horizon),
                replays: args.replays.unwrap_or(dflt.replays),
                seed: res.seed(dflt.seed),
                execution: exec,
                ..dflt
            })?;
            for path in write_cloud_scatter(&out_dir, "cloud", &out.base)?
                .into_iter()
                .chain(write_cloud_scatter(&out_dir, "cloud_collapsed", &out.collapsed)?)
            {
                println!("wrote {}", path.display());
            }
            out.report
        }
        other => {
            return Err(usage(format!(
                "unknown check '{other}' (expected one of: {})",
                diagnostics::CHECK_NAMES.join(", ")
            )))
        }
    };
    for path in report.write(&out_dir)? {
        println!("wrote {}", path.display());
    }
    print!("{}", report.summary_text());
    Ok(report.passed)
}

fn cmd_plot(args: &PlotArgs) -> Result<bool> {
    let mut rows = Vec::new();
    for path in &args.inputs {
        rows.extend(read_trace_rows(path)?);
    }
    let curves = aggregate_rows(&rows)?;
    let plot: Vec<PlotCurve> = curves.iter().map(PlotCurve::from_aggregate).collect();
    emit_plot(&plot, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(true)
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let file = load_config(cli.config.as_deref())?;
    let resolved = |common: &CommonArgs| Resolved {
        file: file.clone(),
        common: common.clone(),
    };
    match &cli.command {
        Command::Run(a) => cmd_run(&resolved(&a.common), a),
        Command::Grid(a) => cmd_grid(&resolved(&a.common), a),
        Command::Diagnose(a) => cmd_diagnose(&resolved(&a.common), a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BanditError::InvalidArgument(_) | BanditError::Unsupported(_) | BanditError::Config(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
