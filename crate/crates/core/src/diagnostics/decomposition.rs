use nalgebra::DVector;

use super::{mean_se, DiagnosticReport, SeriesPoint, TrialSetup};
use crate::bandit::{select_arm, ContextSet, HyRanConfig, RegularizationSchedule};
use crate::environment::EnvironmentSpec;
use crate::error::{ensure_arg, Result};
use crate::exec::Execution;
use crate::linalg::mahalanobis;

/// Slack allowed in the Cauchy-Schwarz step, for rounding only.
const CS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionConfig {
    pub env: EnvironmentSpec,
    pub hyran: HyRanConfig,
    pub schedule: RegularizationSchedule,
    pub horizon: u64,
    pub trials: usize,
    /// Fresh context draws per conditional-expectation estimate.
    pub mc_contexts: usize,
    /// Audit the full inequality every `audit_stride` rounds.
    pub audit_stride: u64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            env: EnvironmentSpec::correlated_gaussian(5, 10),
            hyran: HyRanConfig::new(0.5),
            schedule: RegularizationSchedule::practical(5),
            horizon: 500,
            trials: 50,
            mc_contexts: 256,
            audit_stride: 5,
            seed: 3,
            execution: Execution::Parallel,
        }
    }
}

/// `maxᵢ |xᵢᵀ e|` with `e = β̂ - β*`.
pub fn max_residual(contexts: &ContextSet, err: &DVector<f64>) -> f64 {
    contexts
        .iter()
        .map(|x| x.iter().zip(err.iter()).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// An audit opened after round `t`, closed once round `t + 1` is seen.
struct Pending {
    t: u64,
    err: DVector<f64>,
    beta_hat: DVector<f64>,
    psi_mean: f64,
    term3: f64,
    expect: f64,
    expect_se: f64,
}

#[derive(Default)]
struct Trial {
    audits: usize,
    violations: usize,
    cs_rounds: usize,
    cs_exceptions: usize,
    max_cs_excess: f64,
    terms: Vec<[f64; 4]>,
    audit_rounds: Vec<u64>,
}

/// Evaluates, on simulated trajectories,
///
/// `regret(t+1) ≤ 2{Δ_{X_{t+1}} - E[Δ]} + 2{E[Δ] - |Ψ_t|⁻¹ Σ_Ψ Δ_{X_τ}}
///              + 2|Ψ_t|^{-1/2} ‖β̂_t - β*‖_{V_t}`
///
/// where `Δ_x = maxᵢ |xᵢᵀ(β̂_t - β*)|` and `E[Δ]` is estimated from fresh
/// context draws. The Cauchy-Schwarz step
/// `Σ_Ψ Δ_{X_τ} ≤ √|Ψ_t| ‖β̂_t - β*‖_{V_t}` is checked at every round.
pub fn check_regret_decomposition(cfg: &DecompositionConfig) -> Result<DiagnosticReport> {
    ensure_arg!(cfg.trials >= 1 && cfg.mc_contexts >= 2, "need trials >= 1 and mc_contexts >= 2");
    ensure_arg!(cfg.audit_stride >= 1, "audit stride must be >= 1");

    let results = cfg.execution.try_map_indexed(cfg.trials, |k| -> Result<Trial> {
        let mut setup = TrialSetup::new(&cfg.env, cfg.hyran, cfg.schedule, cfg.seed, k)?;
        let mut trial = Trial::default();
        let mut psi_contexts: Vec<ContextSet> = Vec::new();
        let mut pending: Option<Pending> = None;
        let mut last_psi = 0;
        setup.run(cfg.horizon, |b, env, ctx, aux| {
            let state = b.state();
            let t = state.round();
            if let Some(p) = pending.take() {
                // ctx are the contexts of round p.t + 1, where the policy
                // selected greedily on p.beta_hat
                let arm = select_arm(ctx, p.beta_hat.as_slice())?;
                let regret = env.regret(ctx, arm);
                let delta_next = max_residual(ctx, &p.err);
                let term1 = 2.0 * (delta_next - p.expect);
                let term2 = 2.0 * (p.expect - p.psi_mean);
                let rhs = term1 + term2 + p.term3;
                if regret > rhs + 4.0 * p.expect_se + CS_SLACK {
                    trial.violations += 1;
                }
                trial.audits += 1;
                trial.terms.push([regret, term1, term2, p.term3]);
                trial.audit_rounds.push(p.t);
            }
            if state.psi_count() > last_psi {
                psi_contexts.push(ctx.clone());
                last_psi = state.psi_count();
            }
            if psi_contexts.is_empty() || t >= cfg.horizon {
                return Ok(());
            }

            let beta_hat = b.current_estimate()?;
            let err = &beta_hat - DVector::from_column_slice(env.beta_star());
            let lambda = b.schedule().lambda(t)?;
            let v_norm = mahalanobis(&state.regularized_gram(lambda), &err);
            let psi_sum: f64 = psi_contexts.iter().map(|c| max_residual(c, &err)).sum();
            let n_psi = psi_contexts.len() as f64;
            let cs_rhs = n_psi.sqrt() * v_norm;
            trial.cs_rounds += 1;
            if psi_sum > cs_rhs + CS_SLACK * (1.0 + cs_rhs) {
                trial.cs_exceptions += 1;
            }
            trial.max_cs_excess = trial.max_cs_excess.max(psi_sum - cs_rhs);

            if t % cfg.audit_stride == 0 {
                let draws: Vec<f64> = (0..cfg.mc_contexts)
                    .map(|_| env.contexts(t + 1, aux).map(|c| max_residual(&c, &err)))
                    .collect::<Result<_>>()?;
                let (expect, expect_se) = mean_se(&draws);
                pending = Some(Pending {
                    t,
                    psi_mean: psi_sum / n_psi,
                    term3: 2.0 / n_psi.sqrt() * v_norm,
                    err,
                    beta_hat,
                    expect,
                    expect_se,
                });
            }
            Ok(())
        })?;
        Ok(trial)
    })?;

    let mut report = DiagnosticReport::new("regret-decomposition", cfg.trials);
    report.violations = results.iter().filter(|r| r.violations > 0).count();
    let audits: usize = results.iter().map(|r| r.audits).sum();
    let audit_violations: usize = results.iter().map(|r| r.violations).sum();
    let cs_rounds: usize = results.iter().map(|r| r.cs_rounds).sum();
    let cs_exceptions: usize = results.iter().map(|r| r.cs_exceptions).sum();
    report.statistic = (audit_violations + cs_exceptions) as f64;
    report.threshold = 0.0;
    report.ci = (0.0, 0.0);
    report.push_metric("audited_rounds", audits as f64);
    report.push_metric("audit_violations", audit_violations as f64);
    report.push_metric("cauchy_schwarz_rounds", cs_rounds as f64);
    report.push_metric("cauchy_schwarz_exceptions", cs_exceptions as f64);
    report.push_metric(
        "max_cauchy_schwarz_excess",
        results.iter().map(|r| r.max_cs_excess).fold(f64::NEG_INFINITY, f64::max),
    );
    let names = ["regret", "term1", "term2", "term3"];
    for (j, name) in names.iter().enumerate() {
        let vals: Vec<f64> = results.iter().flat_map(|r| r.terms.iter().map(move |x| x[j])).collect();
        report.push_metric(&format!("mean_{name}"), mean_se(&vals).0);
    }
    if let Some(first) = results.first() {
        for (t, x) in first.audit_rounds.iter().zip(&first.terms) {
            report.series.push(SeriesPoint {
                series: "trial0_regret_vs_rhs".into(),
                t: t + 1,
                empirical: x[0],
                bound: x[1] + x[2] + x[3],
            });
        }
    }
    report.passed = audit_violations == 0 && cs_exceptions == 0 && audits > 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_gives_zero_residual() {
        let c = ContextSet::from_vectors(&[vec![0.5, 0.1], vec![-0.3, 0.2]], 1).unwrap();
        assert_eq!(max_residual(&c, &DVector::zeros(2)), 0.0);
        let e = DVector::from_vec(vec![1.0, -1.0]);
        assert!((max_residual(&c, &e) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_audit_passes() {
        let cfg = DecompositionConfig {
            horizon: 120,
            trials: 4,
            mc_contexts: 64,
            ..DecompositionConfig::default()
        };
        let r = check_regret_decomposition(&cfg).unwrap();
        assert!(r.passed, "{}", r.summary_text());
        assert_eq!(r.metric("cauchy_schwarz_exceptions"), Some(0.0));
        assert!(r.metric("max_cauchy_schwarz_excess").unwrap() <= 0.0);
    }
}
