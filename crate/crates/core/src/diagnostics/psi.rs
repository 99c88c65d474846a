use rand::SeedableRng;

use super::{binomial_se, check_seed, mean_se, DiagnosticReport};
use crate::bandit::{sample_hybridization, HybridizationConfig};
use crate::error::{ensure_arg, Result};
use crate::exec::Execution;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiConfig {
    pub p: f64,
    pub epsilon: f64,
    pub horizon: u64,
    pub delta: f64,
    pub trials: usize,
    /// Arms used for the hybridization draw; only `P(h = a) = p` matters.
    pub n_arms: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for PsiConfig {
    fn default() -> Self {
        Self {
            p: 0.5,
            epsilon: 0.5,
            horizon: 2000,
            delta: 0.1,
            trials: 500,
            n_arms: 10,
            seed: 1,
            execution: Execution::Parallel,
        }
    }
}

impl PsiConfig {
    /// `t ≥ 2/(p(1-ε)²) · log(T/δ)`.
    pub fn threshold_round(&self) -> f64 {
        2.0 / (self.p * (1.0 - self.epsilon).powi(2)) * (self.horizon as f64 / self.delta).ln()
    }
}

struct PsiTrial {
    violated: bool,
    final_fraction: f64,
}

/// Checks `|Ψ_t| ≥ εpt` past the threshold round on independent
/// hybridization sequences, and the convergence `|Ψ_T|/T → p`.
///
/// Passes when the fraction of violating sequences is at most
/// `δ + 3·SE` (with `SE = √(δ(1-δ)/trials)`), at least 99% of sequences
/// have `| |Ψ_T|/T - p | ≤ 4√(p(1-p)/T)`, and the mean of `|Ψ_T|/T` lies
/// within 4 standard errors of `p`.
pub fn check_psi_size(cfg: &PsiConfig) -> Result<DiagnosticReport> {
    ensure_arg!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0, "epsilon must lie in (0, 1)");
    ensure_arg!(cfg.delta > 0.0 && cfg.delta < 1.0, "delta must lie in (0, 1)");
    ensure_arg!(cfg.horizon >= 1 && cfg.trials >= 1, "need T >= 1 and trials >= 1");
    let hybrid = HybridizationConfig::new(cfg.p, cfg.n_arms)?;
    let t0 = cfg.threshold_round();

    let results = cfg.execution.try_map_indexed(cfg.trials, |k| -> Result<PsiTrial> {
        let mut rng = StreamRng::seed_from_u64(check_seed(cfg.seed, 1, k as u64));
        let mut count = 0u64;
        let mut violated = false;
        for t in 1..=cfg.horizon {
            // the played arm is irrelevant to the law of 1(h = a)
            let chosen = (t as usize) % cfg.n_arms;
            if sample_hybridization(chosen, &hybrid, &mut rng)? == chosen {
                count += 1;
            }
            if t as f64 >= t0 && (count as f64) < cfg.epsilon * cfg.p * t as f64 {
                violated = true;
            }
        }
        Ok(PsiTrial {
            violated,
            final_fraction: count as f64 / cfg.horizon as f64,
        })
    })?;

    let mut report = DiagnosticReport::new("psi-size", cfg.trials);
    report.violations = results.iter().filter(|r| r.violated).count();
    let rate = report.violation_rate();
    let allowed = cfg.delta + 3.0 * binomial_se(cfg.delta, cfg.trials);
    report.statistic = rate;
    report.threshold = allowed;
    let se = binomial_se(rate, cfg.trials);
    report.ci = ((rate - 2.0 * se).max(0.0), (rate + 2.0 * se).min(1.0));

    let fractions: Vec<f64> = results.iter().map(|r| r.final_fraction).collect();
    let tol = 4.0 * (cfg.p * (1.0 - cfg.p) / cfg.horizon as f64).sqrt();
    let within = fractions.iter().filter(|f| (*f - cfg.p).abs() <= tol).count() as f64
        / cfg.trials as f64;
    let (mean_frac, mean_se_frac) = mean_se(&fractions);
    let mean_ok = (mean_frac - cfg.p).abs() <= 4.0 * mean_se_frac.max(1e-300);

    report.push_metric("threshold_round", t0);
    report.push_metric("mean_final_fraction", mean_frac);
    report.push_metric("final_fraction_se", mean_se_frac);
    report.push_metric("final_fraction_tolerance", tol);
    report.push_metric("within_tolerance_share", within);
    if t0 > cfg.horizon as f64 {
        report.note(format!(
            "threshold round {t0:.1} exceeds T = {}; the bound is vacuous",
            cfg.horizon
        ));
    }
    report.passed = rate <= allowed && within >= 0.99 && mean_ok;
    Ok(report)
}
