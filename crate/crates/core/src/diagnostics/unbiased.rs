use rand::{Rng, SeedableRng};

use super::{check_seed, DiagnosticReport};
use crate::bandit::{compute_pseudo_rewards, sample_hybridization, HybridizationConfig};
use crate::environment::{gen_beta_star, EnvironmentSpec};
use crate::error::{ensure_arg, BanditError, Result};
use crate::exec::Execution;
use crate::linalg::dot;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessConfig {
    pub env: EnvironmentSpec,
    pub p: f64,
    pub snapshots: usize,
    pub draws: usize,
    /// Tolerance in standard errors.
    pub z: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for UnbiasednessConfig {
    fn default() -> Self {
        Self {
            env: EnvironmentSpec::correlated_gaussian(5, 10),
            p: 0.5,
            snapshots: 100,
            draws: 10_000,
            z: 4.0,
            seed: 6,
            execution: Execution::Parallel,
        }
    }
}

struct Snapshot {
    arm_failures: usize,
    multiplier_failures: usize,
    max_z: f64,
}

/// Running mean and variance (Welford).
#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn se(&self) -> f64 {
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }

    /// `|mean - target|` in standard errors; an exact zero-variance hit is 0.
    fn z(&self, target: f64) -> f64 {
        let dev = (self.mean - target).abs();
        let se = self.se();
        if se > 0.0 {
            dev / se
        } else if dev <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// For frozen snapshots (contexts, played arm, imputation), averages the
/// doubly robust pseudo-reward
/// `Ỹᵢ = (1 - 1(h=i)/πᵢ) xᵢᵀβ̌ + 1(h=i)/πᵢ · Yᵢ` over hybridization draws,
/// with a fresh reward `Yᵢ` per draw. Passes when every arm's mean lies
/// within `z` standard errors of `xᵢᵀβ*` and every mean multiplier
/// `1 - 1(h=i)/πᵢ` within `z` standard errors of 0.
pub fn check_pseudo_reward_unbiasedness(cfg: &UnbiasednessConfig) -> Result<DiagnosticReport> {
    ensure_arg!(cfg.snapshots >= 1 && cfg.draws >= 2, "need snapshots >= 1 and draws >= 2");
    let n = cfg.env.n_arms;
    let hybrid = HybridizationConfig::new(cfg.p, n)?;

    let results = cfg.execution.try_map_indexed(cfg.snapshots, |s| -> Result<Snapshot> {
        let mut rng = StreamRng::seed_from_u64(check_seed(cfg.seed, 6, s as u64));
        let env = cfg.env.instantiate(&mut rng)?;
        let ctx = env.contexts(s as u64 + 1, &mut rng)?;
        let impute = gen_beta_star(cfg.env.d, &mut rng);
        let chosen = rng.gen_range(0..n);
        let means: Vec<f64> = ctx.iter().map(|x| dot(x, env.beta_star())).collect();
        let imputed: Vec<f64> = ctx.iter().map(|x| dot(x, &impute)).collect();
        let probs = hybrid.probabilities(chosen);

        let mut pseudo = vec![Moments::default(); n];
        let mut mult = vec![Moments::default(); n];
        for _ in 0..cfg.draws {
            let h = sample_hybridization(chosen, &hybrid, &mut rng)?;
            let y_h = env.reward(ctx.arm(h), &mut rng);
            for i in 0..n {
                let w = if i == h { 1.0 / probs[i] } else { 0.0 };
                let m = 1.0 - w;
                pseudo[i].push(m * imputed[i] + w * y_h);
                mult[i].push(m);
            }
            if h == chosen {
                // the estimator's own construction must agree
                let pr = compute_pseudo_rewards(&ctx, chosen, h, y_h, &impute, &hybrid)?;
                for i in 0..n {
                    let w = if i == h { 1.0 / probs[i] } else { 0.0 };
                    let direct = (1.0 - w) * imputed[i] + w * y_h;
                    if (pr.values[i] - direct).abs() > 1e-12 * (1.0 + direct.abs()) {
                        return Err(BanditError::Internal(format!(
                            "pseudo-reward mismatch on arm {i}: {} vs {direct}",
                            pr.values[i]
                        )));
                    }
                }
            }
        }
        let mut snap = Snapshot {
            arm_failures: 0,
            multiplier_failures: 0,
            max_z: 0.0,
        };
        for i in 0..n {
            let z = pseudo[i].z(means[i]);
            snap.max_z = snap.max_z.max(z);
            snap.arm_failures += usize::from(z > cfg.z);
            snap.multiplier_failures += usize::from(mult[i].z(0.0) > cfg.z);
        }
        Ok(snap)
    })?;

    let mut report = DiagnosticReport::new("unbiasedness", cfg.snapshots);
    let arm_failures: usize = results.iter().map(|r| r.arm_failures).sum();
    let mult_failures: usize = results.iter().map(|r| r.multiplier_failures).sum();
    report.violations = results
        .iter()
        .filter(|r| r.arm_failures + r.multiplier_failures > 0)
        .count();
    let max_z = results.iter().map(|r| r.max_z).fold(0.0, f64::max);
    report.statistic = max_z;
    report.threshold = cfg.z;
    report.ci = (0.0, max_z);
    report.push_metric("arm_checks", (cfg.snapshots * n) as f64);
    report.push_metric("arm_failures", arm_failures as f64);
    report.push_metric("multiplier_failures", mult_failures as f64);
    report.push_metric("max_abs_z", max_z);
    report.passed = arm_failures == 0 && mult_failures == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_check_passes() {
        let cfg = UnbiasednessConfig {
            snapshots: 5,
            draws: 2000,
            ..UnbiasednessConfig::default()
        };
        let r = check_pseudo_reward_unbiasedness(&cfg).unwrap();
        assert!(r.passed, "{}", r.summary_text());
    }

    #[test]
    fn welford_matches_direct() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 4.0, 7.0] {
            m.push(x);
        }
        assert!((m.mean - 3.5).abs() < 1e-15);
        assert!((m.m2 / 3.0 - 7.0).abs() < 1e-12);
    }
}
