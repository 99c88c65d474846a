use super::{mean_se, DiagnosticReport, SeriesPoint};
use crate::environment::gen_hard_instance;
use crate::error::{ensure_arg, Result};
use crate::exec::Execution;
use crate::harness::{run_trajectory, AlgorithmKind, CellSpec, HyRanOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundConfig {
    pub algo: AlgorithmKind,
    pub hyper: f64,
    pub hyran: HyRanOptions,
    pub d: usize,
    pub n_arms: usize,
    pub horizon: u64,
    pub runs_per_instance: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        Self {
            algo: AlgorithmKind::HyRan,
            hyper: 0.5,
            hyran: HyRanOptions::default(),
            d: 4,
            n_arms: 4,
            horizon: 1024,
            runs_per_instance: 20,
            seed: 5,
            execution: Execution::Parallel,
        }
    }
}

impl LowerBoundConfig {
    /// `(1/8) √(dT)`.
    pub fn threshold(&self) -> f64 {
        (self.d as f64 * self.horizon as f64).sqrt() / 8.0
    }
}

/// Runs the algorithm on every member `βᵢ = Δeᵢ` of the hard family and
/// checks that the instance-averaged cumulative regret is at least
/// `(1/8)√(dT) - 2·SE`.
pub fn check_lower_bound(cfg: &LowerBoundConfig) -> Result<DiagnosticReport> {
    let hard = gen_hard_instance(cfg.d, cfg.n_arms, cfg.horizon)?;
    ensure_arg!(cfg.runs_per_instance >= 1, "need at least one run per instance");
    let mut cell = CellSpec::new(cfg.algo, cfg.hyper, hard.spec.clone(), cfg.horizon, cfg.seed);
    cell.hyran = cfg.hyran;
    let total = cfg.d * cfg.runs_per_instance;
    // repetition r plays instance r mod d
    let finals = cfg
        .execution
        .try_map_indexed(total, |r| run_trajectory(&cell, r).map(|tr| tr.final_regret()))?;

    let mut report = DiagnosticReport::new("lower-bound", total);
    let (mean, se) = mean_se(&finals);
    let threshold = cfg.threshold();
    report.statistic = mean;
    report.threshold = threshold - 2.0 * se;
    report.ci = (mean - 2.0 * se, mean + 2.0 * se);
    for i in 0..cfg.d {
        let per: Vec<f64> = finals.iter().skip(i).step_by(cfg.d).copied().collect();
        let (m, _) = mean_se(&per);
        report.push_metric(&format!("instance_{i}_mean_regret"), m);
        report.series.push(SeriesPoint {
            series: "instance_mean_regret".into(),
            t: i as u64,
            empirical: m,
            bound: threshold,
        });
    }
    report.push_metric("delta_gap", hard.delta_gap);
    report.push_metric("lower_bound", threshold);
    report.push_metric("uniform_policy_regret", hard.delta_gap * cfg.horizon as f64 * (1.0 - 1.0 / cfg.n_arms as f64));
    report.violations = usize::from(mean < report.threshold);
    report.passed = mean >= report.threshold;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::UniformRandom;
    use crate::harness::simulate;
    use crate::rng::stream;

    #[test]
    fn threshold_value() {
        assert_eq!(LowerBoundConfig::default().threshold(), 8.0);
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let cfg = LowerBoundConfig {
            d: 5,
            n_arms: 4,
            ..LowerBoundConfig::default()
        };
        assert!(check_lower_bound(&cfg).is_err());
    }

    #[test]
    fn single_round_instance_runs() {
        let cfg = LowerBoundConfig {
            d: 2,
            n_arms: 2,
            horizon: 1,
            runs_per_instance: 2,
            ..LowerBoundConfig::default()
        };
        let r = check_lower_bound(&cfg).unwrap();
        assert_eq!(r.trials, 4);
    }

    #[test]
    fn uniform_policy_matches_closed_form() {
        let (d, n, t) = (4, 4, 256u64);
        let hard = gen_hard_instance(d, n, t).unwrap();
        let expected = hard.delta_gap * t as f64 * (1.0 - 1.0 / n as f64);
        let mut finals = Vec::new();
        for rep in 0..400u64 {
            let env = hard.spec.with_beta(hard.betas[rep as usize % d].clone()).unwrap();
            let mut policy = UniformRandom::new(rep);
            let recs = simulate(&env, &mut policy, t, &mut stream(&[rep, 1]), &mut stream(&[rep, 2]), |_, _, _| Ok(()))
                .unwrap();
            finals.push(recs.last().unwrap().cum_regret);
        }
        let (m, se) = mean_se(&finals);
        assert!((m - expected).abs() < 4.0 * se, "{m} vs {expected} (se {se})");
    }
}
