//! Cross-module properties: Gram monotonicity, SupLinUCB bookkeeping and
//! context independence across rounds.

use hyran::bandit::{sample_hybridization, BanditState, ContextSet, HyRanConfig};
use hyran::baselines::{level_count, SupDecision, SupLinUcb};
use hyran::environment::{gen_contexts, EnvironmentSpec};
use hyran::policy::Policy;
use hyran::rng::stream;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::Rng;

fn min_eigenvalue(m: &nalgebra::DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// `V_t - V_{t-1}` is a sum of outer products, so it stays PSD, and the
    /// subsample count never exceeds the round counter.
    #[test]
    fn gram_grows_in_loewner_order(
        d in 1usize..5,
        n in 2usize..6,
        p in 0.05f64..0.95,
        seed in any::<u64>(),
        rounds in 1usize..40,
    ) {
        let mut rng = stream(&[seed]);
        let mut state = BanditState::new(d, n, HyRanConfig::new(p)).unwrap();
        for _ in 0..rounds {
            let data: Vec<f64> = (0..d * n).map(|_| rng.gen_range(-1.0..1.0) / (d as f64).sqrt()).collect();
            let ctx = ContextSet::new(d, n, data, state.round() + 1).unwrap();
            let chosen = rng.gen_range(0..n);
            let h = sample_hybridization(chosen, state.hybridization(), &mut rng).unwrap();
            let before = state.gram().clone();
            state.update(&ctx, chosen, h, rng.gen_range(-1.0..1.0)).unwrap();
            let diff = state.gram() - &before;
            prop_assert!(min_eigenvalue(&diff) >= -1e-10);
            prop_assert!(min_eigenvalue(state.gram()) >= 1.0 - 1e-10);
            prop_assert!(state.psi_count() <= state.round());
            prop_assert!(state.estimate(1.0).unwrap().iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn suplinucb_levels_partition_recorded_rounds() {
    let spec = EnvironmentSpec::correlated_gaussian(3, 5);
    let mut rng = stream(&[17, 0]);
    let env = spec.instantiate(&mut rng).unwrap();
    let horizon = 600;
    let mut policy = SupLinUcb::new(3, 0.5, horizon).unwrap();
    assert_eq!(policy.num_levels(), level_count(horizon));
    for t in 1..=horizon {
        let ctx = env.contexts(t, &mut rng).unwrap();
        let arm = policy.select(&ctx).unwrap();
        let y = env.reward(ctx.arm(arm), &mut rng);
        policy.observe(&ctx, arm, y).unwrap();
    }
    let decisions = policy.decisions();
    assert_eq!(decisions.len(), horizon as usize);
    let mut recorded = vec![0usize; policy.num_levels()];
    for d in decisions {
        if let SupDecision::Recorded { level } = d {
            assert!((1..=policy.num_levels()).contains(level));
            recorded[level - 1] += 1;
        }
    }
    // each level's Gram is the identity plus exactly its recorded rounds
    for (s, &k) in recorded.iter().enumerate() {
        let g = policy.level(s + 1).gram();
        let trace = g.trace() - 3.0;
        if k == 0 {
            assert!(trace.abs() < 1e-12);
        } else {
            assert!(trace > 0.0 && trace <= k as f64 + 1e-9, "level {}: trace {trace}, {k} rounds", s + 1);
        }
    }
    assert!(recorded[0] > 0);
}

#[test]
fn contexts_are_independent_across_rounds() {
    let spec = EnvironmentSpec::correlated_gaussian(3, 4);
    let mut rng = stream(&[5]);
    let rounds = 4000;
    let series: Vec<f64> = (1..=rounds)
        .map(|t| gen_contexts(&spec, t, &mut rng).unwrap().arm(0)[0])
        .collect();
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let lag1 = series.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / ((n - 1.0) * var);
    assert!(lag1.abs() < 4.0 / n.sqrt(), "lag-1 autocorrelation {lag1}");
}

#[test]
fn contexts_stay_in_unit_ball() {
    let spec = EnvironmentSpec::correlated_gaussian(5, 10);
    let mut rng = stream(&[9]);
    for t in 1..=500 {
        let ctx = gen_contexts(&spec, t, &mut rng).unwrap();
        for x in ctx.iter() {
            assert!(x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0 + 1e-12);
        }
    }
}
