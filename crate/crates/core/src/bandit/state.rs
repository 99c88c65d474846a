//! Sufficient statistics of the hybrid estimator and their per-round update.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::context::ContextSet;
use super::hybrid::{compute_pseudo_rewards, HybridizationConfig, PseudoRewardVector};
use crate::error::{ensure_arg, BanditError, Result};
use crate::linalg::{add_outer, axpy, spd_solve_shifted, Solution, SolveMethod};

/// Which imputation estimator feeds the pseudo-rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ImputationMode {
    /// `(V_t + √t I)⁻¹ Z_t`.
    #[default]
    Practical,
    /// Ridge-imputed DR estimator with `γ_t = 4√2 N √(|Ψ_t| log(4t²/δ))`,
    /// built around the norm-clipped ridge estimate on selected pairs.
    Theory { delta: f64 },
}

/// Which imputation estimate enters the pseudo-rewards of round `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImputeTiming {
    /// The estimate refreshed at the end of round `t - 1`.
    #[default]
    Lagged,
    /// The round-`t` estimate. In practical mode this is the fixed point of
    /// `β̌ = (V_t + √t I)⁻¹ Z_t(β̌)`, which is linear in `β̌`; in theory mode the
    /// estimate does not depend on `Z_t` and is computed before `Z_t`.
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyRanConfig {
    pub p: f64,
    #[serde(default)]
    pub imputation: ImputationMode,
    #[serde(default)]
    pub timing: ImputeTiming,
}

impl HyRanConfig {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            imputation: ImputationMode::Practical,
            timing: ImputeTiming::Lagged,
        }
    }

    pub fn with_imputation(mut self, imputation: ImputationMode) -> Self {
        self.imputation = imputation;
        self
    }

    pub fn with_timing(mut self, timing: ImputeTiming) -> Self {
        self.timing = timing;
        self
    }
}

/// Accumulators for the theory-mode imputation estimator. Pseudo-rewards
/// inside it are linear in the plugged-in ridge estimate, so the DR sum over
/// `Ψ_t` is kept as `dr_gram · β_ridge + dr_ipw`.
#[derive(Debug, Clone)]
struct TheoryImputation {
    delta: f64,
    /// `Σ_{τ∈Ψ} Σᵢ (1 - 1(h=i)/πᵢ) xᵢxᵢᵀ`
    dr_gram: DMatrix<f64>,
    /// `Σ_{τ∈Ψ} x_h Y / π_h`
    dr_ipw: DVector<f64>,
    /// `Σ_{τ∉Ψ} x_a Y`
    outside_moment: DVector<f64>,
    selected_gram: DMatrix<f64>,
    selected_moment: DVector<f64>,
    /// Normalized ridge estimate from rounds `1..t-1`.
    ridge_prev: DVector<f64>,
}

impl TheoryImputation {
    fn new(d: usize, delta: f64) -> Self {
        Self {
            delta,
            dr_gram: DMatrix::zeros(d, d),
            dr_ipw: DVector::zeros(d),
            outside_moment: DVector::zeros(d),
            selected_gram: DMatrix::zeros(d, d),
            selected_moment: DVector::zeros(d),
            ridge_prev: DVector::zeros(d),
        }
    }

    fn normalized_ridge(&self) -> Result<(DVector<f64>, SolveMethod)> {
        let sol = spd_solve_shifted(&self.selected_gram, 1.0, &self.selected_moment)?;
        Ok((clip_to_unit_ball(sol.x), sol.method))
    }
}

/// `u / max(‖u‖₂, 1)`.
pub fn clip_to_unit_ball(u: DVector<f64>) -> DVector<f64> {
    let n = u.norm();
    if n > 1.0 {
        u / n
    } else {
        u
    }
}

/// What one call to [`BanditState::update`] did.
#[derive(Debug, Clone)]
pub struct RoundUpdate {
    pub round: u64,
    pub in_psi: bool,
    pub pseudo_rewards: Option<PseudoRewardVector>,
    /// Imputation estimate used inside the pseudo-rewards (`Ψ` rounds only).
    pub impute_used: Option<DVector<f64>>,
}

/// Hybrid Gram matrix `V_t` (initialized to `I`), moment vector `Z_t`, the
/// subsample count `|Ψ_t|` and the imputation estimate `β̌_t`.
#[derive(Debug, Clone)]
pub struct BanditState {
    dim: usize,
    hybrid: HybridizationConfig,
    config: HyRanConfig,
    v: DMatrix<f64>,
    z: DVector<f64>,
    t: u64,
    psi_count: u64,
    impute: DVector<f64>,
    theory: Option<TheoryImputation>,
    fallback_solves: u64,
}

impl BanditState {
    pub fn new(dim: usize, num_arms: usize, config: HyRanConfig) -> Result<Self> {
        ensure_arg!(dim >= 1, "dimension must be >= 1");
        let hybrid = HybridizationConfig::new(config.p, num_arms)?;
        let theory = match config.imputation {
            ImputationMode::Practical => None,
            ImputationMode::Theory { delta } => {
                ensure_arg!(
                    delta > 0.0 && delta < 1.0,
                    "delta must lie in (0, 1), got {delta}"
                );
                Some(TheoryImputation::new(dim, delta))
            }
        };
        Ok(Self {
            dim,
            hybrid,
            config,
            v: DMatrix::identity(dim, dim),
            z: DVector::zeros(dim),
            t: 0,
            psi_count: 0,
            impute: DVector::zeros(dim),
            theory,
            fallback_solves: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_arms(&self) -> usize {
        self.hybrid.num_arms()
    }

    pub fn hybridization(&self) -> &HybridizationConfig {
        &self.hybrid
    }

    pub fn config(&self) -> &HyRanConfig {
        &self.config
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn moments(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn psi_count(&self) -> u64 {
        self.psi_count
    }

    pub fn impute(&self) -> &DVector<f64> {
        &self.impute
    }

    /// Number of linear solves that needed the pseudo-inverse fallback.
    pub fn fallback_solves(&self) -> u64 {
        self.fallback_solves
    }

    /// `V_t + λ I`, the matrix the estimator inverts.
    pub fn regularized_gram(&self, lambda: f64) -> DMatrix<f64> {
        let mut m = self.v.clone();
        for i in 0..self.dim {
            m[(i, i)] += lambda;
        }
        m
    }

    /// `β̂ = (V + λ I)⁻¹ Z`.
    pub fn estimate(&self, lambda: f64) -> Result<DVector<f64>> {
        Ok(self.estimate_with_method(lambda)?.x)
    }

    pub fn estimate_with_method(&self, lambda: f64) -> Result<Solution> {
        ensure_arg!(
            lambda > 0.0 && lambda.is_finite(),
            "lambda must be positive, got {lambda}"
        );
        spd_solve_shifted(&self.v, lambda, &self.z)
    }

    /// Normalized ridge estimate on selected pairs of rounds `1..t-1`
    /// (theory mode only).
    pub fn normalized_ridge(&self) -> Option<&DVector<f64>> {
        self.theory.as_ref().map(|th| &th.ridge_prev)
    }

    fn solve(&mut self, a: &DMatrix<f64>, shift: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
        let sol = spd_solve_shifted(a, shift, b)?;
        if sol.method == SolveMethod::PseudoInverse {
            self.fallback_solves += 1;
        }
        Ok(sol.x)
    }

    /// Advance the state by one round.
    ///
    /// On `h == chosen` every arm's context enters `V` and `Z` through its
    /// pseudo-reward; otherwise only the played pair enters. The imputation
    /// estimate is refreshed at the end of the round in both branches.
    pub fn update(
        &mut self,
        contexts: &ContextSet,
        chosen: usize,
        h: usize,
        reward: f64,
    ) -> Result<RoundUpdate> {
        let n = self.num_arms();
        ensure_arg!(
            contexts.dim() == self.dim && contexts.num_arms() == n,
            "round has {}x{} contexts, state expects {}x{}",
            contexts.dim(),
            contexts.num_arms(),
            self.dim,
            n
        );
        ensure_arg!(chosen < n, "chosen arm {chosen} out of range");
        ensure_arg!(h < n, "hybridization arm {h} out of range");
        if !reward.is_finite() {
            return Err(BanditError::Numeric(format!("reward {reward} is not finite")));
        }

        let t = self.t + 1;
        let in_psi = h == chosen;
        let x_a = contexts.arm(chosen);
        let p = self.hybrid.p();

        let z_prev = self.z.clone();
        if in_psi {
            for x in contexts.iter() {
                add_outer(&mut self.v, x, 1.0);
            }
            self.psi_count += 1;
        } else {
            add_outer(&mut self.v, x_a, 1.0);
        }
        self.t = t;

        if let Some(th) = self.theory.as_mut() {
            let (ridge, method) = th.normalized_ridge()?;
            if method == SolveMethod::PseudoInverse {
                self.fallback_solves += 1;
            }
            th.ridge_prev = ridge;
            if in_psi {
                for x in contexts.iter() {
                    add_outer(&mut th.dr_gram, x, 1.0);
                }
                add_outer(&mut th.dr_gram, x_a, -1.0 / p);
                axpy(&mut th.dr_ipw, x_a, reward / p);
            } else {
                axpy(&mut th.outside_moment, x_a, reward);
            }
        }

        let mut update = RoundUpdate {
            round: t,
            in_psi,
            pseudo_rewards: None,
            impute_used: None,
        };
        if in_psi {
            let impute = match self.config.timing {
                ImputeTiming::Lagged => self.impute.clone(),
                ImputeTiming::Concurrent => match self.config.imputation {
                    ImputationMode::Practical => {
                        let mut m = self.v.clone();
                        for x in contexts.iter() {
                            add_outer(&mut m, x, -1.0);
                        }
                        add_outer(&mut m, x_a, 1.0 / p);
                        let mut rhs = z_prev;
                        axpy(&mut rhs, x_a, reward / p);
                        self.solve(&m, (t as f64).sqrt(), &rhs)?
                    }
                    ImputationMode::Theory { .. } => self.theory_imputation()?,
                },
            };
            let pseudo = compute_pseudo_rewards(
                contexts,
                chosen,
                h,
                reward,
                impute.as_slice(),
                &self.hybrid,
            )?;
            for (x, y) in contexts.iter().zip(&pseudo.values) {
                axpy(&mut self.z, x, *y);
            }
            update.pseudo_rewards = Some(pseudo);
            update.impute_used = Some(impute);
        } else {
            axpy(&mut self.z, x_a, reward);
        }

        self.impute = self.refresh_imputation()?;

        if let Some(th) = self.theory.as_mut() {
            add_outer(&mut th.selected_gram, x_a, 1.0);
            axpy(&mut th.selected_moment, x_a, reward);
        }
        Ok(update)
    }

    /// Imputation estimate `β̌_t` for the current round counter.
    pub fn refresh_imputation(&mut self) -> Result<DVector<f64>> {
        if self.t == 0 {
            return Ok(DVector::zeros(self.dim));
        }
        match self.config.imputation {
            ImputationMode::Practical => {
                let v = self.v.clone();
                let z = self.z.clone();
                self.solve(&v, (self.t as f64).sqrt(), &z)
            }
            ImputationMode::Theory { .. } => self.theory_imputation(),
        }
    }

    fn theory_imputation(&mut self) -> Result<DVector<f64>> {
        let th = self
            .theory
            .as_ref()
            .ok_or_else(|| BanditError::Internal("theory accumulators missing".into()))?;
        if self.psi_count == 0 {
            return Ok(DVector::zeros(self.dim));
        }
        let t = self.t as f64;
        let gamma = 4.0
            * std::f64::consts::SQRT_2
            * self.num_arms() as f64
            * (self.psi_count as f64 * (4.0 * t * t / th.delta).ln()).sqrt();
        let rhs = &th.dr_gram * &th.ridge_prev + &th.dr_ipw + &th.outside_moment;
        let sums = &self.v - DMatrix::<f64>::identity(self.dim, self.dim);
        self.solve(&sums, gamma, &rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ctx(v: &[Vec<f64>]) -> ContextSet {
        ContextSet::from_vectors(v, 1).unwrap()
    }

    #[test]
    fn ridge_branch_rank_one() {
        let mut s = BanditState::new(2, 2, HyRanConfig::new(0.5)).unwrap();
        let c = ctx(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let u = s.update(&c, 0, 1, 0.5).unwrap();
        assert!(!u.in_psi);
        assert_eq!(s.gram(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert_eq!(s.moments(), &DVector::from_vec(vec![0.5, 0.0]));
        assert_eq!(s.psi_count(), 0);
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn dr_branch_adds_all_arms() {
        let mut s = BanditState::new(2, 2, HyRanConfig::new(0.5)).unwrap();
        let c = ctx(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        s.update(&c, 1, 1, 0.3).unwrap();
        assert_eq!(s.gram(), &(DMatrix::identity(2, 2) * 2.0));
        assert_eq!(s.psi_count(), 1);
    }

    #[test]
    fn estimate_examples() {
        let s = BanditState::new(3, 2, HyRanConfig::new(0.5)).unwrap();
        assert_eq!(s.estimate(1.0).unwrap(), DVector::zeros(3));

        let mut s = BanditState::new(1, 2, HyRanConfig::new(0.5)).unwrap();
        s.v[(0, 0)] = 3.0;
        s.z[0] = 4.0;
        assert_abs_diff_eq!(s.estimate(1.0).unwrap()[0], 1.0, epsilon = 1e-15);
        assert!(s.estimate(0.0).is_err());
        s.z[0] = f64::INFINITY;
        assert!(matches!(s.estimate(1.0), Err(BanditError::Numeric(_))));
    }

    #[test]
    fn practical_imputation_after_one_round() {
        // V = I + xxᵀ, x = (1,0), Z = (1,0)  →  β̌ = (1/(2+1), 0)
        let mut s = BanditState::new(2, 2, HyRanConfig::new(0.5)).unwrap();
        let c = ctx(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        s.update(&c, 0, 1, 1.0).unwrap();
        assert_abs_diff_eq!(s.impute()[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.impute()[1], 0.0);
    }

    #[test]
    fn zero_rewards_give_zero_imputation_in_both_modes() {
        for mode in [
            ImputationMode::Practical,
            ImputationMode::Theory { delta: 0.1 },
        ] {
            let mut s = BanditState::new(2, 2, HyRanConfig::new(0.5).with_imputation(mode)).unwrap();
            let c = ctx(&[vec![0.6, 0.0], vec![0.0, 0.8]]);
            s.update(&c, 0, 0, 0.0).unwrap();
            s.update(&c, 1, 0, 0.0).unwrap();
            assert_eq!(s.moments(), &DVector::zeros(2));
            assert!(s.impute().norm() < 1e-15);
        }
    }

    #[test]
    fn theory_imputation_without_psi_rounds_is_zero() {
        let cfg = HyRanConfig::new(0.5).with_imputation(ImputationMode::Theory { delta: 0.1 });
        let mut s = BanditState::new(2, 2, cfg).unwrap();
        let c = ctx(&[vec![0.6, 0.0], vec![0.0, 0.8]]);
        s.update(&c, 0, 1, 1.5).unwrap();
        assert_eq!(s.psi_count(), 0);
        assert_eq!(s.impute(), &DVector::zeros(2));
    }

    #[test]
    fn clip_rule() {
        let u = DVector::from_vec(vec![0.0, 2.0]);
        assert_abs_diff_eq!(clip_to_unit_ball(u).norm(), 1.0, epsilon = 1e-15);
        let w = DVector::from_vec(vec![0.3, 0.4]);
        assert_eq!(clip_to_unit_ball(w.clone()), w);
    }

    #[test]
    fn theory_ridge_uses_previous_rounds_only() {
        let cfg = HyRanConfig::new(0.5).with_imputation(ImputationMode::Theory { delta: 0.1 });
        let mut s = BanditState::new(1, 2, cfg).unwrap();
        let c = ctx(&[vec![1.0], vec![0.5]]);
        s.update(&c, 0, 1, 4.0).unwrap();
        assert_eq!(s.normalized_ridge().unwrap()[0], 0.0);
        s.update(&c, 0, 1, 4.0).unwrap();
        // (1 + 1)⁻¹ · 4 = 2, clipped to 1
        assert_abs_diff_eq!(s.normalized_ridge().unwrap()[0], 1.0);
    }

    #[test]
    fn concurrent_practical_is_a_fixed_point() {
        let cfg = HyRanConfig::new(0.6).with_timing(ImputeTiming::Concurrent);
        let mut s = BanditState::new(2, 3, cfg).unwrap();
        let c = ctx(&[vec![0.6, 0.1], vec![-0.2, 0.8], vec![0.3, -0.3]]);
        s.update(&c, 1, 0, 0.4).unwrap();
        let u = s.update(&c, 2, 2, -0.7).unwrap();
        assert!(u.in_psi);
        let used = u.impute_used.unwrap();
        // β̌ used for Ỹ_t reproduces itself: (V_t + √t I)⁻¹ Z_t
        let again = spd_solve_shifted(s.gram(), 2f64.sqrt(), s.moments()).unwrap().x;
        assert!((used - again).norm() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_rounds() {
        let mut s = BanditState::new(2, 3, HyRanConfig::new(0.5)).unwrap();
        let c = ctx(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(s.update(&c, 0, 0, 1.0).is_err());
        let c3 = ctx(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(s.update(&c3, 3, 0, 1.0).is_err());
        assert!(s.update(&c3, 0, 0, f64::NAN).is_err());
    }
}
