//! Synthetic environments: the correlated-Gaussian context generator with a
//! duplicated coordinate, the basis-vector hard instance, Gaussian rewards
//! and ground-truth regret.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::bandit::ContextSet;
use crate::error::{ensure_arg, BanditError, Result};
use crate::linalg::{dot, norm2};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    CorrelatedGaussian,
    HardInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub kind: EnvKind,
    pub d: usize,
    pub n_arms: usize,
    /// Per-arm mean of every non-duplicated coordinate.
    pub means: Vec<f64>,
    /// Off-diagonal entry of the arm covariance; diagonal entries are 1.
    pub cross_corr: f64,
    pub noise_sigma: f64,
    /// Fixed parameter; when absent a fresh one is drawn per instance.
    #[serde(default)]
    pub beta_star: Option<Vec<f64>>,
    /// Reward gap `Δ` of the hard instance.
    #[serde(default)]
    pub delta_gap: Option<f64>,
}

/// `(-N, -N+2, ..., -2, 2, ..., N)` for even `N`; odd `N` puts a zero in the middle.
pub fn default_means(n_arms: usize) -> Vec<f64> {
    let half = n_arms / 2;
    let mut means: Vec<f64> = (0..half).map(|k| -2.0 * (half - k) as f64).collect();
    if n_arms % 2 == 1 {
        means.push(0.0);
    }
    means.extend((1..=half).map(|k| 2.0 * k as f64));
    means
}

/// `V(i,i) = 1`, `V(i,k) = rho`.
pub fn cross_covariance(n_arms: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n_arms, n_arms, |i, k| if i == k { 1.0 } else { rho })
}

impl EnvironmentSpec {
    /// The correlated-Gaussian setting used in the simulations: `σ = 1`,
    /// cross-arm correlation 0.5, symmetric arm means.
    pub fn correlated_gaussian(d: usize, n_arms: usize) -> Self {
        Self {
            kind: EnvKind::CorrelatedGaussian,
            d,
            n_arms,
            means: default_means(n_arms),
            cross_corr: 0.5,
            noise_sigma: 1.0,
            beta_star: None,
            delta_gap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.n_arms >= 2, "need at least two arms, got {}", self.n_arms);
        ensure_arg!(
            self.noise_sigma >= 0.0 && self.noise_sigma.is_finite(),
            "noise sigma must be >= 0"
        );
        if let Some(b) = &self.beta_star {
            ensure_arg!(b.len() == self.d, "beta_star has dimension {}, expected {}", b.len(), self.d);
            ensure_arg!(norm2(b) <= 1.0 + 1e-12, "beta_star must have norm <= 1");
        }
        match self.kind {
            EnvKind::CorrelatedGaussian => {
                if self.d < 2 {
                    return Err(BanditError::Unsupported(
                        "the duplicated-coordinate generator needs d >= 2".into(),
                    ));
                }
                ensure_arg!(
                    self.means.len() == self.n_arms,
                    "means has length {}, expected {}",
                    self.means.len(),
                    self.n_arms
                );
                let lower = -1.0 / (self.n_arms as f64 - 1.0);
                ensure_arg!(
                    self.cross_corr > lower && self.cross_corr < 1.0,
                    "cross correlation {} makes the covariance singular or indefinite",
                    self.cross_corr
                );
            }
            EnvKind::HardInstance => {
                ensure_arg!(
                    self.d >= 2 && self.d <= self.n_arms,
                    "hard instance needs 2 <= d <= N"
                );
                ensure_arg!(self.delta_gap.is_some(), "hard instance needs a gap");
            }
        }
        Ok(())
    }

    /// Draw the unknown parameter (or take the fixed one) and prepare sampling.
    pub fn instantiate(&self, rng: &mut StreamRng) -> Result<Environment> {
        self.validate()?;
        let beta_star = match &self.beta_star {
            Some(b) => b.clone(),
            None => gen_beta_star(self.d, rng),
        };
        self.with_beta(beta_star)
    }

    pub fn with_beta(&self, beta_star: Vec<f64>) -> Result<Environment> {
        self.validate()?;
        ensure_arg!(beta_star.len() == self.d, "beta_star dimension mismatch");
        let sampler = match self.kind {
            EnvKind::CorrelatedGaussian => {
                let cov = cross_covariance(self.n_arms, self.cross_corr);
                let l = cov
                    .cholesky()
                    .ok_or_else(|| {
                        BanditError::InvalidArgument("arm covariance is not positive definite".into())
                    })?
                    .l();
                ContextSampler::Gaussian {
                    mean: DVector::from_column_slice(&self.means),
                    chol: l,
                }
            }
            EnvKind::HardInstance => ContextSampler::Fixed(hard_instance_contexts(self.d, self.n_arms)?),
        };
        Ok(Environment {
            spec: self.clone(),
            beta_star,
            sampler,
        })
    }
}

#[derive(Debug, Clone)]
enum ContextSampler {
    Gaussian { mean: DVector<f64>, chol: DMatrix<f64> },
    Fixed(ContextSet),
}

/// One environment instance with its parameter fixed.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvironmentSpec,
    beta_star: Vec<f64>,
    sampler: ContextSampler,
}

impl Environment {
    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn beta_star(&self) -> &[f64] {
        &self.beta_star
    }

    pub fn contexts(&self, round: u64, rng: &mut StreamRng) -> Result<ContextSet> {
        match &self.sampler {
            ContextSampler::Gaussian { mean, chol } => {
                let raw = raw_gaussian_contexts(self.spec.d, mean, chol, rng);
                ContextSet::new(self.spec.d, self.spec.n_arms, truncate_contexts(raw, self.spec.d), round)
            }
            ContextSampler::Fixed(c) => Ok(c.clone().with_round(round)),
        }
    }

    pub fn reward(&self, x: &[f64], rng: &mut StreamRng) -> f64 {
        draw_reward(x, &self.beta_star, self.spec.noise_sigma, rng)
    }

    pub fn regret(&self, contexts: &ContextSet, arm: usize) -> f64 {
        instantaneous_regret(contexts, &self.beta_star, arm)
    }
}

/// Each coordinate iid uniform on `(-1/√d, 1/√d)`, so `‖β*‖₂ ≤ 1`.
pub fn gen_beta_star<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let bound = 1.0 / (d as f64).sqrt();
    let u = Uniform::new(-bound, bound);
    (0..d).map(|_| u.sample(rng)).collect()
}

/// Column-major `d x N` contexts before truncation: coordinates `0..d-1`
/// are `N(μ, V)` across arms, coordinate `d-1` of arm `i` copies a
/// uniformly chosen earlier coordinate of the same arm.
fn raw_gaussian_contexts<R: Rng + ?Sized>(
    d: usize,
    mean: &DVector<f64>,
    chol: &DMatrix<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let n = mean.len();
    let mut data = vec![0.0; d * n];
    for j in 0..d - 1 {
        let xi = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let draw = mean + chol * xi;
        for i in 0..n {
            data[i * d + j] = draw[i];
        }
    }
    for i in 0..n {
        let j = rng.gen_range(0..d - 1);
        data[i * d + d - 1] = data[i * d + j];
    }
    data
}

/// `x / max(1, ‖x‖₂)` for every arm.
fn truncate_contexts(mut data: Vec<f64>, d: usize) -> Vec<f64> {
    for x in data.chunks_exact_mut(d) {
        let n = norm2(x);
        if n > 1.0 {
            x.iter_mut().for_each(|v| *v /= n);
        }
    }
    data
}

/// One round of correlated-Gaussian contexts, before truncation.
pub fn gen_contexts_untruncated(spec: &EnvironmentSpec, rng: &mut StreamRng) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.kind != EnvKind::CorrelatedGaussian {
        return Err(BanditError::Unsupported(
            "only the correlated-Gaussian environment samples contexts".into(),
        ));
    }
    let l = cross_covariance(spec.n_arms, spec.cross_corr)
        .cholesky()
        .ok_or_else(|| BanditError::InvalidArgument("arm covariance is not positive definite".into()))?
        .l();
    Ok(raw_gaussian_contexts(
        spec.d,
        &DVector::from_column_slice(&spec.means),
        &l,
        rng,
    ))
}

pub fn gen_contexts(spec: &EnvironmentSpec, round: u64, rng: &mut StreamRng) -> Result<ContextSet> {
    let raw = gen_contexts_untruncated(spec, rng)?;
    ContextSet::new(spec.d, spec.n_arms, truncate_contexts(raw, spec.d), round)
}

/// `xᵀβ* + σ ξ`.
pub fn draw_reward<R: Rng + ?Sized>(x: &[f64], beta_star: &[f64], sigma: f64, rng: &mut R) -> f64 {
    let noise: f64 = rng.sample(StandardNormal);
    dot(x, beta_star) + sigma * noise
}

/// `maxᵢ xᵢᵀβ* − x_aᵀβ*`.
pub fn instantaneous_regret(contexts: &ContextSet, beta_star: &[f64], arm: usize) -> f64 {
    let scores = contexts.scores(beta_star);
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best - scores[arm]
}

/// `(e₁, ..., e_d, 0, ..., 0)` with `N` arms.
fn hard_instance_contexts(d: usize, n_arms: usize) -> Result<ContextSet> {
    let mut data = vec![0.0; d * n_arms];
    for i in 0..d {
        data[i * d + i] = 1.0;
    }
    ContextSet::new(d, n_arms, data, 1)
}

/// The lower-bound construction: fixed basis-vector contexts and the
/// parameter family `βᵢ = Δ eᵢ` with `Δ = ½ √(d/T)`.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub spec: EnvironmentSpec,
    pub contexts: ContextSet,
    pub delta_gap: f64,
    pub betas: Vec<Vec<f64>>,
}

pub fn gen_hard_instance(d: usize, n_arms: usize, horizon: u64) -> Result<HardInstance> {
    ensure_arg!(d >= 2 && d <= n_arms, "hard instance needs 2 <= d <= N (d={d}, N={n_arms})");
    ensure_arg!(
        4 * horizon >= d as u64,
        "hard instance needs T >= d/4 (d={d}, T={horizon})"
    );
    let delta_gap = 0.5 * (d as f64 / horizon as f64).sqrt();
    let spec = EnvironmentSpec {
        kind: EnvKind::HardInstance,
        d,
        n_arms,
        means: vec![0.0; n_arms],
        cross_corr: 0.0,
        noise_sigma: 1.0,
        beta_star: None,
        delta_gap: Some(delta_gap),
    };
    let betas = (0..d)
        .map(|i| {
            let mut b = vec![0.0; d];
            b[i] = delta_gap;
            b
        })
        .collect();
    Ok(HardInstance {
        contexts: hard_instance_contexts(d, n_arms)?,
        spec,
        delta_gap,
        betas,
    })
}

/// One round of a regret trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub arm: usize,
    pub h: Option<usize>,
    pub reward: f64,
    pub regret: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub algo: String,
    pub hyper_name: String,
    pub hyper_value: f64,
    pub seed: u64,
    pub d: usize,
    pub n_arms: usize,
    pub horizon: u64,
    pub rep: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cum_regret).collect()
    }
}
