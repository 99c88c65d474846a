//! Linear contextual bandits with hybridization-by-randomization (HyRan)
//! estimation.
//!
//! The crate is organized bottom-up:
//!
//! - [`bandit`]: the hybrid estimator state, pseudo-rewards, imputation
//!   estimators and the HyRan policy.
//! - [`baselines`]: LinUCB, LinTS, SupLinUCB and an experimental DRTS.
//! - [`environment`]: synthetic context/reward generators and regret.
//! - [`diagnostics`]: Monte-Carlo checks of the estimator's guarantees.
//! - [`harness`]: trajectories, grid search, CSV and SVG output.
//!
//! Independent trajectories run concurrently through [`exec::Execution`];
//! build without the default `parallel` feature to force serial execution.

pub mod bandit;
pub mod baselines;
pub mod diagnostics;
pub mod environment;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod policy;
pub mod rng;

pub use error::{BanditError, Result};
