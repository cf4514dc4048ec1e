//! Online decision-making and online statistical inference for the two-arm
//! low-rank matrix contextual bandit.
//!
//! The pipeline per step: observe a matrix context, act epsilon-greedily on
//! the factored SGD estimates, observe the reward, take the inverse-
//! propensity-weighted debiasing step and the renormalized factored SGD
//! step, and feed the plug-in variance accumulators. After n steps the
//! debiased running average is projected back to rank r and normal
//! confidence intervals are built for the configured linear forms.
//!
//! [`harness`] wires the modules into seeded, reproducible Monte Carlo
//! experiments with CSV/JSON export.

pub mod debias;
pub mod error;
pub mod harness;
pub mod inference;
pub mod init;
pub mod linalg;
pub mod model;
pub mod policy;
pub mod sgd;

pub use error::{Error, Result, TrialError};
pub use harness::{ExperimentConfig, TargetSpec};
