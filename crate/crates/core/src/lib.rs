//! Kernel M-estimation of the psi-regression function when the response is
//! right-censored and the covariates form a stationary ergodic process.
//!
//! The censoring distribution is estimated by Kaplan-Meier ([`km`]), the
//! estimator solves a kernel-weighted, inverse-survival-weighted score
//! equation ([`estimator`]) and pointwise confidence intervals come from the
//! plug-in asymptotic variance. [`simulation`] reproduces the replication
//! studies and [`cli`] wraps everything in a command-line tool.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kernel_psi;
pub mod km;
pub mod simulation;

pub use error::{Error, Result};
pub use estimator::{
    ball_probability, confidence_interval, estimate_gamma1, estimate_m_hat, local_weights,
    nw_estimator, psi_score, psi_score_oracle, solve_m_estimator, CiResult, EstimatorConfig,
    LocalFit, ScoreValue, WeightedSample,
};
pub use kernel_psi::{KernelFamily, KernelSpec, PsiSpec};
pub use km::{CensoredObservation, KmFit};
