//! Numerical toolkit for the extremes of stationary Gaussian storage processes
//!
//! The storage (workload) process driven by a centered Gaussian input `X` with
//! stationary increments is
//!
//! ```text
//! Q(t) = sup_{s >= t} ( X(s) - X(t) - c (s - t)^beta )
//! ```
//!
//! This crate evaluates the exact tail asymptotics of `P(sup_{[0,T_u]} Q > u)`
//! and `P(inf_{[0,T_u]} Q > u)`, simulates `Q` by exact Gaussian path sampling,
//! and estimates the (generalized) Pickands constants entering the asymptotic
//! formulas.
//!
//! Module map:
//!
//! - [`variance`]: variance functions `sigma^2(t)` (sums of independent fBm).
//! - [`asymptotics`]: regime classification, critical constants, finite-`u`
//!   solvers and the tail formula evaluators.
//! - [`paths`]: exact path samplers (circulant embedding, dense factorization).
//! - [`storage`]: storage-process Monte Carlo and strong-Piterbarg diagnostics.
//! - [`pickands`]: Monte Carlo estimators of Pickands-type constants.

pub mod asymptotics;
pub mod error;
pub mod optimize;
pub mod paths;
pub mod pickands;
pub mod rng;
pub mod stats;
pub mod storage;
pub mod variance;

pub use error::{Error, Result};
pub use variance::{ModelKind, VarianceModel};
