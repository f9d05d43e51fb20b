//! Optimal dividend payout and investment for an insurance surplus with a
//! Black-Scholes risky asset.
//!
//! The pipeline solves the scale-like function `W`, builds barrier and band
//! candidates from it, certifies them against the HJB equation, and checks
//! them by Monte Carlo and by an independent finite-difference solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod barrier;
pub mod error;
pub mod exec;
pub mod gridfn;
pub mod model;
pub mod oracle;
pub mod simulate;
pub mod verify;
pub mod wsolve;

pub use bands::{band_search, classify, continuation_solve, find_touch, lambda_fn, two_band_search, Label};
pub use barrier::{argmin_wprime, barrier_value, optimal_barrier, Band, BandStructure, CandidateValue};
pub use error::{Error, Result};
pub use exec::Execution;
pub use gridfn::{Grid, GridFn};
pub use model::{ClaimDist, ModelParams};
pub use oracle::{policy_iteration_solve, OracleSolution};
pub use simulate::{estimate_value, simulate_path, SimConfig, SimReport, StrategySpec};
pub use verify::{certify, Certificate, CertifyOptions};
pub use wsolve::{solve_w, WSolution};
