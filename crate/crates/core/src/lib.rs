//! Rank-2 factorized solver for the diagonally-constrained SDP
//! `max Tr(AX), X ⪰ 0, X_ii = 1`, specialized to sign-recovery problems.
//!
//! Instead of solving the SDP in the `n×n` matrix variable, the search is
//! carried out over `X = QQ^T` with `Q` an `n×2` matrix of unit rows — a
//! product of `n` circles. A Riemannian trust-region method drives `Q` to a
//! second-order critical point, and a dual matrix built from the solution
//! certifies (when possible) that the point is a global SDP optimum.
//!
//! The crate also ships generators for the two noise models this approach is
//! typically run on (a spiked Gaussian matrix and the two-community random
//! graph), rounding estimators, small-`n` brute-force oracles, and a sweep
//! harness that measures recovery statistics over seeded trials.
//!
//! Module map:
//! - [`spectral`]: matrix-free symmetric operators and eigen primitives
//! - [`circle`]: geometry and calculus of the unit-row feasible set
//! - [`solver`]: trust-region solver (rank 2 and rank p) with multistart
//! - [`certify`]: optimality certificates and SDP value bracketing
//! - [`models`]: seeded random instance generators and tail diagnostics
//! - [`recover`]: correlation metrics, rounding, spectral baseline
//! - [`oracle`]: exhaustive references for small instances
//! - [`harness`]: experiment configs, sweeps, CSV/JSON result emission

pub mod certify;
pub mod circle;
pub mod harness;
pub mod models;
pub mod oracle;
pub mod recover;
pub mod solver;
pub mod spectral;

mod error;

pub use error::{Error, Result};
