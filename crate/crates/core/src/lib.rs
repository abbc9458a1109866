//! Conformal representations of the three-sheeted genus-zero Riemann surface
//! glued along the real slits `[-mu, -1]` and `[1, lambda]`.
//!
//! The pipeline: [`solver::continuation_solve`] finds the critical points
//! `(alpha, a)` for a target `(lambda, mu)`, [`surface`] assembles the rational
//! map `G`, and [`maps::SurfaceMaps`] evaluates `G^{-1}` sheet by sheet and the
//! two conformal maps `psi1`, `psi2`. [`verify`] cross-checks everything.

// `!(x < y)` is used on purpose to reject NaN along with the failing case.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod maps;
pub mod numerics;
pub mod solver;
pub mod surface;
pub mod verify;

pub use maps::{
    Bank, BranchRegions, Extended, LaurentHead, MapError, Preimage, Psi, Sheet, SurfaceMaps,
    SurfacePoint,
};
pub use num_complex::Complex64;
pub use solver::{continuation_solve, continuation_solve_with_chart, SolverConfig, SolverError};
pub use surface::{
    normalize_intervals, AffineChart, CriticalPoints, IntervalPair, MapCoefficients, SurfaceError,
    SurfaceSolution,
};
pub use verify::{Check, Table1Row, VerificationReport};
