//! Small dense QP/LP solvers sized for per-sample safety filters.
//!
//! Controller problems here have at most a handful of decision variables and
//! a few dozen rows, so everything is dense and exact: a dual active-set QP
//! method (with an active-set enumeration fallback), a two-phase tableau
//! simplex with Bland's rule, and the closed-form single-constraint CBF-QP.

mod analytic;
mod lp;
mod qp;

pub use analytic::{analytic_cbf_qp, AnalyticVariant};
pub use lp::{solve_lp, LinearProgram, LpOutcome, LpSolution};
pub use qp::{solve_qp, FarkasCertificate, KktResiduals, QpOutcome, QpSolution, QuadraticProgram};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data in {0}")]
    NonFinite(&'static str),
    #[error("hessian is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("hessian is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("hessian is ill-conditioned (condition number {0:.3e} > 1e12)")]
    IllConditioned(f64),
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("constraint is infeasible: input has no effect and the margin {margin:.6e} is negative")]
    Infeasible { margin: f64 },
}
