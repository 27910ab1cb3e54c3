//! Plants, barriers, Lyapunov functions and class-K parameter chains.

mod barrier;
mod chain;
mod lyapunov;
mod system;

pub use barrier::{audit_barrier_jet, BarrierJet, BarrierSpec, JetAudit};
pub use chain::{integrate_theta_chain, ClassKChain};
pub use lyapunov::{LyapunovJet, LyapunovSpec};
pub use system::{ControlAffineSystem, Dynamics, InputPolytope};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("input polytope is empty")]
    EmptyPolytope,
    #[error("input polytope is unbounded along input {0}")]
    UnboundedPolytope(usize),
    #[error("invalid class-K chain: {0}")]
    InvalidChain(String),
    #[error(transparent)]
    Optim(#[from] crate::optim::OptimError),
}
