//! Online adaptation of class-K slopes: pointwise feasibility bounds, the
//! sampled-data update, the controller QP it protects, and response shaping.

mod bounds;
mod controller;
mod shaping;
mod step;

pub use bounds::{nu_final_bound_single, nu_final_bounds_multi, nu_inner_bound, sampled_target, top_derivative, MAX_BOUND_RATIO};
pub use controller::{solve_controller, CbfController, ControlSolution, ReferenceFn};
pub use shaping::{shape_alpha, shape_alpha_with, shape_nu, ProjectionRule};
pub use step::{rtcbf_step, StepOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hocbf::HocbfError;
use crate::model::ModelError;
use crate::optim::OptimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptError {
    /// The derived barrier reached the boundary, so the slope bound diverges.
    #[error("singular boundary: psi = {psi:.6e}, psi_dot = {psi_dot:.6e}")]
    SingularBoundary { psi: f64, psi_dot: f64 },
    /// No admissible input satisfies every constraint row.
    #[error("controller QP is infeasible")]
    Incompatible,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Hocbf(#[from] HocbfError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Why a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Incompatible,
    Boundary,
    Numerical,
}

impl AdaptError {
    pub fn failure_reason(&self) -> FailureReason {
        match self {
            AdaptError::Incompatible => FailureReason::Incompatible,
            AdaptError::SingularBoundary { .. } => FailureReason::Boundary,
            _ => FailureReason::Numerical,
        }
    }
}

/// Desired slope `ν_d` fed into the sampled-data target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesiredPolicy {
    Constant {
        value: f64,
    },
    /// Steer toward `nominal` at `gain·(nominal − ν)`, rate-limited to `±rate_limit`.
    Proportional {
        nominal: f64,
        gain: f64,
        rate_limit: f64,
    },
}

impl DesiredPolicy {
    /// `ν_d` one sample ahead given the current slope.
    pub fn desired(&self, current: f64, dt: f64) -> f64 {
        match *self {
            DesiredPolicy::Constant { value } => value.max(0.0),
            DesiredPolicy::Proportional { nominal, gain, rate_limit } => {
                let rate = (gain * (nominal - current)).clamp(-rate_limit, rate_limit);
                (current + dt * rate).max(0.0)
            }
        }
    }
}

/// Sampled-data adaptation settings shared by every barrier of a controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    /// Margin gain `k ≥ 1` applied to the pointwise bounds.
    pub k_margin: f64,
    /// Sampling period.
    pub dt: f64,
    /// Designed top derivatives are clamped to `±derivative_limit`.
    pub derivative_limit: f64,
    /// `policies[i][level]` for barrier `i`.
    pub policies: Vec<Vec<DesiredPolicy>>,
    /// Couple top-level bounds of all barriers through one LP instead of
    /// bounding each barrier against the whole input set separately.
    pub joint_top_bounds: bool,
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<(), AdaptError> {
        if !(self.k_margin >= 1.0) {
            return Err(AdaptError::Config(format!("k_margin must be >= 1, got {}", self.k_margin)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(AdaptError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.derivative_limit > 0.0) {
            return Err(AdaptError::Config("derivative_limit must be positive".into()));
        }
        Ok(())
    }
}
