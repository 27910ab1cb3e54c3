use std::f64::consts::SQRT_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::AdaptError;

/// How the auxiliary input `u′` is formed when `L_g h·u_d < L_g h·u_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionRule {
    /// Minimizer of `‖u′ − u_d‖` s.t. `L_g h·u′ ≥ L_g h·u_r`:
    /// `u′ = u_d + L_g hᵀ L_g h (u_r − u_d)/‖L_g h‖²`.
    #[default]
    Exact,
    /// `u′ = u_d + (1/√2) L_g hᵀ L_g h (u_r − u_d)`, which coincides with `Exact`
    /// only when `‖L_g h‖² = √2`.
    Printed,
}

/// Value of `α` that brings the closed-form CBF-QP response closest to `u_d`.
pub fn shape_alpha(u_r: &DVector<f64>, u_d: &DVector<f64>, dh_dt: f64, lf_h: f64, lg_h: &DVector<f64>) -> f64 {
    shape_alpha_with(u_r, u_d, dh_dt, lf_h, lg_h, ProjectionRule::Exact)
}

pub fn shape_alpha_with(u_r: &DVector<f64>, u_d: &DVector<f64>, dh_dt: f64, lf_h: f64, lg_h: &DVector<f64>, rule: ProjectionRule) -> f64 {
    let norm = lg_h.norm();
    let base = -dh_dt - lf_h - lg_h.dot(u_r);
    if norm == 0.0 {
        return base;
    }
    let target = if lg_h.dot(u_d) >= lg_h.dot(u_r) {
        u_d.clone()
    } else {
        let gap = lg_h.dot(&(u_r - u_d));
        match rule {
            ProjectionRule::Exact => u_d + lg_h * (gap / (norm * norm)),
            ProjectionRule::Printed => u_d + lg_h * (gap / SQRT_2),
        }
    };
    SQRT_2 * lg_h.dot(&(u_r - target)) / norm + base
}

/// Linear-family slope realizing the shaped response, as `α/h` in closed form.
pub fn shape_nu(h: f64, dh_dt: f64, lf_h: f64, lg_h: &DVector<f64>, u_r: &DVector<f64>, u_d: &DVector<f64>) -> Result<f64, AdaptError> {
    if !(h > 0.0) {
        return Err(AdaptError::Domain(format!("h must be positive, got {h}")));
    }
    let norm = lg_h.norm();
    if norm == 0.0 {
        return Err(AdaptError::Domain("L_g h vanishes".into()));
    }
    Ok((SQRT_2 * lg_h.dot(&(u_r - u_d)) / norm - dh_dt + lf_h + lg_h.dot(u_d)) / h)
}
