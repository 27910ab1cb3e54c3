use nalgebra::DVector;

use super::OptimError;

/// Closed form of `min ‖u − u_r‖²` s.t. `∂h/∂t + L_f h + L_g h·u + α ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticVariant {
    /// Exact Euclidean projection onto the halfspace.
    #[default]
    Kkt,
    /// `u_r − (1/√2)(L_g hᵀ/‖L_g h‖)ψ¹`. Agrees with `Kkt` only when `‖L_g h‖ = √2`.
    Sqrt2Scaled,
}

pub fn analytic_cbf_qp(
    u_r: &DVector<f64>,
    dh_dt: f64,
    lf_h: f64,
    lg_h: &DVector<f64>,
    alpha: f64,
    variant: AnalyticVariant,
) -> Result<DVector<f64>, OptimError> {
    if u_r.len() != lg_h.len() {
        return Err(OptimError::Dimension(format!("u_r has {} entries, L_g h has {}", u_r.len(), lg_h.len())));
    }
    let psi1 = dh_dt + lf_h + lg_h.dot(u_r) + alpha;
    if !psi1.is_finite() || u_r.iter().chain(lg_h.iter()).any(|v| !v.is_finite()) {
        return Err(OptimError::NonFinite("analytic CBF-QP"));
    }
    if psi1 >= 0.0 {
        return Ok(u_r.clone());
    }
    let norm2 = lg_h.norm_squared();
    if norm2 == 0.0 {
        return Err(OptimError::Infeasible { margin: psi1 });
    }
    Ok(match variant {
        AnalyticVariant::Kkt => u_r - lg_h * (psi1 / norm2),
        AnalyticVariant::Sqrt2Scaled => u_r - lg_h * (psi1 / (std::f64::consts::SQRT_2 * norm2.sqrt())),
    })
}
