use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::adapt::AdaptError;
use crate::hocbf::LinearConstraintRow;
use crate::model::InputPolytope;
use crate::optim::{solve_lp, LinearProgram, LpOutcome};

/// Shaping constants of the trust metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustParams {
    /// Margin scale in `ρ_m = tanh(β m)`.
    #[serde(default = "TrustParams::default_beta")]
    pub beta: f64,
    /// Margin score below which a neighbor is distrusted.
    #[serde(default = "TrustParams::default_rho_bar")]
    pub rho_bar: f64,
    /// Slope of `α̇ = gain·ρ`.
    #[serde(default = "TrustParams::default_gain")]
    pub gain: f64,
}

impl TrustParams {
    fn default_beta() -> f64 {
        1.0
    }
    fn default_rho_bar() -> f64 {
        0.2
    }
    fn default_gain() -> f64 {
        0.5
    }
}

impl Default for TrustParams {
    fn default() -> Self {
        Self { beta: 1.0, rho_bar: 0.2, gain: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustScore {
    pub margin: f64,
    pub rho_m: f64,
    pub rho_gamma: f64,
    pub rho: f64,
}

impl TrustScore {
    /// Score used when the ego cannot satisfy its constraints or the margin is negative.
    pub fn distrust(margin: f64) -> Self {
        Self { margin, rho_m: 0.0, rho_gamma: 0.0, rho: -1.0 }
    }
}

/// Neighbor halfspace `A·ẏ_j ≥ B` and its margin `m = A·ẏ_j − B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: DVector<f64>,
    pub b: f64,
    pub margin: f64,
}

/// Largest `objective·u` over the input set subject to `other_rows`.
///
/// `None` when those rows leave no admissible input.
pub fn best_case_ego(
    objective: &DVector<f64>,
    other_rows: &[LinearConstraintRow],
    inputs: &InputPolytope,
) -> Result<Option<f64>, AdaptError> {
    let m = inputs.dim();
    if objective.len() != m {
        return Err(AdaptError::Config(format!("objective has {} entries for {m} inputs", objective.len())));
    }
    if objective.iter().all(|&c| c == 0.0) && other_rows.is_empty() {
        return Ok(Some(0.0));
    }
    let rows = other_rows.len() + inputs.a().nrows();
    let mut g = DMatrix::zeros(rows, m);
    let mut w = DVector::zeros(rows);
    for (i, r) in other_rows.iter().enumerate() {
        let (gi, wi) = r.as_le();
        g.row_mut(i).copy_from(&gi.rows(0, m).transpose());
        w[i] = wi;
    }
    let off = other_rows.len();
    g.view_mut((off, 0), (inputs.a().nrows(), m)).copy_from(inputs.a());
    w.rows_mut(off, inputs.b().len()).copy_from(inputs.b());
    let lp = LinearProgram::new(-objective, g, w)?;
    Ok(match solve_lp(&lp)? {
        LpOutcome::Optimal(s) => Some(-s.objective),
        LpOutcome::Infeasible => None,
        LpOutcome::Unbounded => return Err(AdaptError::Domain("best-case ego LP is unbounded".into())),
    })
}

/// `A = ∂ψ/∂y_j`, `B = −νψ − (∂ψ/∂ν)ν̇ − best_case`, margin at the observed rate.
pub fn neighbor_halfspace_and_margin(
    a: &DVector<f64>,
    class_k_term: f64,
    parameter_part: f64,
    best_case: f64,
    neighbor_rate: &DVector<f64>,
) -> Halfspace {
    let b = -class_k_term - parameter_part - best_case;
    Halfspace { a: a.clone(), b, margin: a.dot(neighbor_rate) - b }
}

fn angle(u: &Vector2<f64>, v: &Vector2<f64>) -> Option<f64> {
    let n = u.norm() * v.norm();
    (n > 0.0).then(|| (u.dot(v) / n).clamp(-1.0, 1.0).acos())
}

/// Margin, belief and combined trust for one neighbor and one order.
///
/// `normal` is the velocity part of `A`; `belief` the expected direction of
/// the neighbor's motion.
pub fn trust_scores(
    margin: f64,
    belief: &Vector2<f64>,
    normal: &Vector2<f64>,
    velocity: &Vector2<f64>,
    beta: f64,
    rho_bar: f64,
) -> TrustScore {
    let rho_m = (beta * margin.max(0.0)).tanh();
    let neutral = 1.0f64.tanh();
    let rho_gamma = match (angle(belief, normal), angle(velocity, normal)) {
        (Some(gb), Some(gv)) if gv > 0.0 => (gb / gv).tanh(),
        (Some(gb), Some(_)) if gb > 0.0 => 1.0,
        _ => neutral,
    };
    TrustScore { margin, rho_m, rho_gamma, rho: combine_trust(rho_m, rho_gamma, rho_bar) }
}

/// Both branches of the combined score: `((ρ_m − ρ̄)ρ_γ, (ρ_m − ρ̄)(1 − ρ_γ))`.
pub fn trust_branches(rho_m: f64, rho_gamma: f64, rho_bar: f64) -> (f64, f64) {
    let d = rho_m - rho_bar;
    (d * rho_gamma, d * (1.0 - rho_gamma))
}

/// Upper branch when `ρ_m ≥ ρ̄`, lower branch otherwise, clamped to `[−1, 1]`.
pub fn combine_trust(rho_m: f64, rho_gamma: f64, rho_bar: f64) -> f64 {
    let (upper, lower) = trust_branches(rho_m, rho_gamma, rho_bar);
    let rho = if rho_m >= rho_bar { upper } else { lower };
    rho.clamp(-1.0, 1.0)
}

pub fn alpha_rate_from_trust(rho: f64, gain: f64) -> f64 {
    gain * rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hocbf::{RowTag, Sense};
    use approx::assert_abs_diff_eq;

    fn unit_box() -> InputPolytope {
        InputPolytope::symmetric(&[1.0]).unwrap()
    }

    #[test]
    fn best_case_without_neighbors_hits_corner() {
        let v = best_case_ego(&DVector::from_element(1, 1.0), &[], &unit_box()).unwrap();
        assert_abs_diff_eq!(v.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn best_case_zero_gradient() {
        let v = best_case_ego(&DVector::from_element(1, 0.0), &[], &unit_box()).unwrap();
        assert_eq!(v, Some(0.0));
    }

    #[test]
    fn best_case_respects_other_rows() {
        let row = LinearConstraintRow { row: DVector::from_element(1, 1.0), offset: 0.5, sense: Sense::Ge, tag: RowTag::Barrier(1) };
        let v = best_case_ego(&DVector::from_element(1, -1.0), std::slice::from_ref(&row), &unit_box()).unwrap();
        assert_abs_diff_eq!(v.unwrap(), -0.5, epsilon = 1e-12);
        let impossible = LinearConstraintRow { offset: 2.0, ..row };
        assert_eq!(best_case_ego(&DVector::from_element(1, 1.0), &[impossible], &unit_box()).unwrap(), None);
    }

    #[test]
    fn margin_examples() {
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let v = DVector::from_vec(vec![2.0, 0.0]);
        // B = 1 from class-K 0, parameter 0, best case −1.
        let hs = neighbor_halfspace_and_margin(&a, 0.0, 0.0, -1.0, &v);
        assert_eq!(hs.b, 1.0);
        assert_abs_diff_eq!(hs.margin, 1.0, epsilon = 1e-15);
        let on_plane = DVector::from_vec(vec![1.0, 5.0]);
        assert_abs_diff_eq!(neighbor_halfspace_and_margin(&a, 0.0, 0.0, -1.0, &on_plane).margin, 0.0, epsilon = 1e-15);
        let m2 = neighbor_halfspace_and_margin(&a, 0.0, 0.0, -1.0, &(v.clone() * 2.0)).margin;
        let m1 = hs.margin;
        assert_abs_diff_eq!(m2 - m1, a.dot(&v), epsilon = 1e-15);
    }

    #[test]
    fn combined_trust_branches() {
        let rho = |rho_m: f64, rho_bar: f64, rho_gamma: f64| {
            if rho_m >= rho_bar {
                (rho_m - rho_bar) * rho_gamma
            } else {
                (rho_m - rho_bar) * (1.0 - rho_gamma)
            }
        };
        assert_abs_diff_eq!(rho(0.8, 0.2, 0.5), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(rho(0.1, 0.2, 0.25), -0.075, epsilon = 1e-15);

        // Same values through the public function: pick m and angles to hit them.
        let b = Vector2::new(1.0, 0.0);
        let s = Vector2::new(0.0, 1.0);
        let m = 0.8f64.atanh();
        // γ_b = π/2; choose γ_v with tanh(γ_b/γ_v) = 0.5.
        let gv = std::f64::consts::FRAC_PI_2 / 0.5f64.atanh();
        let vel = Vector2::new(gv.sin(), gv.cos());
        let t = trust_scores(m, &b, &s, &vel, 1.0, 0.2);
        assert_abs_diff_eq!(t.rho_m, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(t.rho_gamma, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.rho, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn zero_margin_distrusts() {
        let t = trust_scores(0.0, &Vector2::new(1.0, 0.0), &Vector2::new(0.0, 1.0), &Vector2::new(1.0, 1.0), 1.0, 0.2);
        assert_eq!(t.rho_m, 0.0);
        assert!(t.rho <= 0.0);
        assert_abs_diff_eq!(t.rho, -0.2 * (1.0 - t.rho_gamma), epsilon = 1e-15);
    }

    #[test]
    fn stationary_neighbor_is_neutral() {
        let t = trust_scores(1.0, &Vector2::new(1.0, 0.0), &Vector2::new(0.0, 1.0), &Vector2::zeros(), 1.0, 0.2);
        assert_abs_diff_eq!(t.rho_gamma, 1.0f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn alpha_rate_is_linear() {
        assert_eq!(alpha_rate_from_trust(0.0, 0.5), 0.0);
        assert_eq!(alpha_rate_from_trust(1.0, 0.5), 0.5);
        assert_eq!(alpha_rate_from_trust(-1.0, 0.5), -0.5);
    }
}
