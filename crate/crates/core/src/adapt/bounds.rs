use nalgebra::{DMatrix, DVector};

use super::AdaptError;
use crate::hocbf::DerivedBarrierStack;
use crate::model::InputPolytope;
use crate::optim::{solve_lp, LinearProgram, LpOutcome};

/// Bounds `−ψ̇/ψ` beyond this are treated as divergent.
pub const MAX_BOUND_RATIO: f64 = 1e6;

fn ratio(psi: f64, psi_dot: f64) -> Result<f64, AdaptError> {
    if !psi.is_finite() || !psi_dot.is_finite() || psi <= 0.0 {
        return Err(AdaptError::SingularBoundary { psi, psi_dot });
    }
    let r = -psi_dot / psi;
    if r > MAX_BOUND_RATIO {
        return Err(AdaptError::SingularBoundary { psi, psi_dot });
    }
    Ok(r)
}

/// Smallest admissible slope `max(−ψ̇/ψ, 0)` for a non-top level.
pub fn nu_inner_bound(psi: f64, psi_dot: f64) -> Result<f64, AdaptError> {
    Ok(ratio(psi, psi_dot)?.max(0.0))
}

/// `max(−k·ψ̇/ψ, ν_d)` evaluated at the predicted next sample.
pub fn sampled_target(psi: f64, psi_dot: f64, nu_d: f64, k_margin: f64) -> Result<f64, AdaptError> {
    Ok((k_margin * ratio(psi, psi_dot)?).max(nu_d))
}

/// Top derivative of a pure integrator chain that lands the slope on `target`
/// after `dt`, clamped to `±limit`.
///
/// `stack` holds `ν, ν̇, …` (its length is the chain order `p`).
pub fn top_derivative(stack: &[f64], target: f64, dt: f64, limit: f64) -> f64 {
    let p = stack.len();
    let mut drift = 0.0;
    let mut coef = 1.0;
    for (j, &v) in stack.iter().enumerate() {
        if j > 0 {
            coef *= dt / j as f64;
        }
        drift += v * coef;
    }
    // p!/dt^p
    let gain = (1..=p).fold(1.0, |acc, j| acc * j as f64 / dt);
    let raw = gain * (target - drift);
    if raw.abs() > limit {
        log::debug!("top derivative {raw:.3e} clamped to ±{limit:.1e}");
    }
    raw.clamp(-limit, limit)
}

/// `max(−sup_{u∈𝒰} ψ̇^{r−1}(u) / ψ^{r−1}, 0)` for a single barrier.
pub fn nu_final_bound_single(stack: &DerivedBarrierStack, inputs: &InputPolytope) -> Result<f64, AdaptError> {
    let sup = inputs.sup(stack.input())?.ok_or_else(|| AdaptError::Config("input polytope is unbounded".into()))?;
    Ok(ratio(stack.top(), stack.drift() + sup)?.max(0.0))
}

/// Jointly minimal top-level slopes: `min Σν_i` s.t. `ψ̇_i(u) ≥ −ν_i ψ_i`,
/// `ν ≥ 0`, `u ∈ 𝒰`.
pub fn nu_final_bounds_multi(stacks: &[&DerivedBarrierStack], inputs: &InputPolytope) -> Result<Vec<f64>, AdaptError> {
    let n = stacks.len();
    let m = inputs.dim();
    for s in stacks {
        if s.input().len() != m {
            return Err(AdaptError::Config("barrier input row does not match the input set".into()));
        }
        if !(s.top() > 0.0) {
            return Err(AdaptError::SingularBoundary { psi: s.top(), psi_dot: s.drift() });
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // Variables (ν_1..ν_n, u).
    let q = inputs.a().nrows();
    let mut g = DMatrix::zeros(n + q, n + m);
    let mut w = DVector::zeros(n + q);
    for (i, s) in stacks.iter().enumerate() {
        // −ψ_i ν_i − B_i u ≤ a_i
        g[(i, i)] = -s.top();
        for j in 0..m {
            g[(i, n + j)] = -s.input()[j];
        }
        w[i] = s.drift();
    }
    g.view_mut((n, n), (q, m)).copy_from(inputs.a());
    w.rows_mut(n, q).copy_from(inputs.b());
    let mut cost = DVector::zeros(n + m);
    cost.rows_mut(0, n).fill(1.0);
    let mut lower = vec![0.0; n];
    lower.extend(std::iter::repeat_n(f64::NEG_INFINITY, m));
    let upper = vec![f64::INFINITY; n + m];
    let lp = LinearProgram::new(cost, g, w)?.with_bounds(lower, upper)?;
    match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => {
            let out: Vec<f64> = (0..n).map(|i| sol.z[i].max(0.0)).collect();
            for (i, &v) in out.iter().enumerate() {
                if v > MAX_BOUND_RATIO {
                    return Err(AdaptError::SingularBoundary { psi: stacks[i].top(), psi_dot: -v * stacks[i].top() });
                }
            }
            Ok(out)
        }
        LpOutcome::Infeasible => Err(AdaptError::Config("input polytope is empty".into())),
        LpOutcome::Unbounded => unreachable!("objective is bounded below by zero"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hocbf::derived_barriers_from_jet;
    use crate::model::{BarrierJet, ClassKChain};
    use approx::assert_abs_diff_eq;

    fn first_order(h: f64, a: f64, b: f64) -> DerivedBarrierStack {
        let jet = BarrierJet { derivatives: vec![h], drift: a, input: DVector::from_vec(vec![b]) };
        derived_barriers_from_jet(&jet, &ClassKChain::new(&[1.0], 0.0).unwrap()).unwrap()
    }

    fn unit_box() -> InputPolytope {
        InputPolytope::symmetric(&[1.0]).unwrap()
    }

    #[test]
    fn inner_bound_examples() {
        assert_abs_diff_eq!(nu_inner_bound(2.0, -1.0).unwrap(), 0.5);
        assert_eq!(nu_inner_bound(2.0, 3.0).unwrap(), 0.0);
        assert!(matches!(nu_inner_bound(1e-9, -1.0), Err(AdaptError::SingularBoundary { .. })));
        assert!(matches!(nu_inner_bound(0.0, 1.0), Err(AdaptError::SingularBoundary { .. })));
        // Tiny but well-conditioned ratio stays regular.
        assert_abs_diff_eq!(nu_inner_bound(1e-12, -5e-13).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn sampled_target_examples() {
        assert_abs_diff_eq!(sampled_target(2.0, -1.0, 0.3, 1.2).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(sampled_target(2.0, 1.0, 0.3, 1.2).unwrap(), 0.3);
        assert_eq!(sampled_target(2.0, -1.0, 0.8, 1.2).unwrap(), 0.8);
        assert!(sampled_target(-1.0, 0.0, 0.3, 1.2).is_err());
    }

    #[test]
    fn top_derivative_examples() {
        assert_abs_diff_eq!(top_derivative(&[0.5], 0.6, 0.05, 1e3), 2.0, epsilon = 1e-12);
        assert_eq!(top_derivative(&[0.7, 0.0], 0.7, 0.1, 1e3), 0.0);
        assert_abs_diff_eq!(top_derivative(&[1.0, 1.0], 1.0, 0.1, 1e3), -20.0, epsilon = 1e-12);
        assert_eq!(top_derivative(&[0.0], 100.0, 0.01, 1e3), 1e3);
    }

    #[test]
    fn unclamped_top_derivative_reaches_target() {
        let stack = [0.4, -0.3, 0.2];
        let w = top_derivative(&stack, 0.55, 0.02, 1e6);
        let mut chain = ClassKChain::from_stacks(vec![stack.to_vec(), vec![1.0, 0.0], vec![1.0]], 0.0, f64::INFINITY).unwrap();
        chain.advance_level(0, w, 0.02).unwrap();
        assert_abs_diff_eq!(chain.nu(0), 0.55, epsilon = 1e-12);
    }

    #[test]
    fn single_bound_examples() {
        assert_abs_diff_eq!(nu_final_bound_single(&first_order(2.0, -2.0, 1.0), &unit_box()).unwrap(), 0.5);
        assert_eq!(nu_final_bound_single(&first_order(2.0, 0.5, 1.0), &unit_box()).unwrap(), 0.0);
        assert_abs_diff_eq!(nu_final_bound_single(&first_order(1.0, -3.0, 0.0), &unit_box()).unwrap(), 3.0);
        assert!(nu_final_bound_single(&first_order(0.0, -3.0, 0.0), &unit_box()).is_err());
    }

    #[test]
    fn multi_bound_examples() {
        let a = first_order(1.0, 0.0, 1.0);
        let b = first_order(1.0, 0.0, -1.0);
        assert_eq!(nu_final_bounds_multi(&[&a, &b], &unit_box()).unwrap(), vec![0.0, 0.0]);

        // ψ̇₁ = u − 2 alone: ν₁ = 1 at u = 1.
        let shifted = first_order(1.0, -2.0, 1.0);
        let v = nu_final_bounds_multi(&[&shifted], &unit_box()).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0], nu_final_bound_single(&shifted, &unit_box()).unwrap(), epsilon = 1e-12);

        // With ψ̇₂ = −u alongside, every u ∈ [0, 1] costs ν₁ + ν₂ = 2.
        let v = nu_final_bounds_multi(&[&shifted, &b], &unit_box()).unwrap();
        assert_abs_diff_eq!(v[0] + v[1], 2.0, epsilon = 1e-12);
    }
}
