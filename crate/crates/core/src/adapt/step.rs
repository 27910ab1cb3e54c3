use nalgebra::DVector;

use super::bounds::{nu_final_bound_single, nu_final_bounds_multi, sampled_target, top_derivative};
use super::controller::{solve_controller, CbfController, ControlSolution};
use super::{AdaptError, AdaptationConfig};
use crate::hocbf::derived_barriers;
use crate::model::ClassKChain;

/// Result of one sampled-data adaptation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub control: ControlSolution,
    /// Slopes for the next sample.
    pub chains: Vec<ClassKChain>,
    /// Predicted state at `t + Δt` used to size the update.
    pub predicted: DVector<f64>,
    /// Number of top derivatives that hit the clamp.
    pub clamped: usize,
}

/// One step of the pointwise-feasible update: solve the QP at `t`, predict
/// the next sample under the chosen input, then move each slope to the
/// larger of its desired value and `k_margin` times its feasibility bound,
/// lower levels first so higher levels see the updated derivatives.
pub fn rtcbf_step(
    ctrl: &CbfController,
    chains: &[ClassKChain],
    t: f64,
    x: &DVector<f64>,
    config: &AdaptationConfig,
) -> Result<StepOutcome, AdaptError> {
    config.validate()?;
    if config.policies.len() != chains.len() {
        return Err(AdaptError::Config(format!("{} policy lists for {} barriers", config.policies.len(), chains.len())));
    }
    for (i, (p, c)) in config.policies.iter().zip(chains).enumerate() {
        if p.len() != c.relative_degree() {
            return Err(AdaptError::Config(format!("barrier {i}: {} policies for {} levels", p.len(), c.relative_degree())));
        }
    }

    let control = solve_controller(ctrl, chains, t, x)?;
    let dt = config.dt;
    let t1 = t + dt;
    let x1 = ctrl.system.rk4(t, x, &control.u, dt);
    if x1.iter().any(|v| !v.is_finite()) {
        return Err(AdaptError::Domain("predicted state is not finite".into()));
    }

    let mut next: Vec<ClassKChain> = chains.to_vec();
    let mut clamped = 0;
    let mut advance = |chain: &mut ClassKChain, level: usize, target: f64| -> Result<(), AdaptError> {
        let w = top_derivative(chain.stack(level), target, dt, config.derivative_limit);
        if w.abs() >= config.derivative_limit {
            clamped += 1;
        }
        chain.advance_level(level, w, dt)?;
        Ok(())
    };

    // Non-top levels, cascaded.
    for (i, barrier) in ctrl.barriers.iter().enumerate() {
        let r = next[i].relative_degree();
        for level in 0..r - 1 {
            let stack = derived_barriers(barrier.as_ref(), &next[i], t1, &x1)?;
            let nu_d = config.policies[i][level].desired(chains[i].nu(level), dt);
            let target = sampled_target(stack.psi(level), stack.psi_dot(level), nu_d, config.k_margin)?;
            advance(&mut next[i], level, target)?;
        }
    }

    // Top levels against the input set.
    let tops = ctrl.stacks(&next, t1, &x1)?;
    let bounds = if config.joint_top_bounds {
        let refs: Vec<_> = tops.iter().collect();
        nu_final_bounds_multi(&refs, ctrl.system.inputs())?
    } else {
        tops.iter().map(|s| nu_final_bound_single(s, ctrl.system.inputs())).collect::<Result<Vec<_>, _>>()?
    };
    for (i, bound) in bounds.into_iter().enumerate() {
        let top = next[i].relative_degree() - 1;
        let nu_d = config.policies[i][top].desired(chains[i].nu(top), dt);
        let target = (config.k_margin * bound).max(nu_d);
        advance(&mut next[i], top, target)?;
    }

    Ok(StepOutcome { control, chains: next, predicted: x1, clamped })
}
