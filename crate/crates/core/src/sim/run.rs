use nalgebra::DVector;

use super::config::{ScenarioConfig, ScenarioKind};
use super::record::{Record, RunStatus, SampleStatus, SimLog};
use super::scenarios::{build_acc, build_corridor, SingleAgentSetup};
use super::SimError;
use crate::adapt::{rtcbf_step, solve_controller, AdaptationConfig, FailureReason};
use crate::model::{ClassKChain, ControlAffineSystem};

/// Advance the plant over one sample with the input held, using `substeps` RK4 steps.
pub fn step_plant(
    system: &ControlAffineSystem,
    t: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
    substeps: usize,
) -> Result<DVector<f64>, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::Config(format!("dt must be positive, got {dt}")));
    }
    let next = system.integrate(t, x, u, dt, substeps.max(1));
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(SimError::NonFinite { t: t + dt })
    }
}

/// Execute one configured scenario to the horizon or the first failure.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    cfg.validate()?;
    match &cfg.scenario {
        ScenarioKind::Acc(c) => Ok(run_single(cfg, build_acc(c, &cfg.adaptation)?)),
        ScenarioKind::Corridor(c) => Ok(run_single(cfg, build_corridor(c, &cfg.adaptation)?)),
        ScenarioKind::MultiAgent(m) => crate::multiagent::run_multi_agent(cfg, m),
    }
}

pub(crate) fn flat_nu(chains: &[ClassKChain]) -> Vec<f64> {
    chains.iter().flat_map(|c| (0..c.relative_degree()).map(move |k| c.nu(k))).collect()
}

fn run_single(cfg: &ScenarioConfig, setup: SingleAgentSetup) -> SimLog {
    let SingleAgentSetup { controller, mut chains, policies, x0, schema } = setup;
    let a = &cfg.adaptation;
    let adapt = AdaptationConfig {
        k_margin: a.k_margin,
        dt: cfg.dt,
        derivative_limit: a.derivative_limit,
        policies,
        joint_top_bounds: a.joint_top_bounds,
    };
    let m = controller.system.input_dim();
    let n_psi = schema.psi.len();
    let mut x = x0;
    let mut records = Vec::with_capacity(cfg.steps());
    let mut status = RunStatus::Completed;
    let barrier_values = |t: f64, x: &DVector<f64>| -> Vec<f64> { controller.barriers.iter().map(|b| b.jet(t, x).value()).collect() };

    for step in 0..cfg.steps() {
        let t = step as f64 * cfg.dt;
        let h = barrier_values(t, &x);
        let mut rec = Record {
            t,
            state: x.iter().copied().collect(),
            input: vec![f64::NAN; m],
            delta: f64::NAN,
            h: h.clone(),
            psi: vec![f64::NAN; n_psi],
            nu: flat_nu(&chains),
            trust: Vec::new(),
            status: SampleStatus::Ok,
        };
        if let Some(i) = h.iter().position(|&v| !(v > 0.0)) {
            rec.status = SampleStatus::Boundary;
            records.push(rec);
            status = RunStatus::Failure {
                reason: FailureReason::Boundary,
                t_fail: t,
                detail: format!("{} reached the boundary", schema.barriers[i]),
            };
            break;
        }
        let result = if a.enabled {
            rtcbf_step(&controller, &chains, t, &x, &adapt).map(|o| (o.control, Some(o.chains)))
        } else {
            solve_controller(&controller, &chains, t, &x).map(|c| (c, None))
        };
        match result {
            Ok((control, next)) => {
                rec.input = control.u.iter().copied().collect();
                rec.delta = control.delta;
                rec.psi = control.stacks.iter().flat_map(|s| s.values().iter().copied()).collect();
                records.push(rec);
                match step_plant(&controller.system, t, &x, &control.u, cfg.dt, cfg.substeps) {
                    Ok(next_x) => x = next_x,
                    Err(e) => {
                        status = RunStatus::Failure { reason: FailureReason::Numerical, t_fail: t + cfg.dt, detail: e.to_string() };
                        break;
                    }
                }
                if let Some(next) = next {
                    chains = next;
                }
            }
            Err(e) => {
                if let Ok(stacks) = controller.stacks(&chains, t, &x) {
                    rec.psi = stacks.iter().flat_map(|s| s.values().iter().copied()).collect();
                }
                rec.status = e.failure_reason().into();
                records.push(rec);
                status = RunStatus::Failure { reason: e.failure_reason(), t_fail: t, detail: e.to_string() };
                break;
            }
        }
    }
    if status == RunStatus::Completed {
        let t = cfg.steps() as f64 * cfg.dt;
        if let Some(i) = barrier_values(t, &x).iter().position(|&v| !(v > 0.0)) {
            status = RunStatus::Failure {
                reason: FailureReason::Boundary,
                t_fail: t,
                detail: format!("{} reached the boundary", schema.barriers[i]),
            };
        }
    }
    log::debug!("{} finished with {:?}", cfg.name, status);
    SimLog {
        scenario: cfg.name.clone(),
        adaptive: a.enabled,
        horizon: cfg.horizon,
        schema,
        records,
        status,
        final_state: x.iter().copied().collect(),
    }
}
