use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::agent::{decentralized_agent_step, AgentStepSettings, EgoAgent};
use super::pairwise::{AgentKind, NeighborObservation, PairwiseBarrier};
use super::trust::TrustParams;
use crate::adapt::FailureReason;
use crate::model::{ClassKChain, ControlAffineSystem, InputPolytope};
use crate::sim::{step_plant, AdaptationSettings, LogSchema, Record, RunStatus, SampleStatus, ScenarioConfig, SimError, SimLog};

fn default_tolerance() -> f64 {
    0.2
}
fn default_damping() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiAgentConfig {
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub trust: TrustParams,
    /// Bound on how much a neighbor's acceleration may change within one sample.
    #[serde(default)]
    pub delta_f: f64,
    /// Distance to goal counted as arrived.
    #[serde(default = "default_tolerance")]
    pub goal_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub model: AgentKind,
    pub initial: Vec<f64>,
    /// Half of the required separation to any other agent.
    pub radius: f64,
    /// Axis along which others expect this agent to move.
    #[serde(default)]
    pub belief_axis: Option<[f64; 2]>,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// Runs a safety filter against every other agent.
    Ego {
        goal: [f64; 2],
        input_bound: Vec<f64>,
        goal_gain: f64,
        max_speed: f64,
        #[serde(default = "default_damping")]
        damping: f64,
        /// Initial slope per order of each pairwise constraint.
        nu: Vec<f64>,
    },
    /// Single integrator steering toward another agent, saturated at `max_speed`.
    Chase { target: usize, gain: f64, max_speed: f64 },
    /// Single integrator with a fixed velocity.
    ConstantVelocity { velocity: [f64; 2] },
}

impl MultiAgentConfig {
    pub fn validate(&self, s: &AdaptationSettings) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        if self.agents.len() < 2 {
            return err("multi-agent scenario needs at least two agents".into());
        }
        if !(self.delta_f >= 0.0) || !(self.goal_tolerance > 0.0) {
            return err("delta_f must be nonnegative and goal_tolerance positive".into());
        }
        let t = &self.trust;
        if !(t.beta > 0.0 && t.rho_bar > 0.0 && t.rho_bar < 1.0 && t.gain >= 0.0) {
            return err("trust parameters need beta > 0, 0 < rho_bar < 1, gain >= 0".into());
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.initial.len() != a.model.state_dim() {
                return err(format!("agent {}: {} initial values for {} states", i + 1, a.initial.len(), a.model.state_dim()));
            }
            if !(a.radius >= 0.0) {
                return err(format!("agent {}: negative radius", i + 1));
            }
            match &a.behavior {
                Behavior::Ego { input_bound, nu, goal_gain, max_speed, .. } => {
                    if input_bound.len() != a.model.input_dim() || input_bound.iter().any(|&b| !(b > 0.0)) {
                        return err(format!("agent {}: input_bound needs {} positive entries", i + 1, a.model.input_dim()));
                    }
                    if nu.len() != a.model.barrier_degree() {
                        return err(format!("agent {}: {} slopes for relative degree {}", i + 1, nu.len(), a.model.barrier_degree()));
                    }
                    let hi = s.nu_max.unwrap_or(f64::INFINITY);
                    if nu.iter().any(|&v| !(v >= s.nu_min && v <= hi)) {
                        return err(format!("agent {}: initial slopes outside [{}, {hi}]", i + 1, s.nu_min));
                    }
                    if !(*goal_gain > 0.0 && *max_speed > 0.0) {
                        return err(format!("agent {}: goal_gain and max_speed must be positive", i + 1));
                    }
                    if let AgentKind::Unicycle { nose } = a.model {
                        if !(nose > 0.0) {
                            return err(format!("agent {}: unicycle nose offset must be positive", i + 1));
                        }
                    }
                }
                Behavior::Chase { target, .. } if *target == 0 || *target > self.agents.len() || *target == i + 1 => {
                    return err(format!("agent {}: chase target {target} is not another agent", i + 1));
                }
                _ if a.model != AgentKind::SingleIntegrator => {
                    return err(format!("agent {}: scripted agents must be single integrators", i + 1));
                }
                _ => {}
            }
        }
        for i in 0..self.agents.len() {
            for j in i + 1..self.agents.len() {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let d = (point(a) - point(b)).norm();
                if d <= a.radius + b.radius {
                    return err(format!("agents {} and {} start inside their clearance", i + 1, j + 1));
                }
            }
        }
        Ok(())
    }

    /// Ids (1-based) of agents running a safety filter.
    pub fn egos(&self) -> Vec<usize> {
        (0..self.agents.len()).filter(|&i| matches!(self.agents[i].behavior, Behavior::Ego { .. })).map(|i| i + 1).collect()
    }

    /// `(id, ‖point − goal‖)` for every ego, read from a concatenated final state.
    pub fn goal_errors(&self, final_state: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (i, a) in self.agents.iter().enumerate() {
            let n = a.model.state_dim();
            if let (Behavior::Ego { goal, .. }, Some(x)) = (&a.behavior, final_state.get(off..off + n)) {
                let p = a.model.point(&DVector::from_row_slice(x));
                out.push((i + 1, (p - Vector2::new(goal[0], goal[1])).norm()));
            }
            off += n;
        }
        out
    }
}

fn point(a: &AgentConfig) -> Vector2<f64> {
    a.model.point(&DVector::from_vec(a.initial.clone()))
}

struct EgoSlot {
    index: usize,
    agent: EgoAgent,
    neighbors: Vec<usize>,
    chains: Vec<ClassKChain>,
}

fn pair_label(i: usize, j: usize) -> String {
    format!("{}_{}", i + 1, j + 1)
}

fn scripted_input(b: &Behavior, x: &DVector<f64>, target: Option<Vector2<f64>>) -> DVector<f64> {
    match b {
        Behavior::ConstantVelocity { velocity } => DVector::from_vec(velocity.to_vec()),
        Behavior::Chase { gain, max_speed, .. } => {
            let p = Vector2::new(x[0], x[1]);
            let mut v = (target.expect("chase target") - p) * *gain;
            if v.norm() > *max_speed {
                v *= *max_speed / v.norm();
            }
            DVector::from_vec(vec![v.x, v.y])
        }
        Behavior::Ego { .. } => unreachable!("egos compute their own input"),
    }
}

/// World loop: observe, step every ego on the same snapshot, then integrate.
pub fn run_multi_agent(cfg: &ScenarioConfig, m: &MultiAgentConfig) -> Result<SimLog, SimError> {
    let n = m.agents.len();
    let ad = &cfg.adaptation;
    let systems = m
        .agents
        .iter()
        .map(|a| {
            let bound = match &a.behavior {
                Behavior::Ego { input_bound, .. } => input_bound.clone(),
                _ => vec![1e6; a.model.input_dim()],
            };
            Ok(ControlAffineSystem::new(a.model.dynamics(), InputPolytope::symmetric(&bound)?)?)
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut slots = Vec::new();
    for (i, a) in m.agents.iter().enumerate() {
        if let Behavior::Ego { goal, goal_gain, max_speed, damping, nu, .. } = &a.behavior {
            let neighbors: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut chain = ClassKChain::new(nu, ad.nu_min)?;
            if let Some(hi) = ad.nu_max {
                chain = chain.with_max(hi)?;
            }
            slots.push(EgoSlot {
                index: i,
                agent: EgoAgent {
                    id: i + 1,
                    kind: a.model,
                    system: systems[i].clone(),
                    goal: Vector2::new(goal[0], goal[1]),
                    goal_gain: *goal_gain,
                    damping: *damping,
                    max_speed: *max_speed,
                },
                chains: vec![chain; neighbors.len()],
                neighbors,
            });
        }
    }
    let settings = AgentStepSettings {
        adaptive: ad.enabled,
        dt: cfg.dt,
        k_margin: ad.k_margin,
        derivative_limit: ad.derivative_limit,
        joint_top_bounds: ad.joint_top_bounds,
        nu_min: ad.nu_min,
        trust: m.trust,
    };

    let mut schema = LogSchema::default();
    for (i, a) in m.agents.iter().enumerate() {
        schema.state.extend(a.model.state_labels().iter().map(|l| format!("a{}_{l}", i + 1)));
        schema.input.extend(a.model.input_labels().iter().map(|l| format!("a{}_{l}", i + 1)));
    }
    for s in &slots {
        for (&j, c) in s.neighbors.iter().zip(&s.chains) {
            let label = pair_label(s.index, j);
            for k in 0..c.relative_degree() {
                schema.psi.push(format!("psi{k}_{label}"));
                schema.nu.push(format!("nu{}_{label}", k + 1));
                schema.trust.push(format!("rho{}_{label}", k + 1));
            }
            schema.barriers.push(label);
        }
    }

    let mut xs: Vec<DVector<f64>> = m.agents.iter().map(|a| DVector::from_vec(a.initial.clone())).collect();
    let mut held: Vec<DVector<f64>> = m.agents.iter().map(|a| DVector::zeros(a.model.input_dim())).collect();
    let mut records = Vec::with_capacity(cfg.steps());
    let mut status = RunStatus::Completed;

    let barriers_for = |slot: &EgoSlot, obs: &[NeighborObservation], xs: &[DVector<f64>]| -> Vec<PairwiseBarrier> {
        let me = slot.agent.kind.point(&xs[slot.index]);
        slot.neighbors
            .iter()
            .map(|&j| {
                let mut o = obs[j];
                if m.delta_f > 0.0 {
                    if let Some(dir) = (me - o.p).try_normalize(0.0) {
                        o.a += dir * m.delta_f;
                    }
                }
                PairwiseBarrier {
                    ego: slot.agent.kind,
                    neighbor: o,
                    clearance: m.agents[slot.index].radius + m.agents[j].radius,
                    label: pair_label(slot.index, j),
                }
            })
            .collect()
    };
    let pairs: Vec<(usize, usize, f64)> = slots
        .iter()
        .flat_map(|s| s.neighbors.iter().map(move |&j| (s.index, j)))
        .map(|(i, j)| (i, j, m.agents[i].radius + m.agents[j].radius))
        .collect();
    let separation = |xs: &[DVector<f64>]| -> Vec<f64> {
        pairs.iter().map(|&(i, j, r)| (m.agents[i].model.point(&xs[i]) - m.agents[j].model.point(&xs[j])).norm_squared() - r * r).collect()
    };

    'outer: for step in 0..cfg.steps() {
        let t = step as f64 * cfg.dt;
        let obs: Vec<NeighborObservation> = (0..n)
            .map(|j| {
                let (p, v, a) = m.agents[j].model.kinematics(&xs[j], &held[j]);
                NeighborObservation { id: j + 1, t, p, v, a }
            })
            .collect();
        let h = separation(&xs);
        let mut rec = Record {
            t,
            state: xs.iter().flat_map(|x| x.iter().copied()).collect(),
            input: vec![f64::NAN; schema.input.len()],
            delta: 0.0,
            h: h.clone(),
            psi: vec![f64::NAN; schema.psi.len()],
            nu: slots.iter().flat_map(|s| crate::sim::flat_nu(&s.chains)).collect(),
            trust: vec![0.0; schema.trust.len()],
            status: SampleStatus::Ok,
        };
        if let Some(i) = h.iter().position(|&v| !(v > 0.0)) {
            rec.status = SampleStatus::Boundary;
            records.push(rec);
            status = RunStatus::Failure {
                reason: FailureReason::Boundary,
                t_fail: t,
                detail: format!("pair {} reached the boundary", schema.barriers[i]),
            };
            break;
        }

        let mut inputs: Vec<DVector<f64>> = held.clone();
        for (j, a) in m.agents.iter().enumerate() {
            if !matches!(a.behavior, Behavior::Ego { .. }) {
                let target = match a.behavior {
                    Behavior::Chase { target, .. } => Some(obs[target - 1].p),
                    _ => None,
                };
                inputs[j] = scripted_input(&a.behavior, &xs[j], target);
            }
        }
        let mut psi = Vec::with_capacity(schema.psi.len());
        let mut trust = Vec::with_capacity(schema.trust.len());
        let mut next_chains = Vec::with_capacity(slots.len());
        for s in &slots {
            let barriers = barriers_for(s, &obs, &xs);
            let beliefs: Vec<Option<Vector2<f64>>> =
                s.neighbors.iter().map(|&j| m.agents[j].belief_axis.and_then(|b| Vector2::new(b[0], b[1]).try_normalize(0.0))).collect();
            match decentralized_agent_step(&s.agent, &barriers, &beliefs, &s.chains, t, &xs[s.index], &settings) {
                Ok(out) => {
                    inputs[s.index] = out.control.u.clone();
                    psi.extend(out.control.stacks.iter().flat_map(|st| st.values().iter().copied()));
                    if out.trust.is_empty() {
                        trust.extend(s.chains.iter().flat_map(|c| std::iter::repeat_n(0.0, c.relative_degree())));
                    } else {
                        trust.extend(out.trust.iter().flat_map(|v| v.iter().map(|t| t.rho)));
                    }
                    next_chains.push(out.chains);
                }
                Err(e) => {
                    rec.status = e.failure_reason().into();
                    records.push(rec);
                    status = RunStatus::Failure { reason: e.failure_reason(), t_fail: t, detail: format!("agent {}: {e}", s.agent.id) };
                    break 'outer;
                }
            }
        }
        rec.input = inputs.iter().flat_map(|u| u.iter().copied()).collect();
        rec.psi = psi;
        rec.trust = trust;
        records.push(rec);
        for (s, c) in slots.iter_mut().zip(next_chains) {
            s.chains = c;
        }
        for j in 0..n {
            match step_plant(&systems[j], t, &xs[j], &inputs[j], cfg.dt, cfg.substeps) {
                Ok(x) => xs[j] = x,
                Err(e) => {
                    status = RunStatus::Failure { reason: FailureReason::Numerical, t_fail: t + cfg.dt, detail: e.to_string() };
                    break 'outer;
                }
            }
        }
        held = inputs;
    }
    if status == RunStatus::Completed {
        let t = cfg.steps() as f64 * cfg.dt;
        if let Some(i) = separation(&xs).iter().position(|&v| !(v > 0.0)) {
            status = RunStatus::Failure {
                reason: FailureReason::Boundary,
                t_fail: t,
                detail: format!("pair {} reached the boundary", schema.barriers[i]),
            };
        }
    }
    let final_state = xs.iter().flat_map(|x| x.iter().copied()).collect();
    Ok(SimLog { scenario: cfg.name.clone(), adaptive: ad.enabled, horizon: cfg.horizon, schema, records, status, final_state })
}
