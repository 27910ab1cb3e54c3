use std::sync::Arc;

use nalgebra::{DVector, Vector2};

use super::pairwise::{AgentKind, PairwiseBarrier};
use super::trust::{alpha_rate_from_trust, best_case_ego, neighbor_halfspace_and_margin, trust_scores, TrustParams, TrustScore};
use crate::adapt::{rtcbf_step, solve_controller, AdaptError, AdaptationConfig, CbfController, ControlSolution, DesiredPolicy};
use crate::hocbf::{derived_barriers_from_jet, hocbf_row, LinearConstraintRow, RowTag};
use crate::model::{BarrierSpec, ClassKChain, ControlAffineSystem};

/// An agent that runs its own safety filter.
#[derive(Debug, Clone)]
pub struct EgoAgent {
    pub id: usize,
    pub kind: AgentKind,
    pub system: ControlAffineSystem,
    pub goal: Vector2<f64>,
    pub goal_gain: f64,
    /// Velocity gain of the double-integrator reference.
    pub damping: f64,
    /// Speed cap of the reference motion.
    pub max_speed: f64,
}

impl EgoAgent {
    /// Nominal input steering the separation point to the goal.
    pub fn reference(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.kind.point(x);
        let mut want = (self.goal - p) * self.goal_gain;
        if want.norm() > self.max_speed {
            want *= self.max_speed / want.norm();
        }
        match self.kind {
            AgentKind::Unicycle { nose } => {
                let (s, c) = x[2].sin_cos();
                DVector::from_vec(vec![c * want.x + s * want.y, (-s * want.x + c * want.y) / nose])
            }
            AgentKind::SingleIntegrator => DVector::from_vec(vec![want.x, want.y]),
            AgentKind::DoubleIntegrator => {
                let a = (want - Vector2::new(x[2], x[3])) * self.damping;
                DVector::from_vec(vec![a.x, a.y])
            }
        }
    }

    pub fn controller(&self, barriers: &[PairwiseBarrier]) -> CbfController {
        let me = self.clone();
        let mut ctrl = CbfController::new(self.system.clone(), Arc::new(move |_t, x: &DVector<f64>| me.reference(x)));
        for b in barriers {
            ctrl = ctrl.with_barrier(Arc::new(b.clone()));
        }
        ctrl
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStepSettings {
    pub adaptive: bool,
    pub dt: f64,
    pub k_margin: f64,
    pub derivative_limit: f64,
    pub joint_top_bounds: bool,
    pub nu_min: f64,
    pub trust: TrustParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStepOutcome {
    pub control: ControlSolution,
    pub chains: Vec<ClassKChain>,
    /// `trust[j][level]` for each neighbor (empty with fixed slopes).
    pub trust: Vec<Vec<TrustScore>>,
}

/// Trust of every neighbor at every order, cascading each order's rate into the next.
pub fn pair_trust(
    agent: &EgoAgent,
    barriers: &[PairwiseBarrier],
    beliefs: &[Option<Vector2<f64>>],
    chains: &[ClassKChain],
    t: f64,
    x: &DVector<f64>,
    params: &TrustParams,
) -> Result<Vec<Vec<TrustScore>>, AdaptError> {
    let jets: Vec<_> = barriers.iter().map(|b| b.jet(t, x)).collect();
    let stacks = jets.iter().zip(chains).map(|(j, c)| derived_barriers_from_jet(j, c)).collect::<Result<Vec<_>, _>>()?;
    let top_rows: Vec<LinearConstraintRow> = stacks
        .iter()
        .zip(chains)
        .enumerate()
        .map(|(i, (s, c))| hocbf_row(s, c.nu(c.relative_degree() - 1), RowTag::Barrier(i)))
        .collect::<Result<_, _>>()?;
    let ego_point = agent.kind.point(x);

    let mut out = Vec::with_capacity(barriers.len());
    for (j, b) in barriers.iter().enumerate() {
        let split = b.split(t, x);
        let chain = &chains[j];
        let r = chain.relative_degree();
        let mut rates = vec![0.0; r];
        let mut scores = Vec::with_capacity(r);
        let velocity = b.neighbor.at(t).1;
        let belief = match beliefs[j] {
            Some(axis) if velocity.dot(&axis) < 0.0 => -axis,
            Some(axis) => axis,
            None => (ego_point - b.neighbor.at(t).0).try_normalize(0.0).unwrap_or_else(Vector2::x),
        };
        for level in 0..r {
            let param = if level == 0 {
                0.0
            } else {
                let mut lowered: Vec<Vec<f64>> = (0..r).map(|q| chain.stack(q).to_vec()).collect();
                for (q, s) in lowered.iter_mut().enumerate().take(level) {
                    s[1] = rates[q];
                }
                let cascaded = ClassKChain::from_stacks(lowered, chain.nu_min(), chain.nu_max())?;
                derived_barriers_from_jet(&jets[j], &cascaded)?.parameter_rate_part(level)
            };
            let c: Vec<f64> = (0..=level).map(|m| stacks[j].coefficient(level, m)).collect();
            let ego_const: f64 = (0..=level).map(|m| c[m] * split.ego_drift[m]).sum();
            let a = (0..=level).fold(DVector::zeros(4), |acc, m| acc + &split.neighbor_grad[m] * c[m]);
            let best = if level + 1 == r {
                let others: Vec<_> = top_rows.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, r)| r.clone()).collect();
                best_case_ego(&(&split.ego_input * c[level]), &others, agent.system.inputs())?.map(|v| v + ego_const)
            } else {
                Some(ego_const)
            };
            let score = match best {
                None => TrustScore::distrust(f64::NAN),
                Some(best) => {
                    let hs = neighbor_halfspace_and_margin(&a, chain.nu(level) * stacks[j].psi(level), param, best, &split.neighbor_rate);
                    if hs.margin < 0.0 {
                        log::debug!("agent {}: negative margin {:.3e} against {}", agent.id, hs.margin, b.label);
                        TrustScore::distrust(hs.margin)
                    } else {
                        let normal = Vector2::new(a[0], a[1]);
                        trust_scores(hs.margin, &belief, &normal, &velocity, params.beta, params.rho_bar)
                    }
                }
            };
            rates[level] = alpha_rate_from_trust(score.rho, params.gain);
            scores.push(score);
        }
        out.push(scores);
    }
    // Incompatible with the other neighbors at the top order: distrust everyone.
    if out.iter().any(|s| s.last().is_some_and(|t| t.margin.is_nan())) {
        for s in &mut out {
            for t in s.iter_mut() {
                *t = TrustScore::distrust(t.margin);
            }
        }
    }
    Ok(out)
}

/// One sample of an ego: trust-driven desired slopes, projection through the
/// sampled-data bounds, and the safety-filtered input.
pub fn decentralized_agent_step(
    agent: &EgoAgent,
    barriers: &[PairwiseBarrier],
    beliefs: &[Option<Vector2<f64>>],
    chains: &[ClassKChain],
    t: f64,
    x: &DVector<f64>,
    settings: &AgentStepSettings,
) -> Result<AgentStepOutcome, AdaptError> {
    let ctrl = agent.controller(barriers);
    if !settings.adaptive {
        let control = solve_controller(&ctrl, chains, t, x)?;
        return Ok(AgentStepOutcome { control, chains: chains.to_vec(), trust: Vec::new() });
    }
    let trust = pair_trust(agent, barriers, beliefs, chains, t, x, &settings.trust)?;
    let policies = trust
        .iter()
        .zip(chains)
        .map(|(scores, c)| {
            scores
                .iter()
                .enumerate()
                .map(|(k, s)| DesiredPolicy::Constant {
                    value: (c.nu(k) + settings.dt * alpha_rate_from_trust(s.rho, settings.trust.gain)).max(settings.nu_min),
                })
                .collect()
        })
        .collect();
    let config = AdaptationConfig {
        k_margin: settings.k_margin,
        dt: settings.dt,
        derivative_limit: settings.derivative_limit,
        policies,
        joint_top_bounds: settings.joint_top_bounds,
    };
    let step = rtcbf_step(&ctrl, chains, t, x, &config)?;
    Ok(AgentStepOutcome { control: step.control, chains: step.chains, trust })
}
