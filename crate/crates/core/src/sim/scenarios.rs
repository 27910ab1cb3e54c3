use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::config::{AccConfig, AdaptationSettings, CorridorConfig, EgoKind, LevelConfig, LinePath};
use super::plants::{leader_accel, AccParams, AccPlant, DoubleIntegrator, SingleIntegrator};
use super::record::LogSchema;
use super::SimError;
use crate::adapt::{CbfController, DesiredPolicy};
use crate::model::{BarrierJet, BarrierSpec, ClassKChain, ControlAffineSystem, InputPolytope, LyapunovJet, LyapunovSpec};

/// Gap to the leader, `h = D − D̄`, relative degree two.
#[derive(Debug, Clone, Copy)]
pub struct GapBarrier {
    pub params: AccParams,
    pub min_distance: f64,
}

impl BarrierSpec for GapBarrier {
    fn relative_degree(&self) -> usize {
        2
    }
    fn jet(&self, t: f64, x: &DVector<f64>) -> BarrierJet {
        let p = &self.params;
        BarrierJet {
            derivatives: vec![x[2] - self.min_distance, x[1] - x[0]],
            drift: leader_accel(t) + p.resistance(x[0]) / p.mass,
            input: DVector::from_element(1, -1.0 / p.mass),
        }
    }
    fn label(&self) -> String {
        "gap".into()
    }
}

/// `v − bound ≥ 0` (lower) or `bound − v ≥ 0` (upper).
#[derive(Debug, Clone, Copy)]
pub struct SpeedBarrier {
    pub params: AccParams,
    pub bound: f64,
    pub upper: bool,
}

impl BarrierSpec for SpeedBarrier {
    fn relative_degree(&self) -> usize {
        1
    }
    fn jet(&self, _t: f64, x: &DVector<f64>) -> BarrierJet {
        let s = if self.upper { -1.0 } else { 1.0 };
        let p = &self.params;
        BarrierJet {
            derivatives: vec![s * (x[0] - self.bound)],
            drift: -s * p.resistance(x[0]) / p.mass,
            input: DVector::from_element(1, s / p.mass),
        }
    }
    fn label(&self) -> String {
        if self.upper { "max_speed" } else { "min_speed" }.into()
    }
}

/// `V = (v − v_d)²`.
#[derive(Debug, Clone, Copy)]
pub struct CruiseClf {
    pub params: AccParams,
    pub desired_speed: f64,
    pub rate: f64,
    pub slack_weight: f64,
}

impl LyapunovSpec for CruiseClf {
    fn jet(&self, _t: f64, x: &DVector<f64>) -> LyapunovJet {
        let p = &self.params;
        let e = x[0] - self.desired_speed;
        LyapunovJet { value: e * e, drift: -2.0 * e * p.resistance(x[0]) / p.mass, input: DVector::from_element(1, 2.0 * e / p.mass) }
    }
    fn rate(&self) -> f64 {
        self.rate
    }
    fn slack_weight(&self) -> f64 {
        self.slack_weight
    }
}

/// `h = (x − x_w(t))² − d²` against a moving wall on the line.
#[derive(Debug, Clone, Copy)]
pub struct WallBarrier {
    pub wall: LinePath,
    pub d_min: f64,
    pub ego: EgoKind,
    pub index: usize,
}

impl BarrierSpec for WallBarrier {
    fn relative_degree(&self) -> usize {
        self.ego.relative_degree()
    }
    fn jet(&self, t: f64, x: &DVector<f64>) -> BarrierJet {
        let e = x[0] - self.wall.position(t);
        let h = e * e - self.d_min * self.d_min;
        let w = self.wall.velocity(t);
        match self.ego {
            EgoKind::SingleIntegrator => BarrierJet { derivatives: vec![h], drift: -2.0 * e * w, input: DVector::from_element(1, 2.0 * e) },
            EgoKind::DoubleIntegrator => {
                let ed = x[1] - w;
                BarrierJet { derivatives: vec![h, 2.0 * e * ed], drift: 2.0 * ed * ed, input: DVector::from_element(1, 2.0 * e) }
            }
        }
    }
    fn label(&self) -> String {
        format!("wall{}", self.index + 1)
    }
}

/// `V = (x − g)²` for the single integrator, `V = (ẋ + k_x(x − g))²` for the double.
#[derive(Debug, Clone, Copy)]
pub struct GoalClf {
    pub ego: EgoKind,
    pub goal: f64,
    pub k_x: f64,
    pub rate: f64,
    pub slack_weight: f64,
}

impl LyapunovSpec for GoalClf {
    fn jet(&self, _t: f64, x: &DVector<f64>) -> LyapunovJet {
        match self.ego {
            EgoKind::SingleIntegrator => {
                let e = x[0] - self.goal;
                LyapunovJet { value: e * e, drift: 0.0, input: DVector::from_element(1, 2.0 * e) }
            }
            EgoKind::DoubleIntegrator => {
                let s = x[1] + self.k_x * (x[0] - self.goal);
                LyapunovJet { value: s * s, drift: 2.0 * s * self.k_x * x[1], input: DVector::from_element(1, 2.0 * s) }
            }
        }
    }
    fn rate(&self) -> f64 {
        self.rate
    }
    fn slack_weight(&self) -> f64 {
        self.slack_weight
    }
}

/// Everything the single-agent loop needs.
#[derive(Debug, Clone)]
pub struct SingleAgentSetup {
    pub controller: CbfController,
    pub chains: Vec<ClassKChain>,
    pub policies: Vec<Vec<DesiredPolicy>>,
    pub x0: DVector<f64>,
    pub schema: LogSchema,
}

fn chain(levels: &[LevelConfig], s: &AdaptationSettings) -> Result<ClassKChain, SimError> {
    let init: Vec<f64> = levels.iter().map(|l| l.initial).collect();
    let c = ClassKChain::new(&init, s.nu_min)?;
    Ok(match s.nu_max {
        Some(hi) => c.with_max(hi)?,
        None => c,
    })
}

fn schema(state: &[&str], input: &[&str], barriers: &[Arc<dyn BarrierSpec>], chains: &[ClassKChain]) -> LogSchema {
    let mut s = LogSchema {
        state: state.iter().map(|v| v.to_string()).collect(),
        input: input.iter().map(|v| v.to_string()).collect(),
        ..Default::default()
    };
    for (b, c) in barriers.iter().zip(chains) {
        let label = b.label();
        for k in 0..c.relative_degree() {
            s.psi.push(format!("psi{k}_{label}"));
            s.nu.push(format!("nu{}_{label}", k + 1));
        }
        s.barriers.push(label);
    }
    s
}

pub fn build_acc(c: &AccConfig, s: &AdaptationSettings) -> Result<SingleAgentSetup, SimError> {
    let p = c.plant;
    let bound = p.max_force();
    let system = ControlAffineSystem::new(Arc::new(AccPlant { params: p }), InputPolytope::symmetric(&[bound])?)?;
    let reference = Arc::new(move |_t: f64, x: &DVector<f64>| DVector::from_element(1, p.resistance(x[0])));
    let barriers: Vec<Arc<dyn BarrierSpec>> = vec![
        Arc::new(GapBarrier { params: p, min_distance: c.min_distance }),
        Arc::new(SpeedBarrier { params: p, bound: c.min_speed, upper: false }),
        Arc::new(SpeedBarrier { params: p, bound: c.max_speed, upper: true }),
    ];
    let mut controller = CbfController::new(system, reference)
        .with_lyapunov(Arc::new(CruiseClf {
            params: p,
            desired_speed: c.desired_speed,
            rate: c.clf_rate,
            slack_weight: c.clf_slack_weight,
        }))
        .with_input_weight(DMatrix::from_element(1, 1, 1.0 / (p.mass * p.mass)));
    for b in &barriers {
        controller = controller.with_barrier(b.clone());
    }
    let levels = [&c.distance_levels, &c.min_speed_levels, &c.max_speed_levels];
    let chains = levels.iter().map(|l| chain(l, s)).collect::<Result<Vec<_>, _>>()?;
    let policies = levels.iter().map(|l| l.iter().map(LevelConfig::policy).collect()).collect();
    let x0 = DVector::from_vec(vec![c.initial.speed, c.initial.leader_speed, c.initial.distance]);
    let schema = schema(&["v", "v_lead", "gap"], &["force"], &barriers, &chains);
    Ok(SingleAgentSetup { controller, chains, policies, x0, schema })
}

pub fn build_corridor(c: &CorridorConfig, s: &AdaptationSettings) -> Result<SingleAgentSetup, SimError> {
    let inputs = InputPolytope::symmetric(&[c.input_bound])?;
    let (goal, kx, kv) = (c.goal, c.k_x, c.k_v);
    let (system, x0, state): (_, _, &[&str]) = match c.ego {
        EgoKind::SingleIntegrator => {
            (ControlAffineSystem::new(Arc::new(SingleIntegrator { dim: 1 }), inputs)?, DVector::from_element(1, c.x0), &["x"])
        }
        EgoKind::DoubleIntegrator => {
            (ControlAffineSystem::new(Arc::new(DoubleIntegrator { dim: 1 }), inputs)?, DVector::from_vec(vec![c.x0, c.v0]), &["x", "v"])
        }
    };
    let reference: crate::adapt::ReferenceFn = match c.ego {
        EgoKind::SingleIntegrator => Arc::new(move |_t, x: &DVector<f64>| DVector::from_element(1, -kx * (x[0] - goal))),
        EgoKind::DoubleIntegrator => Arc::new(move |_t, x: &DVector<f64>| DVector::from_element(1, -kv * (x[1] + kx * (x[0] - goal)))),
    };
    let mut controller = CbfController::new(system, reference);
    if let Some(clf) = c.clf {
        controller =
            controller.with_lyapunov(Arc::new(GoalClf { ego: c.ego, goal, k_x: kx, rate: clf.rate, slack_weight: clf.slack_weight }));
    }
    let barriers: Vec<Arc<dyn BarrierSpec>> = c
        .walls
        .iter()
        .enumerate()
        .map(|(index, &wall)| Arc::new(WallBarrier { wall, d_min: c.d_min, ego: c.ego, index }) as Arc<dyn BarrierSpec>)
        .collect();
    for b in &barriers {
        controller = controller.with_barrier(b.clone());
    }
    let chains = barriers.iter().map(|_| chain(&c.levels, s)).collect::<Result<Vec<_>, _>>()?;
    let policies = barriers.iter().map(|_| c.levels.iter().map(LevelConfig::policy).collect()).collect();
    let schema = schema(state, &["u"], &barriers, &chains);
    Ok(SingleAgentSetup { controller, chains, policies, x0, schema })
}
