use std::sync::Arc;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::model::{BarrierJet, BarrierSpec, Dynamics};
use crate::sim::{DoubleIntegrator, SingleIntegrator, Unicycle};

/// Planar agent model with the point used for separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    /// Separation is measured from a point `nose` ahead of the axle, which
    /// makes the constraint relative degree one in `(v, ω)`.
    Unicycle {
        nose: f64,
    },
    SingleIntegrator,
    DoubleIntegrator,
}

impl AgentKind {
    pub fn state_dim(&self) -> usize {
        match self {
            AgentKind::Unicycle { .. } => 3,
            AgentKind::SingleIntegrator => 2,
            AgentKind::DoubleIntegrator => 4,
        }
    }

    pub fn input_dim(&self) -> usize {
        2
    }

    pub fn dynamics(&self) -> Arc<dyn Dynamics> {
        match self {
            AgentKind::Unicycle { .. } => Arc::new(Unicycle),
            AgentKind::SingleIntegrator => Arc::new(SingleIntegrator { dim: 2 }),
            AgentKind::DoubleIntegrator => Arc::new(DoubleIntegrator { dim: 2 }),
        }
    }

    /// Relative degree of a separation constraint for this ego.
    pub fn barrier_degree(&self) -> usize {
        match self {
            AgentKind::DoubleIntegrator => 2,
            _ => 1,
        }
    }

    pub fn state_labels(&self) -> &'static [&'static str] {
        match self {
            AgentKind::Unicycle { .. } => &["x", "y", "theta"],
            AgentKind::SingleIntegrator => &["x", "y"],
            AgentKind::DoubleIntegrator => &["x", "y", "vx", "vy"],
        }
    }

    pub fn input_labels(&self) -> &'static [&'static str] {
        match self {
            AgentKind::Unicycle { .. } => &["v", "omega"],
            _ => &["ux", "uy"],
        }
    }

    pub fn point(&self, x: &DVector<f64>) -> Vector2<f64> {
        match *self {
            AgentKind::Unicycle { nose } => Vector2::new(x[0] + nose * x[2].cos(), x[1] + nose * x[2].sin()),
            _ => Vector2::new(x[0], x[1]),
        }
    }

    /// Position, velocity and acceleration of the separation point with `u` held.
    pub fn kinematics(&self, x: &DVector<f64>, u: &DVector<f64>) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>) {
        let p = self.point(x);
        match *self {
            AgentKind::Unicycle { nose } => {
                let (s, c) = x[2].sin_cos();
                let (heading, normal) = (Vector2::new(c, s), Vector2::new(-s, c));
                let (v, w) = (u[0], u[1]);
                (p, heading * v + normal * (nose * w), normal * (v * w) - heading * (nose * w * w))
            }
            AgentKind::SingleIntegrator => (p, Vector2::new(u[0], u[1]), Vector2::zeros()),
            AgentKind::DoubleIntegrator => (p, Vector2::new(x[2], x[3]), Vector2::new(u[0], u[1])),
        }
    }
}

/// Observed motion of a neighbor's separation point at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborObservation {
    pub id: usize,
    pub t: f64,
    pub p: Vector2<f64>,
    pub v: Vector2<f64>,
    pub a: Vector2<f64>,
}

impl NeighborObservation {
    /// Constant-acceleration extrapolation.
    pub fn at(&self, t: f64) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>) {
        let tau = t - self.t;
        (self.p + self.v * tau + self.a * (0.5 * tau * tau), self.v + self.a * tau, self.a)
    }
}

/// Time derivatives of `h^{(m)}` split into the ego's own contribution and the
/// gradient with respect to the neighbor's `(p_j, ṗ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSplit {
    pub h: Vec<f64>,
    /// Input-free ego part of `d/dt h^{(m)}`.
    pub ego_drift: Vec<f64>,
    /// Ego input row of `d/dt h^{(r−1)}`.
    pub ego_input: DVector<f64>,
    /// `∂h^{(m)}/∂(p_j, ṗ_j)`, paired with the neighbor rate `(ṗ_j, p̈_j)`.
    pub neighbor_grad: Vec<DVector<f64>>,
    pub neighbor_rate: DVector<f64>,
}

/// `h = ‖p_i − p_j‖² − d²` between an ego and one observed neighbor.
#[derive(Debug, Clone)]
pub struct PairwiseBarrier {
    pub ego: AgentKind,
    pub neighbor: NeighborObservation,
    pub clearance: f64,
    pub label: String,
}

fn grad(pos: Vector2<f64>, vel: Vector2<f64>) -> DVector<f64> {
    DVector::from_vec(vec![pos.x, pos.y, vel.x, vel.y])
}

impl PairwiseBarrier {
    pub fn split(&self, t: f64, x: &DVector<f64>) -> PairSplit {
        let (pj, vj, aj) = self.neighbor.at(t);
        let d2 = self.clearance * self.clearance;
        let rate = grad(vj, aj);
        let zero = Vector2::zeros();
        match self.ego {
            AgentKind::Unicycle { nose } => {
                let (s, c) = x[2].sin_cos();
                let d = self.ego.point(x) - pj;
                PairSplit {
                    h: vec![d.norm_squared() - d2],
                    ego_drift: vec![0.0],
                    ego_input: DVector::from_vec(vec![2.0 * d.dot(&Vector2::new(c, s)), 2.0 * nose * d.dot(&Vector2::new(-s, c))]),
                    neighbor_grad: vec![grad(-2.0 * d, zero)],
                    neighbor_rate: rate,
                }
            }
            AgentKind::SingleIntegrator => {
                let d = self.ego.point(x) - pj;
                PairSplit {
                    h: vec![d.norm_squared() - d2],
                    ego_drift: vec![0.0],
                    ego_input: DVector::from_vec(vec![2.0 * d.x, 2.0 * d.y]),
                    neighbor_grad: vec![grad(-2.0 * d, zero)],
                    neighbor_rate: rate,
                }
            }
            AgentKind::DoubleIntegrator => {
                let d = self.ego.point(x) - pj;
                let v = Vector2::new(x[2], x[3]);
                let dv = v - vj;
                PairSplit {
                    h: vec![d.norm_squared() - d2, 2.0 * d.dot(&dv)],
                    ego_drift: vec![2.0 * d.dot(&v), 2.0 * dv.dot(&v)],
                    ego_input: DVector::from_vec(vec![2.0 * d.x, 2.0 * d.y]),
                    neighbor_grad: vec![grad(-2.0 * d, zero), grad(-2.0 * dv, -2.0 * d)],
                    neighbor_rate: rate,
                }
            }
        }
    }
}

impl BarrierSpec for PairwiseBarrier {
    fn relative_degree(&self) -> usize {
        self.ego.barrier_degree()
    }

    fn jet(&self, t: f64, x: &DVector<f64>) -> BarrierJet {
        let s = self.split(t, x);
        let r = s.h.len();
        BarrierJet { drift: s.ego_drift[r - 1] + s.neighbor_grad[r - 1].dot(&s.neighbor_rate), derivatives: s.h, input: s.ego_input }
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
