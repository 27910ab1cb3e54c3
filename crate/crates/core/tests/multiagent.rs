use nalgebra::{DVector, Vector2};
use proptest::prelude::*;

use rtcbf::model::{ControlAffineSystem, InputPolytope};
use rtcbf::multiagent::{AgentKind, NeighborObservation, PairwiseBarrier};
use rtcbf::sim::{run_scenario, ScenarioConfig, ScenarioKind};

fn kind(k: u8) -> AgentKind {
    match k {
        0 => AgentKind::Unicycle { nose: 0.2 },
        1 => AgentKind::SingleIntegrator,
        _ => AgentKind::DoubleIntegrator,
    }
}

fn v2() -> impl Strategy<Value = Vector2<f64>> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Vector2::new(x, y))
}

proptest! {
    /// `d/dt h^{(m)}` along the joint motion equals the ego part plus `A·(ṗ_j, p̈_j)`.
    #[test]
    fn split_recombines_to_the_total_derivative(
        k in 0u8..3,
        state in prop::collection::vec(-2.0..2.0f64, 4),
        u in prop::collection::vec(-1.0..1.0f64, 2),
        (p, v, a) in (v2(), v2(), v2()),
        t in 0.0..1.0f64,
    ) {
        let ego = kind(k);
        let x = DVector::from_row_slice(&state[..ego.state_dim()]);
        let u = DVector::from_vec(u);
        let neighbor = NeighborObservation { id: 2, t: 0.0, p: p + Vector2::new(5.0, 0.0), v, a };
        let barrier = PairwiseBarrier { ego, neighbor, clearance: 0.5, label: "1_2".into() };
        let system = ControlAffineSystem::new(ego.dynamics(), InputPolytope::symmetric(&[1.0, 1.0]).unwrap()).unwrap();
        let eps = 1e-5;
        let ahead = barrier.split(t + eps, &system.rk4(t, &x, &u, eps));
        let behind = barrier.split(t - eps, &system.rk4(t, &x, &u, -eps));
        let now = barrier.split(t, &x);
        let r = now.h.len();
        for m in 0..r {
            let fd = (ahead.h[m] - behind.h[m]) / (2.0 * eps);
            let mut sum = now.ego_drift[m] + now.neighbor_grad[m].dot(&now.neighbor_rate);
            if m == r - 1 {
                sum += now.ego_input.dot(&u);
            }
            prop_assert!((fd - sum).abs() <= 1e-5 * (1.0 + sum.abs()), "order {m}: {fd} vs {sum}");
        }
    }
}

const HEAD_ON: &str = r#"{
  "name": "head_on",
  "dt": 0.02,
  "horizon": 8.0,
  "adaptation": { "enabled": true },
  "scenario": {
    "kind": "multi_agent",
    "agents": [
      { "model": { "kind": "single_integrator" }, "initial": [-2.0, -0.1], "radius": 0.25,
        "behavior": { "kind": "ego", "goal": [2.0, -0.1], "input_bound": [1.0, 1.0], "goal_gain": 1.0, "max_speed": 1.0, "nu": [0.8] } },
      { "model": { "kind": "single_integrator" }, "initial": [2.0, 0.1], "radius": 0.25,
        "behavior": { "kind": "ego", "goal": [-2.0, 0.1], "input_bound": [1.0, 1.0], "goal_gain": 1.0, "max_speed": 1.0, "nu": [0.8] } }
    ]
  }
}"#;

#[test]
fn head_on_egos_mirror_each_other() {
    for adaptive in [true, false] {
        let mut cfg = ScenarioConfig::from_json(HEAD_ON).unwrap();
        cfg.adaptation.enabled = adaptive;
        let log = run_scenario(&cfg).unwrap();
        assert!(log.min_h().unwrap() >= 0.0);
        let col = |name: &str, group: &[String]| group.iter().position(|c| c == name).unwrap();
        let (x1, y1) = (col("a1_x", &log.schema.state), col("a1_y", &log.schema.state));
        let (x2, y2) = (col("a2_x", &log.schema.state), col("a2_y", &log.schema.state));
        let (n12, n21) = (col("nu1_1_2", &log.schema.nu), col("nu1_2_1", &log.schema.nu));
        for r in &log.records {
            assert!((r.state[x1] + r.state[x2]).abs() < 1e-9, "t = {}", r.t);
            assert!((r.state[y1] + r.state[y2]).abs() < 1e-9, "t = {}", r.t);
            assert!((r.nu[n12] - r.nu[n21]).abs() < 1e-9, "t = {}", r.t);
            assert!((r.h[0] - r.h[1]).abs() < 1e-9, "t = {}", r.t);
        }
    }
}

#[test]
fn head_on_egos_pass_and_arrive() {
    let cfg = ScenarioConfig::from_json(HEAD_ON).unwrap();
    let log = run_scenario(&cfg).unwrap();
    assert!(log.completed());
    let ScenarioKind::MultiAgent(m) = &cfg.scenario else { unreachable!() };
    for (id, err) in m.goal_errors(&log.final_state) {
        assert!(err <= m.goal_tolerance, "agent {id} ends {err} from its goal");
    }
}

#[test]
fn fixed_slopes_keep_wider_clearance_in_mixed_order_scenario() {
    let text = include_str!("../../../configs/multi_scenario2.json");
    let min_h = |adaptive: bool| {
        let mut cfg = ScenarioConfig::from_json(text).unwrap();
        cfg.adaptation.enabled = adaptive;
        run_scenario(&cfg).unwrap().min_h().unwrap()
    };
    let (rt, fixed) = (min_h(true), min_h(false));
    assert!(rt >= 0.0 && fixed >= 0.0, "rt {rt}, fixed {fixed}");
    assert!(fixed > rt, "rt {rt}, fixed {fixed}");
}
