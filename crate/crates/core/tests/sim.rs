use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;

use rtcbf::model::{ControlAffineSystem, InputPolytope};
use rtcbf::sim::scenarios::{build_acc, build_corridor};
use rtcbf::sim::{run_scenario, step_plant, DoubleIntegrator, ScenarioConfig, ScenarioKind, SimLog, SingleIntegrator};

const ACC: &str = include_str!("../../../configs/acc.json");
const CORRIDOR_SI: &str = include_str!("../../../configs/corridor_si.json");
const CORRIDOR_DI: &str = include_str!("../../../configs/corridor_di.json");

fn config(text: &str, adaptive: bool) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_json(text).unwrap();
    cfg.adaptation.enabled = adaptive;
    cfg
}

#[test]
fn identical_configs_give_identical_logs() {
    for text in [ACC, CORRIDOR_SI, CORRIDOR_DI] {
        for adaptive in [true, false] {
            let cfg = config(text, adaptive);
            let (a, b) = (run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
            assert_eq!(format!("{a:?}"), format!("{b:?}"));
            assert_eq!(a.csv_string().unwrap(), b.csv_string().unwrap());
        }
    }
}

proptest! {
    #[test]
    fn zero_input_without_drift_holds_the_state(
        pos in prop::collection::vec(-10.0..10.0f64, 3),
        dt in 1e-3..0.5f64,
        substeps in 1usize..5,
    ) {
        let si = ControlAffineSystem::new(Arc::new(SingleIntegrator { dim: 3 }), InputPolytope::symmetric(&[1.0; 3]).unwrap()).unwrap();
        let x = DVector::from_vec(pos.clone());
        prop_assert_eq!(step_plant(&si, 0.0, &x, &DVector::zeros(3), dt, substeps).unwrap(), x);

        let di = ControlAffineSystem::new(Arc::new(DoubleIntegrator { dim: 3 }), InputPolytope::symmetric(&[1.0; 3]).unwrap()).unwrap();
        let mut at_rest = pos;
        at_rest.extend([0.0; 3]);
        let x = DVector::from_vec(at_rest);
        prop_assert_eq!(step_plant(&di, 0.0, &x, &DVector::zeros(3), dt, substeps).unwrap(), x);
    }
}

fn terminal_state(dt: f64, adaptive: bool) -> DVector<f64> {
    let mut cfg = config(ACC, adaptive);
    cfg.dt = dt;
    cfg.horizon = 20.0;
    let log = run_scenario(&cfg).unwrap();
    assert!(log.completed());
    DVector::from_vec(log.final_state)
}

/// Zero-order hold is first order: the observed order approaches 1 under refinement.
#[test]
fn halving_the_sample_time_converges_at_first_order() {
    for adaptive in [true, false] {
        let x = [0.04, 0.02, 0.01, 0.005].map(|dt| terminal_state(dt, adaptive));
        let diff: Vec<f64> = x.windows(2).map(|w| (&w[0] - &w[1]).norm()).collect();
        let orders: Vec<f64> = diff.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
        assert!(orders.iter().all(|&p| p >= 0.95), "adaptive = {adaptive}: orders {orders:?}");
        assert!((orders[1] - 1.0).abs() <= (orders[0] - 1.0).abs(), "adaptive = {adaptive}: orders {orders:?}");
    }
}

/// Every feasible sample of a fixed-slope run satisfies its HOCBF rows and input bounds.
fn assert_rows_hold(log: &SimLog, cfg: &ScenarioConfig) {
    let setup = match &cfg.scenario {
        ScenarioKind::Acc(c) => build_acc(c, &cfg.adaptation).unwrap(),
        ScenarioKind::Corridor(c) => build_corridor(c, &cfg.adaptation).unwrap(),
        ScenarioKind::MultiAgent(_) => unreachable!(),
    };
    let inputs = setup.controller.system.inputs();
    for r in log.feasible_records() {
        let x = DVector::from_vec(r.state.clone());
        let u = DVector::from_vec(r.input.clone());
        let stacks = setup.controller.stacks(&setup.chains, r.t, &x).unwrap();
        for (s, c) in stacks.iter().zip(&setup.chains) {
            let slack = s.psi_dot_top(&u) + c.nu(c.relative_degree() - 1) * s.top();
            assert!(slack >= -1e-6 * (1.0 + s.drift().abs()), "t = {}: row slack {slack}", r.t);
        }
        assert!(inputs.contains(&u, 1e-6), "t = {}: input {u} outside the bounds", r.t);
    }
}

#[test]
fn logged_inputs_satisfy_the_constraint_rows() {
    for text in [ACC, CORRIDOR_SI, CORRIDOR_DI] {
        let cfg = config(text, false);
        let log = run_scenario(&cfg).unwrap();
        assert!(log.feasible_records().count() > 0);
        assert_rows_hold(&log, &cfg);
    }
}

#[test]
fn adaptive_corridor_outlasts_fixed_at_the_default_start() {
    for text in [CORRIDOR_SI, CORRIDOR_DI] {
        let rt = run_scenario(&config(text, true)).unwrap();
        let fixed = run_scenario(&config(text, false)).unwrap();
        assert!(rt.completed());
        assert!(rt.time_to_failure() > fixed.time_to_failure());
    }
}

#[test]
fn summary_reports_per_barrier_minima() {
    let log = run_scenario(&config(ACC, true)).unwrap();
    let s = log.summary();
    assert_eq!(s.status, "completed");
    assert_eq!(s.min_h_per_barrier.len(), 3);
    assert_eq!(s.samples, log.records.len());
    let lowest = s.min_h_per_barrier.values().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(Some(lowest), s.min_h);
}
