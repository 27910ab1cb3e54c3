//! End-to-end acceptance checks, one line per criterion.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rtcbf::adapt::{shape_alpha, FailureReason};
use rtcbf::hocbf::derived_barriers;
use rtcbf::model::{BarrierJet, BarrierSpec, ClassKChain, ControlAffineSystem, Dynamics, InputPolytope};
use rtcbf::multiagent::{trust_branches, trust_scores};
use rtcbf::optim::{analytic_cbf_qp, solve_qp, AnalyticVariant, QpOutcome, QuadraticProgram};
use rtcbf::sim::{RunStatus, ScenarioKind, SimLog};
use rtcbf_validation::{corridor_starts, run_corridor, suite_logs, ACC, CORRIDOR_DI, CORRIDOR_SI, MULTI_1};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(text: &str, adaptive: bool) -> SimLog {
    rtcbf_validation::run(text, adaptive).expect("bundled config runs")
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(lo..hi))
}

fn nonzero(rng: &mut ChaCha8Rng, n: usize, span: f64) -> DVector<f64> {
    loop {
        let v = uniform(rng, n, -span, span);
        if v.norm() > 1e-3 {
            return v;
        }
    }
}

fn analytic_matches_solver() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let m = rng.gen_range(1..=3);
        let u_r = uniform(&mut rng, m, -2.0, 2.0);
        let lg = nonzero(&mut rng, m, 2.0);
        let (dh, lf, alpha) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let u = analytic_cbf_qp(&u_r, dh, lf, &lg, alpha, AnalyticVariant::Kkt).map_err(|e| e.to_string())?;
        let qp = QuadraticProgram::new(
            DMatrix::identity(m, m),
            -&u_r,
            DMatrix::from_fn(1, m, |_, j| -lg[j]),
            DVector::from_element(1, dh + lf + alpha),
        )
        .map_err(|e| e.to_string())?;
        let z = match solve_qp(&qp).map_err(|e| e.to_string())? {
            QpOutcome::Optimal(s) => s.z,
            QpOutcome::Infeasible(_) => return Err("solver reported a single halfspace infeasible".into()),
        };
        worst = worst.max((u - z).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-6 && secs <= 5.0, format!("max |du| = {worst:.2e} over 10000 instances in {secs:.2} s"))
}

/// Integrator chain of order `r` in one coordinate.
#[derive(Debug)]
struct Chain(usize);

impl Dynamics for Chain {
    fn state_dim(&self) -> usize {
        self.0
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.0, |i, _| if i + 1 < self.0 { x[i + 1] } else { 0.0 })
    }
    fn input_map(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.0, 1, |i, _| if i + 1 == self.0 { 1.0 } else { 0.0 })
    }
}

/// `h = a·x₀² + b·x₀ + c` on an integrator chain of order 2 or 3.
#[derive(Debug)]
struct Quadratic {
    r: usize,
    a: f64,
    b: f64,
    c: f64,
}

impl BarrierSpec for Quadratic {
    fn relative_degree(&self) -> usize {
        self.r
    }
    fn jet(&self, _t: f64, x: &DVector<f64>) -> BarrierJet {
        let p1 = 2.0 * self.a * x[0] + self.b;
        let p2 = 2.0 * self.a;
        let h = self.a * x[0] * x[0] + self.b * x[0] + self.c;
        let input = DVector::from_element(1, p1);
        match self.r {
            2 => BarrierJet { derivatives: vec![h, p1 * x[1]], drift: p2 * x[1] * x[1], input },
            _ => BarrierJet { derivatives: vec![h, p1 * x[1], p2 * x[1] * x[1] + p1 * x[2]], drift: 3.0 * p2 * x[1] * x[2], input },
        }
    }
}

fn hocbf_finite_differences() -> Verdict {
    let dt = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for r in [2usize, 3] {
        for _ in 0..200 {
            let barrier = Quadratic { r, a: rng.gen_range(-0.5..0.5), b: rng.gen_range(-0.5..0.5), c: rng.gen_range(-0.5..0.5) };
            let system = ControlAffineSystem::new(Arc::new(Chain(r)), InputPolytope::symmetric(&[1.0]).unwrap()).unwrap();
            let stacks: Vec<Vec<f64>> = (0..r)
                .map(|i| {
                    let mut s: Vec<f64> = (0..r - i).map(|_| rng.gen_range(-0.3..0.3)).collect();
                    s[0] = rng.gen_range(0.5..1.5);
                    s
                })
                .collect();
            let mut chain = ClassKChain::from_stacks(stacks, 0.0, f64::INFINITY).unwrap();
            let tops: Vec<f64> = (0..r).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let mut x = uniform(&mut rng, r, -0.5, 0.5);
            let u = uniform(&mut rng, 1, -1.0, 1.0);
            let mut t = 0.0;
            for _ in 0..5 {
                let now = derived_barriers(&barrier, &chain, t, &x).map_err(|e| e.to_string())?;
                let x_next = system.rk4(t, &x, &u, dt);
                let mut chain_next = chain.clone();
                for (level, &w) in tops.iter().enumerate() {
                    chain_next.advance_level(level, w, dt).unwrap();
                }
                let next = derived_barriers(&barrier, &chain_next, t + dt, &x_next).map_err(|e| e.to_string())?;
                for k in 1..=r {
                    let fd = (next.psi(k - 1) - now.psi(k - 1)) / dt;
                    let predicted = if k < r { now.psi(k) - chain.nu(k - 1) * now.psi(k - 1) } else { now.psi_dot_top(&u) };
                    worst = worst.max((fd - predicted).abs());
                }
                x = x_next;
                chain = chain_next;
                t += dt;
            }
        }
    }
    check(worst <= 10.0 * dt, format!("max finite-difference error {worst:.2e} at dt = {dt:e} (bound {:.0e})", 10.0 * dt))
}

fn acc_reproduction() -> Verdict {
    let start = Instant::now();
    let fixed = run(ACC, false);
    let adaptive = run(ACC, true);
    let secs = start.elapsed().as_secs_f64();
    let gap = adaptive.schema.barriers.iter().position(|b| b == "gap").expect("gap barrier");
    let nu_col = adaptive.schema.nu.iter().position(|n| n == "nu2_gap").expect("nu2_gap column");
    let min_gap = adaptive.min_h_per_barrier()[gap];
    let nu_end = adaptive.records.last().map(|r| r.nu[nu_col]).unwrap_or(f64::NAN);
    let fixed_fails = !fixed.completed() && fixed.time_to_failure() < 50.0;
    let adaptive_ok = adaptive.completed() && min_gap >= 0.0 && (nu_end - 0.7).abs() <= 0.05;
    let fixed_text = match &fixed.status {
        RunStatus::Completed => format!("fixed completed 50 s (min h = {:.3e})", fixed.min_h().unwrap_or(f64::NAN)),
        RunStatus::Failure { reason, t_fail, .. } => format!("fixed failed at {t_fail} s ({reason:?})"),
    };
    check(
        fixed_fails && adaptive_ok && secs <= 10.0,
        format!(
            "{fixed_text}; adaptive {} with min h = {min_gap:.3e}, terminal nu2 = {nu_end:.4}; {secs:.2} s",
            if adaptive.completed() { "completed" } else { "failed" }
        ),
    )
}

fn sweep(text: &str) -> Result<(usize, usize, f64), String> {
    let (mut dominated, mut strict, mut worst) = (0, 0, f64::INFINITY);
    for x0 in corridor_starts() {
        let mut t = [0.0; 2];
        for (slot, adaptive) in [true, false].into_iter().enumerate() {
            let log = run_corridor(text, adaptive, x0).map_err(|e| e.to_string())?;
            t[slot] = log.time_to_failure() / log.horizon;
        }
        if t[0] >= t[1] {
            dominated += 1;
        }
        if t[0] > t[1] {
            strict += 1;
        }
        worst = worst.min(t[0] - t[1]);
    }
    Ok((dominated, strict, worst))
}

fn corridor_dominance() -> Verdict {
    let start = Instant::now();
    let si = sweep(CORRIDOR_SI)?;
    let di = sweep(CORRIDOR_DI)?;
    let secs = start.elapsed().as_secs_f64();
    let ok = si.0 == 100 && di.0 == 100 && si.1 >= 1 && di.1 >= 1 && secs <= 60.0;
    check(
        ok,
        format!(
            "single integrator {}/100 dominated ({} strict), double integrator {}/100 ({} strict), min gap {:.3}; {secs:.2} s",
            si.0,
            si.1,
            di.0,
            di.1,
            si.2.min(di.2)
        ),
    )
}

fn shaping_grid_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid: Vec<f64> = (0..10_001).map(|i| -20.0 + 40.0 * i as f64 / 10_000.0).collect();
    let mut violations = 0;
    for _ in 0..1000 {
        let m = rng.gen_range(1..=3);
        let u_r = uniform(&mut rng, m, -1.0, 1.0);
        let u_d = uniform(&mut rng, m, -1.0, 1.0);
        let lg = nonzero(&mut rng, m, 2.0);
        let (dh, lf) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let cost = |alpha: f64| {
            let u = analytic_cbf_qp(&u_r, dh, lf, &lg, alpha, AnalyticVariant::Sqrt2Scaled).expect("nonzero L_g h");
            (u - &u_d).norm()
        };
        let best = grid.iter().map(|&a| cost(a)).fold(f64::INFINITY, f64::min);
        if cost(shape_alpha(&u_r, &u_d, dh, lf, &lg)) > best + 1e-9 {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} violations over 1000 instances on a 10001-point grid"))
}

fn trust_bounds() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vec2 = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.05) {
            Vector2::zeros()
        } else {
            Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }
    };
    let mut out_of_range = 0;
    for _ in 0..1_000_000 {
        let (b, n, v) = (vec2(&mut rng), vec2(&mut rng), vec2(&mut rng));
        let s = trust_scores(rng.gen_range(-5.0..5.0), &b, &n, &v, rng.gen_range(0.01..5.0), rng.gen_range(0.01..0.99));
        if !(s.rho >= -1.0 && s.rho <= 1.0) {
            out_of_range += 1;
        }
    }
    let mut discontinuities = 0;
    for _ in 0..10_000 {
        let (rho_bar, rho_gamma) = (rng.gen_range(0.01..0.99), rng.gen_range(0.0..=1.0));
        if trust_branches(rho_bar, rho_gamma, rho_bar) != (0.0, 0.0) {
            discontinuities += 1;
        }
        let (beta, margin) = (rng.gen_range(0.1..5.0), rng.gen_range(0.01..1.0));
        let at = trust_scores(margin, &vec2(&mut rng), &vec2(&mut rng), &vec2(&mut rng), beta, (beta * margin).tanh());
        if at.rho != 0.0 {
            discontinuities += 1;
        }
    }
    check(
        out_of_range == 0 && discontinuities == 0,
        format!("{out_of_range} scores outside [-1, 1] in 1000000 draws; {discontinuities} nonzero branch values at the threshold"),
    )
}

fn multi_agent_scenario_1() -> Verdict {
    let start = Instant::now();
    let adaptive = run(MULTI_1, true);
    let fixed = run(MULTI_1, false);
    let secs = start.elapsed().as_secs_f64();
    let cfg = rtcbf_validation::config(MULTI_1, true).map_err(|e| e.to_string())?;
    let ScenarioKind::MultiAgent(m) = &cfg.scenario else {
        return Err("scenario is not multi-agent".into());
    };
    let min_h = adaptive.min_h().unwrap_or(f64::NAN);
    let worst_goal = m.goal_errors(&adaptive.final_state).iter().map(|e| e.1).fold(0.0, f64::max);
    let fixed_incompatible = matches!(fixed.status, RunStatus::Failure { reason: FailureReason::Incompatible, .. });
    let ok = adaptive.completed() && min_h >= 0.0 && worst_goal <= m.goal_tolerance && fixed_incompatible && secs <= 30.0;
    check(
        ok,
        format!(
            "adaptive {} with min h = {min_h:.3e}, worst goal error {worst_goal:.3}; fixed {} at {} s; {secs:.2} s",
            if adaptive.completed() { "completed" } else { "failed" },
            if fixed_incompatible { "infeasible" } else { "not infeasible" },
            fixed.time_to_failure()
        ),
    )
}

fn forward_invariance() -> Verdict {
    let logs = suite_logs().map_err(|e| e.to_string())?;
    let samples: usize = logs.iter().map(|l| l.feasible_records().count()).sum();
    let lowest = logs.iter().flat_map(|l| l.feasible_records().flat_map(|r| r.h.iter().copied())).fold(f64::INFINITY, f64::min);
    check(lowest >= -1e-9, format!("lowest h = {lowest:.3e} over {samples} feasible samples in {} runs", logs.len()))
}

fn determinism() -> Verdict {
    let render = || -> Result<Vec<String>, String> {
        suite_logs().map_err(|e| e.to_string())?.iter().map(|l| l.csv_string().map_err(|e| e.to_string())).collect()
    };
    let (a, b) = (render()?, render()?);
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    let bytes: usize = a.iter().map(String::len).sum();
    check(a.len() == b.len() && differing == 0, format!("{differing} of {} CSV logs differ ({bytes} bytes each pass)", a.len()))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("analytic CBF-QP matches the exact solver", analytic_matches_solver),
        ("HOCBF derived barriers match finite differences", hocbf_finite_differences),
        ("adaptive cruise control reproduction", acc_reproduction),
        ("corridor time-to-failure dominance", corridor_dominance),
        ("alpha shaping attains the grid minimum", shaping_grid_optimality),
        ("trust bounds and threshold continuity", trust_bounds),
        ("multi-agent scenario 1", multi_agent_scenario_1),
        ("forward invariance of feasible samples", forward_invariance),
        ("byte-identical reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
