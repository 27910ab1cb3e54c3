use nalgebra::{DMatrix, DVector};

use super::lp::{solve_lp, LinearProgram, LpOutcome};
use super::OptimError;

const MAX_CONDITION: f64 = 1e12;
const FEAS_TOL: f64 = 1e-11;
const STEP_TOL: f64 = 1e-14;
const ENUMERATION_MAX_DIM: usize = 6;

/// `min ½zᵀHz + qᵀz` subject to `G z ≤ w`, with `H` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    ineq: DMatrix<f64>,
    ineq_rhs: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>, ineq: DMatrix<f64>, ineq_rhs: DVector<f64>) -> Result<Self, OptimError> {
        let p = linear.len();
        if hessian.nrows() != p || hessian.ncols() != p {
            return Err(OptimError::Dimension(format!("hessian is {}x{}, expected {p}x{p}", hessian.nrows(), hessian.ncols())));
        }
        if ineq.nrows() != ineq_rhs.len() || (ineq.nrows() > 0 && ineq.ncols() != p) {
            return Err(OptimError::Dimension(format!(
                "inequality block is {}x{} with {} right-hand sides, expected {p} columns",
                ineq.nrows(),
                ineq.ncols(),
                ineq_rhs.len()
            )));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&hessian) || !linear.iter().all(|v| v.is_finite()) {
            return Err(OptimError::NonFinite("objective"));
        }
        if !finite(&ineq) || !ineq_rhs.iter().all(|v| v.is_finite()) {
            return Err(OptimError::NonFinite("constraints"));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-12 * (1.0 + hessian.amax()) {
            return Err(OptimError::NotSymmetric(asym));
        }
        let ineq = if ineq.nrows() == 0 { DMatrix::zeros(0, p) } else { ineq };
        Ok(Self { hessian, linear, ineq, ineq_rhs })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn rows(&self) -> usize {
        self.ineq.nrows()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn ineq(&self) -> &DMatrix<f64> {
        &self.ineq
    }

    pub fn ineq_rhs(&self) -> &DVector<f64> {
        &self.ineq_rhs
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + self.linear.dot(z)
    }

    /// Largest row violation `max_i (G_i z − w_i)`, clipped at zero.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let r = &self.ineq * z - &self.ineq_rhs;
        r.iter().fold(0.0_f64, |acc, &v| acc.max(v))
    }
}

/// KKT residuals measured on the diagonally scaled, row-normalized problem.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Indices of rows active at the optimum, ascending.
    pub active: Vec<usize>,
    /// Multipliers for `G z ≤ w`, one per row (zero for inactive rows).
    pub multipliers: DVector<f64>,
    pub objective: f64,
    pub kkt: KktResiduals,
}

/// Nonnegative row weights `y` with `Gᵀy = 0` and `wᵀy < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub weights: DVector<f64>,
}

impl FarkasCertificate {
    /// `(‖Gᵀy‖∞, wᵀy)` for the combined row.
    pub fn combination(&self, qp: &QuadraticProgram) -> (f64, f64) {
        let combo = qp.ineq.transpose() * &self.weights;
        (combo.amax(), qp.ineq_rhs.dot(&self.weights))
    }

    /// The combined row reads `≈0·z ≤ negative` up to the relative tolerance.
    pub fn verify(&self, qp: &QuadraticProgram, tol: f64) -> bool {
        if self.weights.len() != qp.rows() || self.weights.iter().any(|&y| y < 0.0) {
            return false;
        }
        let weight_scale: f64 = (0..qp.rows()).map(|i| self.weights[i] * qp.ineq.row(i).amax()).sum();
        let (combo, rhs) = self.combination(qp);
        combo <= tol * weight_scale.max(f64::MIN_POSITIVE) && rhs < 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal(QpSolution),
    Infeasible(FarkasCertificate),
}

impl QpOutcome {
    pub fn optimal(&self) -> Option<&QpSolution> {
        match self {
            QpOutcome::Optimal(s) => Some(s),
            QpOutcome::Infeasible(_) => None,
        }
    }
}

/// Problem after Jacobi scaling `z = D y` and unit-norm row normalization,
/// written as `n_iᵀ y ≥ b_i` for the dual active-set method.
struct Scaled {
    h: DMatrix<f64>,
    h_inv: DMatrix<f64>,
    q: DVector<f64>,
    d: DVector<f64>,
    normals: Vec<DVector<f64>>,
    b: Vec<f64>,
    /// Original row index and norm of each kept row.
    origin: Vec<(usize, f64)>,
}

/// Solve the QP exactly with a dual active-set (Goldfarb–Idnani) method.
///
/// Falls back to active-set enumeration for small problems if the dual
/// method stalls; infeasibility is confirmed by a Farkas certificate LP.
pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpOutcome, OptimError> {
    let p = qp.dim();
    let diag_min = (0..p).map(|i| qp.hessian[(i, i)]).fold(f64::INFINITY, f64::min);
    if p > 0 && diag_min <= 0.0 {
        let min_eig = qp.hessian.clone().symmetric_eigenvalues().min();
        return Err(OptimError::NotPositiveDefinite(min_eig));
    }
    let d = DVector::from_iterator(p, (0..p).map(|i| 1.0 / qp.hessian[(i, i)].sqrt()));
    let dm = DMatrix::from_diagonal(&d);
    let h = &dm * &qp.hessian * &dm;
    let h = (&h + h.transpose()) * 0.5;
    if p > 0 {
        let eig = h.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= 0.0 {
            return Err(OptimError::NotPositiveDefinite(lo));
        }
        if hi / lo > MAX_CONDITION {
            return Err(OptimError::IllConditioned(hi / lo));
        }
    }
    let h_inv = h.clone().cholesky().ok_or(OptimError::NotPositiveDefinite(0.0))?.inverse();
    let q = &dm * &qp.linear;

    let mut normals = Vec::new();
    let mut b = Vec::new();
    let mut origin = Vec::new();
    for i in 0..qp.rows() {
        let row: DVector<f64> = (qp.ineq.row(i).transpose()).component_mul(&d);
        let norm = row.norm();
        if norm <= 1e-14 {
            if qp.ineq_rhs[i] < -FEAS_TOL {
                let mut weights = DVector::zeros(qp.rows());
                weights[i] = 1.0;
                return Ok(QpOutcome::Infeasible(FarkasCertificate { weights }));
            }
            continue;
        }
        normals.push(-row / norm);
        b.push(-qp.ineq_rhs[i] / norm);
        origin.push((i, norm));
    }
    let sc = Scaled { h, h_inv, q, d, normals, b, origin };

    match dual_active_set(&sc) {
        Dual::Optimal { y, active, u } => Ok(QpOutcome::Optimal(finish(qp, &sc, y, &active, &u))),
        Dual::Infeasible => match farkas(qp, &sc)? {
            Some(cert) => Ok(QpOutcome::Infeasible(cert)),
            None => enumerate_or_fail(qp, &sc),
        },
        Dual::Stalled => {
            log::debug!("dual active-set stalled; falling back to enumeration");
            match enumerate_or_fail(qp, &sc) {
                Ok(out) => Ok(out),
                Err(_) => match farkas(qp, &sc)? {
                    Some(cert) => Ok(QpOutcome::Infeasible(cert)),
                    None => Err(OptimError::Dimension("active-set enumeration unavailable for p > 6".into())),
                },
            }
        }
    }
}

enum Dual {
    Optimal { y: DVector<f64>, active: Vec<usize>, u: Vec<f64> },
    Infeasible,
    Stalled,
}

fn dual_active_set(sc: &Scaled) -> Dual {
    let n_rows = sc.normals.len();
    let mut y = -&sc.h_inv * &sc.q;
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 20 * (n_rows + sc.q.len()) + 50;

    for _ in 0..max_iter {
        // Most violated row, lowest index on ties.
        let mut pick: Option<(usize, f64)> = None;
        for j in 0..n_rows {
            if active.contains(&j) {
                continue;
            }
            let s = sc.normals[j].dot(&y) - sc.b[j];
            if s < -FEAS_TOL * (1.0 + sc.b[j].abs()) && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((j, s));
            }
        }
        let Some((p, _)) = pick else {
            return Dual::Optimal { y, active, u };
        };
        let np = &sc.normals[p];
        let mut u_plus = 0.0;

        let mut inner = 0;
        loop {
            inner += 1;
            if inner > max_iter {
                return Dual::Stalled;
            }
            let (z, r) = match directions(sc, &active, np) {
                Some(v) => v,
                None => return Dual::Stalled,
            };
            // Partial step: largest dual step keeping active multipliers nonnegative.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (idx, &rj) in r.iter().enumerate() {
                if rj > STEP_TOL {
                    let ratio = u[idx] / rj;
                    if ratio < t1 || (ratio == t1 && drop.is_none_or(|d: usize| active[idx] < active[d])) {
                        t1 = ratio;
                        drop = Some(idx);
                    }
                }
            }
            let zn = z.dot(np);
            let t2 = if z.amax() > STEP_TOL && zn > STEP_TOL { -(np.dot(&y) - sc.b[p]) / zn } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Dual::Infeasible;
            }
            if t2.is_finite() {
                y += &z * t;
            }
            for (idx, rj) in r.iter().enumerate() {
                u[idx] -= t * rj;
            }
            u_plus += t;
            if t2 <= t1 {
                active.push(p);
                u.push(u_plus);
                break;
            }
            let k = drop.expect("partial step has a blocking row");
            active.remove(k);
            u.remove(k);
        }
    }
    Dual::Stalled
}

/// Primal step `z = H* n_p` and dual step `r = N* n_p` for the active set.
fn directions(sc: &Scaled, active: &[usize], np: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let hinv_np = &sc.h_inv * np;
    if active.is_empty() {
        return Some((hinv_np, DVector::zeros(0)));
    }
    let p = sc.q.len();
    let n = DMatrix::from_fn(p, active.len(), |i, j| sc.normals[active[j]][i]);
    let hinv_n = &sc.h_inv * &n;
    let w = n.transpose() * &hinv_n;
    let chol = w.cholesky()?;
    let r = chol.solve(&(n.transpose() * &hinv_np));
    if r.iter().any(|v| !v.is_finite()) || chol.l().diagonal().min() < 1e-7 {
        return None;
    }
    let z = &hinv_np - &hinv_n * &r;
    Some((z, r))
}

fn finish(qp: &QuadraticProgram, sc: &Scaled, y: DVector<f64>, active: &[usize], u: &[f64]) -> QpSolution {
    let z = y.component_mul(&sc.d);
    let mut multipliers = DVector::zeros(qp.rows());
    let mut act: Vec<usize> = Vec::with_capacity(active.len());
    for (k, &j) in active.iter().enumerate() {
        let (orig, norm) = sc.origin[j];
        multipliers[orig] = u[k].max(0.0) / norm;
        act.push(orig);
    }
    act.sort_unstable();

    // Residuals of the scaled problem.
    let mut grad = &sc.h * &y + &sc.q;
    let mut primal = 0.0_f64;
    let mut dual = 0.0_f64;
    let mut comp = 0.0_f64;
    for (j, n) in sc.normals.iter().enumerate() {
        let (orig, norm) = sc.origin[j];
        let lam = multipliers[orig] * norm;
        grad -= n * lam;
        let slack = n.dot(&y) - sc.b[j];
        let scale = 1.0 + sc.b[j].abs();
        primal = primal.max(-slack / scale);
        dual = dual.max(-lam);
        comp = comp.max((lam * slack).abs() / scale);
    }
    let stat_scale = 1.0 + sc.q.amax();
    let kkt = KktResiduals { stationarity: grad.amax() / stat_scale, primal: primal.max(0.0), dual: dual.max(0.0), complementarity: comp };
    let objective = qp.objective(&z);
    QpSolution { z, active: act, multipliers, objective, kkt }
}

/// Find `y ≥ 0, Σy = 1, Nᵀy = 0` minimizing `−bᵀy` on the normalized rows.
fn farkas(qp: &QuadraticProgram, sc: &Scaled) -> Result<Option<FarkasCertificate>, OptimError> {
    let k = sc.normals.len();
    let p = sc.q.len();
    if k == 0 {
        return Ok(None);
    }
    let cost = DVector::from_iterator(k, sc.b.iter().map(|b| -b));
    let mut eq = DMatrix::zeros(p + 1, k);
    let mut rhs = DVector::zeros(p + 1);
    for j in 0..k {
        for i in 0..p {
            eq[(i, j)] = sc.normals[j][i];
        }
        eq[(p, j)] = 1.0;
    }
    rhs[p] = 1.0;
    let lp = LinearProgram::new(cost, DMatrix::zeros(0, k), DVector::zeros(0))?
        .with_bounds(vec![0.0; k], vec![f64::INFINITY; k])?
        .with_equalities(eq, rhs)?;
    match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) if sol.objective < -FEAS_TOL => {
            let mut weights = DVector::zeros(qp.rows());
            for (j, &(orig, norm)) in sc.origin.iter().enumerate() {
                weights[orig] = sol.z[j].max(0.0) / norm;
            }
            Ok(Some(FarkasCertificate { weights }))
        }
        _ => Ok(None),
    }
}

fn enumerate_or_fail(qp: &QuadraticProgram, sc: &Scaled) -> Result<QpOutcome, OptimError> {
    let p = sc.q.len();
    if p > ENUMERATION_MAX_DIM {
        return Err(OptimError::Dimension(format!("active-set enumeration supports at most {ENUMERATION_MAX_DIM} variables, got {p}")));
    }
    let n_rows = sc.normals.len();
    for size in 0..=p.min(n_rows) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            if let Some((y, u)) = solve_kkt(sc, &subset) {
                let feasible = (0..n_rows).all(|j| sc.normals[j].dot(&y) - sc.b[j] >= -1e-9 * (1.0 + sc.b[j].abs()));
                if feasible && u.iter().all(|&v| v >= -1e-10) {
                    return Ok(QpOutcome::Optimal(finish(qp, sc, y, &subset, &u)));
                }
            }
            if !next_combination(&mut subset, n_rows) {
                break;
            }
        }
    }
    match farkas(qp, sc)? {
        Some(cert) => Ok(QpOutcome::Infeasible(cert)),
        None => Err(OptimError::Dimension("no consistent active set found".into())),
    }
}

fn solve_kkt(sc: &Scaled, subset: &[usize]) -> Option<(DVector<f64>, Vec<f64>)> {
    let p = sc.q.len();
    let k = subset.len();
    let mut kkt = DMatrix::zeros(p + k, p + k);
    let mut rhs = DVector::zeros(p + k);
    kkt.view_mut((0, 0), (p, p)).copy_from(&sc.h);
    for i in 0..p {
        rhs[i] = -sc.q[i];
    }
    for (c, &j) in subset.iter().enumerate() {
        for i in 0..p {
            kkt[(i, p + c)] = -sc.normals[j][i];
            kkt[(p + c, i)] = sc.normals[j][i];
        }
        rhs[p + c] = sc.b[j];
    }
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let y = sol.rows(0, p).into_owned();
    let u = sol.rows(p, k).iter().copied().collect();
    Some((y, u))
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
