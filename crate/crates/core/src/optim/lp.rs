use nalgebra::{DMatrix, DVector};

use super::OptimError;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 50_000;

/// `min cᵀz` subject to `G z ≤ w`, `E z = e` and per-variable bounds.
///
/// Bounds default to the free variable `(-∞, ∞)`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    cost: DVector<f64>,
    ineq: DMatrix<f64>,
    ineq_rhs: DVector<f64>,
    eq: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(cost: DVector<f64>, ineq: DMatrix<f64>, ineq_rhs: DVector<f64>) -> Result<Self, OptimError> {
        let n = cost.len();
        if ineq.ncols() != n && ineq.nrows() > 0 {
            return Err(OptimError::Dimension(format!("inequality matrix has {} columns, expected {n}", ineq.ncols())));
        }
        if ineq.nrows() != ineq_rhs.len() {
            return Err(OptimError::Dimension(format!("{} inequality rows but {} right-hand sides", ineq.nrows(), ineq_rhs.len())));
        }
        if !cost.iter().chain(ineq.iter()).chain(ineq_rhs.iter()).all(|v| v.is_finite()) {
            return Err(OptimError::NonFinite("linear program"));
        }
        let ineq = if ineq.nrows() == 0 { DMatrix::zeros(0, n) } else { ineq };
        Ok(Self {
            cost,
            ineq,
            ineq_rhs,
            eq: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        })
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimError> {
        let n = self.cost.len();
        if lower.len() != n || upper.len() != n {
            return Err(OptimError::Dimension(format!("bounds must have length {n}")));
        }
        if lower.iter().chain(upper.iter()).any(|v| v.is_nan()) {
            return Err(OptimError::NonFinite("variable bounds"));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn with_equalities(mut self, eq: DMatrix<f64>, eq_rhs: DVector<f64>) -> Result<Self, OptimError> {
        let n = self.cost.len();
        if eq.nrows() != eq_rhs.len() || (eq.nrows() > 0 && eq.ncols() != n) {
            return Err(OptimError::Dimension("equality block shape".into()));
        }
        if !eq.iter().chain(eq_rhs.iter()).all(|v| v.is_finite()) {
            return Err(OptimError::NonFinite("equality block"));
        }
        self.eq = if eq.nrows() == 0 { DMatrix::zeros(0, n) } else { eq };
        self.eq_rhs = eq_rhs;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.cost.len()
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// z = lo + y
    Shift { col: usize, lo: f64 },
    /// z = hi - y
    Flip { col: usize, hi: f64 },
    /// z = y⁺ - y⁻
    Split { pos: usize, neg: usize },
}

/// Solve with a two-phase dense tableau simplex using Bland's rule
/// (lowest-index entering column, lowest-index leaving basic variable on ties).
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, OptimError> {
    let n = lp.dim();
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] {
            return Ok(LpOutcome::Infeasible);
        }
    }

    // Map original variables onto nonnegative ones.
    let mut maps = Vec::with_capacity(n);
    let mut ny = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ny, lo });
            if hi.is_finite() {
                bound_rows.push((ny, hi - lo));
            }
            ny += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Flip { col: ny, hi });
            ny += 1;
        } else {
            maps.push(VarMap::Split { pos: ny, neg: ny + 1 });
            ny += 2;
        }
    }

    // Express a row over z as a row over y plus a constant.
    let transform_row = |row: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; ny];
        let mut constant = 0.0;
        for (j, &a) in row.iter().enumerate() {
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    out[col] += a;
                    constant += a * lo;
                }
                VarMap::Flip { col, hi } => {
                    out[col] -= a;
                    constant += a * hi;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        (out, constant)
    };

    // Rows: (coefficients over y, rhs, has_slack)
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for i in 0..lp.ineq.nrows() {
        let row: Vec<f64> = lp.ineq.row(i).iter().copied().collect();
        let (coef, c) = transform_row(&row);
        rows.push((coef, lp.ineq_rhs[i] - c, true));
    }
    for &(col, width) in &bound_rows {
        let mut coef = vec![0.0; ny];
        coef[col] = 1.0;
        rows.push((coef, width, true));
    }
    for i in 0..lp.eq.nrows() {
        let row: Vec<f64> = lp.eq.row(i).iter().copied().collect();
        let (coef, c) = transform_row(&row);
        rows.push((coef, lp.eq_rhs[i] - c, false));
    }
    let (cost_y, cost_const) = transform_row(lp.cost.as_slice());

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.2).count();
    // Columns: y | slacks | artificials
    let mut slack_col = vec![None; m];
    let mut next = ny;
    for (i, r) in rows.iter().enumerate() {
        if r.2 {
            slack_col[i] = Some(next);
            next += 1;
        }
    }
    let mut needs_art = vec![false; m];
    for (i, r) in rows.iter().enumerate() {
        needs_art[i] = !(r.2 && r.1 >= 0.0);
    }
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let n_cols = ny + n_slack + n_art;
    let first_art = ny + n_slack;

    let mut tab = Tableau { a: DMatrix::zeros(m, n_cols), rhs: DVector::zeros(m), basis: vec![0; m] };
    let mut art = first_art;
    for (i, (coef, rhs, _)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for (j, &c) in coef.iter().enumerate() {
            tab.a[(i, j)] = sign * c;
        }
        if let Some(s) = slack_col[i] {
            tab.a[(i, s)] = sign;
        }
        tab.rhs[i] = sign * rhs;
        if needs_art[i] {
            tab.a[(i, art)] = 1.0;
            tab.basis[i] = art;
            art += 1;
        } else {
            tab.basis[i] = slack_col[i].expect("slack basis");
        }
    }

    let scale = 1.0 + tab.rhs.amax();

    // Phase I
    if n_art > 0 {
        let mut c1 = vec![0.0; n_cols];
        for c in c1.iter_mut().skip(first_art) {
            *c = 1.0;
        }
        match tab.optimize(&c1, n_cols)? {
            PhaseResult::Optimal => {}
            PhaseResult::Unbounded => unreachable!("phase one objective is bounded below"),
        }
        let infeas: f64 = (0..m).filter(|&i| tab.basis[i] >= first_art).map(|i| tab.rhs[i]).sum();
        if infeas > 1e-9 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] >= first_art {
                if let Some(j) = (0..first_art).find(|&j| tab.a[(i, j)].abs() > 1e-9) {
                    tab.pivot(i, j);
                } else {
                    // Redundant row; zero it so it never limits a ratio test.
                    for j in 0..n_cols {
                        tab.a[(i, j)] = 0.0;
                    }
                    tab.rhs[i] = 0.0;
                }
            }
        }
    }

    // Phase II over non-artificial columns.
    let mut c2 = vec![0.0; n_cols];
    c2[..ny].copy_from_slice(&cost_y);
    match tab.optimize(&c2, first_art)? {
        PhaseResult::Unbounded => return Ok(LpOutcome::Unbounded),
        PhaseResult::Optimal => {}
    }

    let mut y = vec![0.0; n_cols];
    for i in 0..m {
        y[tab.basis[i]] = tab.rhs[i];
    }
    let mut z = DVector::zeros(n);
    for (j, map) in maps.iter().enumerate() {
        z[j] = match *map {
            VarMap::Shift { col, lo } => lo + y[col],
            VarMap::Flip { col, hi } => hi - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        };
    }
    let objective = lp.cost.dot(&z);
    debug_assert!(
        (objective - (cost_const + cost_y.iter().zip(&y).map(|(c, v)| c * v).sum::<f64>())).abs() < 1e-6 * (1.0 + objective.abs())
    );
    Ok(LpOutcome::Optimal(LpSolution { z, objective }))
}

enum PhaseResult {
    Optimal,
    Unbounded,
}

struct Tableau {
    a: DMatrix<f64>,
    rhs: DVector<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[(row, col)];
        let n = self.a.ncols();
        for j in 0..n {
            self.a[(row, j)] /= p;
        }
        self.rhs[row] /= p;
        for i in 0..self.a.nrows() {
            if i == row {
                continue;
            }
            let f = self.a[(i, col)];
            if f != 0.0 {
                for j in 0..n {
                    let v = self.a[(row, j)];
                    if v != 0.0 {
                        self.a[(i, j)] -= f * v;
                    }
                }
                self.rhs[i] -= f * self.rhs[row];
                if self.rhs[i].abs() < 1e-14 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Minimize `cᵀy` over columns `< allowed` with Bland's rule.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<PhaseResult, OptimError> {
        let m = self.a.nrows();
        for _ in 0..MAX_PIVOTS {
            // Reduced costs d_j = c_j - c_Bᵀ a_j (tableau is kept in canonical form).
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..m {
                    d -= cost[self.basis[i]] * self.a[(i, j)];
                }
                if d < -COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(PhaseResult::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.a[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r]) {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Ok(PhaseResult::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(OptimError::IterationLimit)
    }
}
