use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::AdaptError;
use crate::hocbf::{clf_row, derived_barriers, hocbf_row, DerivedBarrierStack, LinearConstraintRow, RowTag, Sense};
use crate::model::{BarrierSpec, ClassKChain, ControlAffineSystem, LyapunovSpec};
use crate::optim::{solve_qp, KktResiduals, QpOutcome, QuadraticProgram};

/// Nominal input `u_r(t, x)`.
pub type ReferenceFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// CBF-CLF-QP controller:
/// `min ½(u − u_r)ᵀW(u − u_r) + ½Mδ²` subject to every HOCBF row, the optional
/// CLF row and the input set.
#[derive(Clone)]
pub struct CbfController {
    pub system: ControlAffineSystem,
    pub barriers: Vec<Arc<dyn BarrierSpec>>,
    pub lyapunov: Option<Arc<dyn LyapunovSpec>>,
    pub reference: ReferenceFn,
    pub input_weight: DMatrix<f64>,
}

impl std::fmt::Debug for CbfController {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CbfController")
            .field("system", &self.system)
            .field("barriers", &self.barriers)
            .field("lyapunov", &self.lyapunov)
            .finish_non_exhaustive()
    }
}

impl CbfController {
    pub fn new(system: ControlAffineSystem, reference: ReferenceFn) -> Self {
        let m = system.input_dim();
        Self { system, barriers: Vec::new(), lyapunov: None, reference, input_weight: DMatrix::identity(m, m) }
    }

    pub fn with_barrier(mut self, barrier: Arc<dyn BarrierSpec>) -> Self {
        self.barriers.push(barrier);
        self
    }

    pub fn with_lyapunov(mut self, lyapunov: Arc<dyn LyapunovSpec>) -> Self {
        self.lyapunov = Some(lyapunov);
        self
    }

    pub fn with_input_weight(mut self, weight: DMatrix<f64>) -> Self {
        self.input_weight = weight;
        self
    }

    pub fn stacks(&self, chains: &[ClassKChain], t: f64, x: &DVector<f64>) -> Result<Vec<DerivedBarrierStack>, AdaptError> {
        if chains.len() != self.barriers.len() {
            return Err(AdaptError::Config(format!("{} chains for {} barriers", chains.len(), self.barriers.len())));
        }
        self.barriers.iter().zip(chains).map(|(b, c)| Ok(derived_barriers(b.as_ref(), c, t, x)?)).collect()
    }
}

/// Applied input and the data that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    pub u: DVector<f64>,
    pub u_ref: DVector<f64>,
    /// CLF slack (zero without a CLF).
    pub delta: f64,
    pub stacks: Vec<DerivedBarrierStack>,
    /// Every QP row over `(u, δ)`: barriers, then CLF, then input set.
    pub rows: Vec<LinearConstraintRow>,
    pub kkt: KktResiduals,
}

impl ControlSolution {
    /// Largest violation of any row at the returned decision.
    pub fn max_row_violation(&self) -> f64 {
        let mut z = DVector::zeros(self.u.len() + 1);
        z.rows_mut(0, self.u.len()).copy_from(&self.u);
        z[self.u.len()] = self.delta;
        self.rows.iter().map(|r| (-r.slack(&z)).max(0.0)).fold(0.0, f64::max)
    }
}

/// Solve the controller QP at `(t, x)` with the slopes in `chains`.
pub fn solve_controller(ctrl: &CbfController, chains: &[ClassKChain], t: f64, x: &DVector<f64>) -> Result<ControlSolution, AdaptError> {
    let m = ctrl.system.input_dim();
    let stacks = ctrl.stacks(chains, t, x)?;
    let u_ref = (ctrl.reference)(t, x);
    if u_ref.len() != m || u_ref.iter().any(|v| !v.is_finite()) {
        return Err(AdaptError::Domain("reference input has wrong size or is not finite".into()));
    }
    let with_slack = ctrl.lyapunov.is_some();
    let p = m + usize::from(with_slack);

    let mut rows = Vec::new();
    for (i, (s, c)) in stacks.iter().zip(chains).enumerate() {
        let top = c.nu(c.relative_degree() - 1);
        rows.push(hocbf_row(s, top, RowTag::Barrier(i))?.padded(p));
    }
    if let Some(l) = &ctrl.lyapunov {
        rows.push(clf_row(l.as_ref(), t, x)?);
    }
    let poly = ctrl.system.inputs();
    for i in 0..poly.a().nrows() {
        rows.push(
            LinearConstraintRow { row: poly.a().row(i).transpose(), offset: poly.b()[i], sense: Sense::Le, tag: RowTag::Input(i) }
                .padded(p),
        );
    }

    let mut h = DMatrix::zeros(p, p);
    h.view_mut((0, 0), (m, m)).copy_from(&ctrl.input_weight);
    let mut q = DVector::zeros(p);
    q.rows_mut(0, m).copy_from(&(-(&ctrl.input_weight * &u_ref)));
    if let Some(l) = &ctrl.lyapunov {
        h[(m, m)] = l.slack_weight();
    }
    let mut g = DMatrix::zeros(rows.len(), p);
    let mut w = DVector::zeros(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let (gi, wi) = r.as_le();
        g.row_mut(i).copy_from(&gi.transpose());
        w[i] = wi;
    }
    let qp = QuadraticProgram::new(h, q, g, w)?;
    match solve_qp(&qp)? {
        QpOutcome::Optimal(sol) => {
            let u = sol.z.rows(0, m).into_owned();
            let delta = if with_slack { sol.z[m] } else { 0.0 };
            Ok(ControlSolution { u, u_ref, delta, stacks, rows, kkt: sol.kkt })
        }
        QpOutcome::Infeasible(_) => Err(AdaptError::Incompatible),
    }
}
