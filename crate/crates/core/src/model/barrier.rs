use std::fmt;

use nalgebra::DVector;

use super::{ControlAffineSystem, ModelError};

/// `h, ḣ, …, h^{(r−1)}` at one instant plus the affine split `h^{(r)} = a + B·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierJet {
    pub derivatives: Vec<f64>,
    pub drift: f64,
    pub input: DVector<f64>,
}

impl BarrierJet {
    pub fn relative_degree(&self) -> usize {
        self.derivatives.len()
    }

    pub fn value(&self) -> f64 {
        self.derivatives[0]
    }

    /// `h^{(r)}` under input `u`.
    pub fn top(&self, u: &DVector<f64>) -> f64 {
        self.drift + self.input.dot(u)
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        let ok = self.derivatives.iter().all(|v| v.is_finite()) && self.drift.is_finite() && self.input.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ModelError::NonFinite("barrier jet".into()))
        }
    }
}

/// A safety constraint `h(t, x) ≥ 0` with relative degree `r ≥ 1`.
///
/// Implementations return derivatives along the plant they were built for;
/// `h^{(j)}` for `j < r` must not depend on the input.
pub trait BarrierSpec: Send + Sync + fmt::Debug {
    fn relative_degree(&self) -> usize;
    fn jet(&self, t: f64, x: &DVector<f64>) -> BarrierJet;
    fn label(&self) -> String {
        "barrier".into()
    }
}

/// Worst central-difference mismatch between consecutive jet entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetAudit {
    pub max_error: f64,
    /// Order `j` at which the worst mismatch of `d/dt h^{(j)}` occurred.
    pub worst_order: usize,
}

/// Differentiate each `h^{(j)}` numerically along short trajectories under every
/// input in `inputs` and compare with the reported `h^{(j+1)}` (or `a + B u`).
///
/// Running with several inputs doubles as the input-independence check: a
/// lower-order entry that secretly depended on `u` would disagree for one of them.
pub fn audit_barrier_jet(
    barrier: &dyn BarrierSpec,
    system: &ControlAffineSystem,
    t: f64,
    x: &DVector<f64>,
    inputs: &[DVector<f64>],
    dt: f64,
) -> Result<JetAudit, ModelError> {
    let r = barrier.relative_degree();
    let jet = barrier.jet(t, x);
    jet.check_finite()?;
    if jet.relative_degree() != r {
        return Err(ModelError::Dimension(format!("jet has {} entries for relative degree {r}", jet.relative_degree())));
    }
    let mut audit = JetAudit { max_error: 0.0, worst_order: 0 };
    for u in inputs {
        let fwd = barrier.jet(t + dt, &system.rk4(t, x, u, dt));
        let bwd = barrier.jet(t - dt, &system.rk4(t, x, u, -dt));
        for j in 0..r {
            let fd = (fwd.derivatives[j] - bwd.derivatives[j]) / (2.0 * dt);
            let exact = if j + 1 < r { jet.derivatives[j + 1] } else { jet.top(u) };
            let err = (fd - exact).abs() / (1.0 + exact.abs());
            if err > audit.max_error {
                audit = JetAudit { max_error: err, worst_order: j };
            }
        }
    }
    Ok(audit)
}
