use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ModelError;
use crate::optim::{solve_lp, LinearProgram, LpOutcome};

/// Vector fields of a control-affine plant `ẋ = f(t, x) + g(x) u`.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    fn input_map(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Admissible inputs `{u : A u ≤ b}`, nonempty and bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl InputPolytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, ModelError> {
        let m = a.ncols();
        if a.nrows() != b.len() {
            return Err(ModelError::Dimension(format!("polytope has {} rows but {} offsets", a.nrows(), b.len())));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite("input polytope".into()));
        }
        let poly = Self { a, b };
        for i in 0..m {
            for sign in [1.0, -1.0] {
                let mut c = DVector::zeros(m);
                c[i] = sign;
                match poly.sup(&c)? {
                    Some(_) => {}
                    None => return Err(ModelError::UnboundedPolytope(i)),
                }
            }
        }
        Ok(poly)
    }

    /// Axis-aligned box `lo ≤ u ≤ hi`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self, ModelError> {
        if lo.len() != hi.len() {
            return Err(ModelError::Dimension("box bounds differ in length".into()));
        }
        let m = lo.len();
        let mut a = DMatrix::zeros(2 * m, m);
        let mut b = DVector::zeros(2 * m);
        for i in 0..m {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::new(a, b)
    }

    /// Symmetric box `|u_i| ≤ bound_i`.
    pub fn symmetric(bound: &[f64]) -> Result<Self, ModelError> {
        let lo: Vec<f64> = bound.iter().map(|b| -b).collect();
        Self::boxed(&lo, bound)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        (&self.a * u - &self.b).iter().all(|&r| r <= tol)
    }

    /// `sup_{u ∈ 𝒰} cᵀu`, or `None` when unbounded.
    pub fn sup(&self, c: &DVector<f64>) -> Result<Option<f64>, ModelError> {
        let lp = LinearProgram::new(-c, self.a.clone(), self.b.clone())?;
        match solve_lp(&lp)? {
            LpOutcome::Optimal(s) => Ok(Some(-s.objective)),
            LpOutcome::Unbounded => Ok(None),
            LpOutcome::Infeasible => Err(ModelError::EmptyPolytope),
        }
    }
}

/// A plant together with its admissible input set.
#[derive(Debug, Clone)]
pub struct ControlAffineSystem {
    dynamics: Arc<dyn Dynamics>,
    inputs: InputPolytope,
}

impl ControlAffineSystem {
    pub fn new(dynamics: Arc<dyn Dynamics>, inputs: InputPolytope) -> Result<Self, ModelError> {
        if inputs.dim() != dynamics.input_dim() {
            return Err(ModelError::Dimension(format!("polytope has {} inputs, plant has {}", inputs.dim(), dynamics.input_dim())));
        }
        Ok(Self { dynamics, inputs })
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.dynamics.input_dim()
    }

    pub fn inputs(&self) -> &InputPolytope {
        &self.inputs
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    pub fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.dynamics.drift(t, x)
    }

    pub fn input_map(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.dynamics.input_map(x)
    }

    pub fn xdot(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.drift(t, x) + self.input_map(x) * u
    }

    /// One classical RK4 step with `u` held constant.
    pub fn rk4(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> DVector<f64> {
        let k1 = self.xdot(t, x, u);
        let k2 = self.xdot(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)), u);
        let k3 = self.xdot(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)), u);
        let k4 = self.xdot(t + dt, &(x + &k3 * dt), u);
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }

    /// `substeps` RK4 steps covering `dt`.
    pub fn integrate(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>, dt: f64, substeps: usize) -> DVector<f64> {
        let n = substeps.max(1);
        let h = dt / n as f64;
        let mut x = x.clone();
        for i in 0..n {
            x = self.rk4(t + i as f64 * h, &x, u, h);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Integrator;

    impl Dynamics for Integrator {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn drift(&self, _t: f64, _x: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(1)
        }
        fn input_map(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::identity(1, 1)
        }
    }

    #[test]
    fn box_sup_and_contains() {
        let p = InputPolytope::boxed(&[-1.0, 0.0], &[1.0, 2.0]).unwrap();
        let s = p.sup(&DVector::from_vec(vec![1.0, -1.0])).unwrap().unwrap();
        assert_eq!(s, 1.0);
        assert!(p.contains(&DVector::from_vec(vec![0.0, 1.0]), 0.0));
        assert!(!p.contains(&DVector::from_vec(vec![0.0, 3.0]), 1e-9));
    }

    #[test]
    fn rejects_empty_and_unbounded() {
        assert_eq!(InputPolytope::boxed(&[1.0], &[0.0]), Err(ModelError::EmptyPolytope));
        let half = InputPolytope::new(DMatrix::from_row_slice(1, 1, &[1.0]), DVector::from_vec(vec![1.0]));
        assert_eq!(half, Err(ModelError::UnboundedPolytope(0)));
    }

    #[test]
    fn rk4_exact_on_constant_field() {
        let sys = ControlAffineSystem::new(Arc::new(Integrator), InputPolytope::symmetric(&[5.0]).unwrap()).unwrap();
        let x = sys.rk4(0.0, &DVector::from_vec(vec![0.3]), &DVector::from_vec(vec![1.0]), 0.1);
        assert!((x[0] - 0.4).abs() < 1e-15);
    }
}
