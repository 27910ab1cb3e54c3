use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::Dynamics;

/// `ẋ = u` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleIntegrator {
    pub dim: usize,
}

impl Dynamics for SingleIntegrator {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _t: f64, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn input_map(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
}

/// State `(p, v)` with `ṗ = v`, `v̇ = u`, each of size `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntegrator {
    pub dim: usize,
}

impl Dynamics for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2 * self.dim
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut f = DVector::zeros(2 * self.dim);
        f.rows_mut(0, self.dim).copy_from(&x.rows(self.dim, self.dim));
        f
    }
    fn input_map(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(2 * self.dim, self.dim);
        g.view_mut((self.dim, 0), (self.dim, self.dim)).fill_with_identity();
        g
    }
}

/// Planar unicycle, state `(x, y, θ)`, input `(v, ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Unicycle;

impl Dynamics for Unicycle {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn drift(&self, _t: f64, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(3)
    }
    fn input_map(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (s, c) = x[2].sin_cos();
        DMatrix::from_row_slice(3, 2, &[c, 0.0, s, 0.0, 0.0, 1.0])
    }
}

/// Leader acceleration: decelerates for the first ten seconds, then coasts.
pub fn leader_accel(t: f64) -> f64 {
    if t < 10.0 {
        -0.6 * (1.0 - (1.0 / (2.0 * (10.0 - t))).tanh())
    } else {
        0.0
    }
}

/// Vehicle-following parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccParams {
    /// Ego mass (kg).
    pub mass: f64,
    /// Rolling resistance coefficients `F_r(v) = f0·sign(v) + f1·v + f2·v²`.
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub gravity: f64,
    /// Input bound `|u| ≤ c·M·g`.
    pub accel_coeff: f64,
}

impl AccParams {
    pub fn resistance(&self, v: f64) -> f64 {
        let sign = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.f0 * sign + self.f1 * v + self.f2 * v * v
    }

    pub fn max_force(&self) -> f64 {
        self.accel_coeff * self.mass * self.gravity
    }
}

/// State `(v, v_L, D)`: ego speed, leader speed and gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccPlant {
    pub params: AccParams,
}

impl Dynamics for AccPlant {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        DVector::from_vec(vec![-p.resistance(x[0]) / p.mass, leader_accel(t), x[1] - x[0]])
    }
    fn input_map(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 1, &[1.0 / self.params.mass, 0.0, 0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn leader_law() {
        assert_abs_diff_eq!(leader_accel(0.0), -0.6 * (1.0 - 0.05f64.tanh()), epsilon = 1e-15);
        assert_abs_diff_eq!(leader_accel(0.0), -0.57002, epsilon = 1e-5);
        assert_eq!(leader_accel(10.0), 0.0);
        assert_eq!(leader_accel(42.0), 0.0);
        assert!(leader_accel(10.0 - 1e-9).abs() < 1e-12);
    }

    #[test]
    fn resistance_at_cruise() {
        let p = AccParams { mass: 1650.0, f0: 0.1, f1: 5.0, f2: 0.25, gravity: 9.81, accel_coeff: 0.4 };
        assert_abs_diff_eq!(p.resistance(20.0), 200.1, epsilon = 1e-12);
        let plant = AccPlant { params: p };
        let f = plant.drift(0.0, &DVector::from_vec(vec![20.0, 10.0, 100.0]));
        assert_abs_diff_eq!(f[0], -200.1 / 1650.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[2], -10.0, epsilon = 1e-15);
    }

    #[test]
    fn unicycle_moves_along_heading() {
        let g = Unicycle.input_map(&DVector::from_vec(vec![0.0, 0.0, std::f64::consts::FRAC_PI_2]));
        assert_abs_diff_eq!(g[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(1, 0)], 1.0, epsilon = 1e-15);
        assert_eq!(g[(2, 1)], 1.0);
    }
}
