use std::fmt;

use nalgebra::DVector;

/// `V` at one instant with the affine split `V̇ = p + Q·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovJet {
    pub value: f64,
    pub drift: f64,
    pub input: DVector<f64>,
}

/// Convergence objective relaxed in the controller by a slack `δ`.
pub trait LyapunovSpec: Send + Sync + fmt::Debug {
    fn jet(&self, t: f64, x: &DVector<f64>) -> LyapunovJet;
    /// Exponential rate `k` in `V̇ ≤ −kV + δ`.
    fn rate(&self) -> f64;
    /// Weight `M` on `δ²` in the controller cost.
    fn slack_weight(&self) -> f64;
}
