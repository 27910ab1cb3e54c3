//! Derived barrier stacks for the linear class-K family and the
//! input-affine constraint rows they contribute to the controller QP.
//!
//! Each derived barrier is kept as `ψ^k = Σ_j c_{k,j} h^{(j)}`. The
//! coefficients are products and sums of slopes `ν^i` and their derivatives,
//! so they are carried as truncated Taylor jets in time: every recursion step
//! `ψ^k = ψ̇^{k−1} + ν^k ψ^{k−1}` is then a shift plus a Leibniz product.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BarrierJet, BarrierSpec, ClassKChain, LyapunovSpec, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HocbfError {
    #[error("chain has {chain} levels but the barrier has relative degree {barrier}")]
    DegreeMismatch { chain: usize, barrier: usize },
    #[error("parametric class-K rows need relative degree 1, got {0}")]
    NotFirstOrder(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `c·z ≥ d`
    Ge,
    /// `c·z ≤ d`
    Le,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowTag {
    Barrier(usize),
    Lyapunov,
    Input(usize),
}

/// `c·z (≥|≤) d` over the controller's decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintRow {
    pub row: DVector<f64>,
    pub offset: f64,
    pub sense: Sense,
    pub tag: RowTag,
}

impl LinearConstraintRow {
    /// The row in `g·z ≤ w` form.
    pub fn as_le(&self) -> (DVector<f64>, f64) {
        match self.sense {
            Sense::Le => (self.row.clone(), self.offset),
            Sense::Ge => (-&self.row, -self.offset),
        }
    }

    /// Signed slack at `z`; nonnegative when satisfied.
    pub fn slack(&self, z: &DVector<f64>) -> f64 {
        let v = self.row.rows(0, self.row.len()).dot(&z.rows(0, self.row.len()));
        match self.sense {
            Sense::Ge => v - self.offset,
            Sense::Le => self.offset - v,
        }
    }

    /// Zero-extend to `len` decision variables.
    pub fn padded(&self, len: usize) -> Self {
        let mut row = DVector::zeros(len);
        row.rows_mut(0, self.row.len()).copy_from(&self.row);
        Self { row, ..self.clone() }
    }

    pub fn is_finite(&self) -> bool {
        self.offset.is_finite() && self.row.iter().all(|v| v.is_finite())
    }
}

/// Truncated Taylor jet: `d[i]` is the `i`-th time derivative.
#[derive(Debug, Clone, PartialEq)]
struct Jet(Vec<f64>);

impl Jet {
    fn constant(value: f64, depth: usize) -> Self {
        let mut d = vec![0.0; depth + 1];
        d[0] = value;
        Jet(d)
    }

    fn depth(&self) -> usize {
        self.0.len() - 1
    }

    fn derivative(&self) -> Jet {
        Jet(self.0[1..].to_vec())
    }

    fn truncated(&self, depth: usize) -> Jet {
        Jet(self.0[..=depth].to_vec())
    }

    fn add(&self, other: &Jet) -> Jet {
        let n = self.0.len().min(other.0.len());
        Jet((0..n).map(|i| self.0[i] + other.0[i]).collect())
    }

    /// Leibniz rule, truncated to the shallower operand.
    fn mul(&self, other: &Jet) -> Jet {
        let n = self.0.len().min(other.0.len());
        let mut out = vec![0.0; n];
        for (d, o) in out.iter_mut().enumerate() {
            let mut binom = 1.0;
            for e in 0..=d {
                *o += binom * self.0[e] * other.0[d - e];
                binom = binom * (d - e) as f64 / (e + 1) as f64;
            }
        }
        Jet(out)
    }
}

/// `ψ^0..ψ^{r−1}` at one instant with the affine split `ψ̇^{r−1} = a_ψ + B_ψ·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedBarrierStack {
    psi: Vec<f64>,
    /// `coef[k][j]`: jet of the coefficient of `h^{(j)}` in `ψ^k`, `j ≤ k`.
    coef: Vec<Vec<Jet>>,
    h: Vec<f64>,
    h_top_drift: f64,
    drift: f64,
    input: DVector<f64>,
}

impl DerivedBarrierStack {
    pub fn relative_degree(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self, k: usize) -> f64 {
        self.psi[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    /// `ψ^{r−1}`.
    pub fn top(&self) -> f64 {
        *self.psi.last().expect("nonempty stack")
    }

    /// Drift part `a_ψ` of `ψ̇^{r−1}`.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Input row `B_ψ` of `ψ̇^{r−1}`.
    pub fn input(&self) -> &DVector<f64> {
        &self.input
    }

    /// Barrier derivatives `h, …, h^{(r−1)}` the stack was built from.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Coefficient of `h^{(j)}` in `ψ^k` (zero for `j > k`).
    pub fn coefficient(&self, k: usize, j: usize) -> f64 {
        if j > k {
            0.0
        } else {
            self.coef[k][j].0[0]
        }
    }

    /// Part of `ψ̇^k` due to the slopes changing: `Σ_j ċ_{k,j} h^{(j)}`.
    pub fn parameter_rate_part(&self, k: usize) -> f64 {
        (0..=k).map(|j| self.coef[k][j].0[1] * self.h[j]).sum()
    }

    /// `ψ̇^k` for `k < r − 1`, rebuilt from the coefficient jets.
    pub fn psi_dot(&self, k: usize) -> f64 {
        assert!(k + 1 < self.psi.len(), "ψ̇^{{r−1}} depends on the input; use psi_dot_top");
        self.parameter_rate_part(k) + (0..=k).map(|j| self.coef[k][j].0[0] * self.h[j + 1]).sum::<f64>()
    }

    /// `ψ̇^{r−1}` under input `u`.
    pub fn psi_dot_top(&self, u: &DVector<f64>) -> f64 {
        self.drift + self.input.dot(u)
    }

    /// Input-free part of `h^{(r)}` the stack was built from.
    pub fn h_top_drift(&self) -> f64 {
        self.h_top_drift
    }
}

/// Derived barriers of `barrier` at `(t, x)` for the slopes in `chain`.
pub fn derived_barriers(
    barrier: &dyn BarrierSpec,
    chain: &ClassKChain,
    t: f64,
    x: &DVector<f64>,
) -> Result<DerivedBarrierStack, HocbfError> {
    let jet = barrier.jet(t, x);
    derived_barriers_from_jet(&jet, chain)
}

pub fn derived_barriers_from_jet(jet: &BarrierJet, chain: &ClassKChain) -> Result<DerivedBarrierStack, HocbfError> {
    let r = jet.relative_degree();
    if chain.relative_degree() != r {
        return Err(HocbfError::DegreeMismatch { chain: chain.relative_degree(), barrier: r });
    }
    if jet.check_finite().is_err() {
        return Err(HocbfError::NonFinite("barrier jet"));
    }

    // coef[k] needs derivatives up to depth r − k.
    let mut coef: Vec<Vec<Jet>> = Vec::with_capacity(r);
    coef.push(vec![Jet::constant(1.0, r)]);
    for k in 1..r {
        let depth = r - k;
        let nu = Jet(chain.stack(k - 1).to_vec()).truncated(depth);
        let prev = &coef[k - 1];
        let mut row = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let mut c = Jet::constant(0.0, depth);
            if j < k {
                c = c.add(&prev[j].derivative());
                c = c.add(&nu.mul(&prev[j].truncated(depth)));
            }
            if j >= 1 {
                c = c.add(&prev[j - 1].truncated(depth));
            }
            row.push(c);
        }
        coef.push(row);
    }
    debug_assert!(coef.iter().enumerate().all(|(k, row)| row.iter().all(|c| c.depth() == r - k)));

    let h = jet.derivatives.clone();
    let psi: Vec<f64> = (0..r).map(|k| (0..=k).map(|j| coef[k][j].0[0] * h[j]).sum()).collect();

    let top = &coef[r - 1];
    let mut drift = 0.0;
    for (j, c) in top.iter().enumerate() {
        drift += c.0[1] * h[j];
        drift += if j + 1 < r { c.0[0] * h[j + 1] } else { c.0[0] * jet.drift };
    }
    let input = &jet.input * top[r - 1].0[0];
    let stack = DerivedBarrierStack { psi, coef, h, h_top_drift: jet.drift, drift, input };
    if !stack.drift.is_finite() || stack.psi.iter().any(|v| !v.is_finite()) {
        return Err(HocbfError::NonFinite("derived barrier stack"));
    }
    Ok(stack)
}

/// `B_ψ·u ≥ −a_ψ − ν_top·ψ^{r−1}`.
pub fn hocbf_row(stack: &DerivedBarrierStack, nu_top: f64, tag: RowTag) -> Result<LinearConstraintRow, HocbfError> {
    let row = LinearConstraintRow { row: stack.input.clone(), offset: -stack.drift - nu_top * stack.top(), sense: Sense::Ge, tag };
    if row.is_finite() {
        Ok(row)
    } else {
        Err(HocbfError::NonFinite("HOCBF row"))
    }
}

/// First-order row `ḣ ≥ −α(θ, h)` for a generic single-parameter class-K function.
pub fn parametric_row(
    jet: &BarrierJet,
    theta: f64,
    alpha: &dyn Fn(f64, f64) -> f64,
    tag: RowTag,
) -> Result<LinearConstraintRow, HocbfError> {
    if jet.relative_degree() != 1 {
        return Err(HocbfError::NotFirstOrder(jet.relative_degree()));
    }
    let row = LinearConstraintRow { row: jet.input.clone(), offset: -jet.drift - alpha(theta, jet.value()), sense: Sense::Ge, tag };
    if row.is_finite() {
        Ok(row)
    } else {
        Err(HocbfError::NonFinite("parametric row"))
    }
}

/// `p + Q·u ≤ −k·V + δ` over `(u, δ)`, written as `Q·u − δ ≤ −kV − p`.
pub fn clf_row(lyap: &dyn LyapunovSpec, t: f64, x: &DVector<f64>) -> Result<LinearConstraintRow, HocbfError> {
    let jet = lyap.jet(t, x);
    let m = jet.input.len();
    let mut row = DVector::zeros(m + 1);
    row.rows_mut(0, m).copy_from(&jet.input);
    row[m] = -1.0;
    let out = LinearConstraintRow { row, offset: -lyap.rate() * jet.value - jet.drift, sense: Sense::Le, tag: RowTag::Lyapunov };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(HocbfError::NonFinite("CLF row"))
    }
}
