use serde::{Deserialize, Serialize};

use super::ModelError;

/// Slopes `ν^k` of linear class-K functions `α^k(s) = ν^k s`, one per derived
/// barrier level, each with its stored derivative stack.
///
/// Level `i` (that is `k = i + 1`) stores `ν, ν̇, …` with `r − i` entries; its
/// designed input is the next derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassKChain {
    stacks: Vec<Vec<f64>>,
    nu_min: f64,
    nu_max: f64,
}

impl ClassKChain {
    /// Chain at rest (all derivatives zero) with slopes `initial[i]` for level `i`.
    pub fn new(initial: &[f64], nu_min: f64) -> Result<Self, ModelError> {
        let r = initial.len();
        let stacks = initial
            .iter()
            .enumerate()
            .map(|(i, &nu)| {
                let mut s = vec![0.0; r - i];
                s[0] = nu;
                s
            })
            .collect();
        Self::from_stacks(stacks, nu_min, f64::INFINITY)
    }

    pub fn from_stacks(stacks: Vec<Vec<f64>>, nu_min: f64, nu_max: f64) -> Result<Self, ModelError> {
        let r = stacks.len();
        if r == 0 {
            return Err(ModelError::InvalidChain("relative degree must be at least 1".into()));
        }
        if !(nu_min >= 0.0) || nu_max.is_nan() || nu_max < nu_min {
            return Err(ModelError::InvalidChain(format!("bounds must satisfy 0 <= nu_min <= nu_max, got [{nu_min}, {nu_max}]")));
        }
        for (i, s) in stacks.iter().enumerate() {
            if s.len() != r - i {
                return Err(ModelError::InvalidChain(format!("level {i} stores {} entries, expected {}", s.len(), r - i)));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite(format!("chain level {i}")));
            }
            if s[0] < nu_min || s[0] > nu_max {
                return Err(ModelError::InvalidChain(format!("level {i} slope {} outside [{nu_min}, {nu_max}]", s[0])));
            }
        }
        Ok(Self { stacks, nu_min, nu_max })
    }

    pub fn with_max(self, nu_max: f64) -> Result<Self, ModelError> {
        Self::from_stacks(self.stacks, self.nu_min, nu_max)
    }

    pub fn relative_degree(&self) -> usize {
        self.stacks.len()
    }

    pub fn nu(&self, level: usize) -> f64 {
        self.stacks[level][0]
    }

    pub fn stack(&self, level: usize) -> &[f64] {
        &self.stacks[level]
    }

    pub fn nu_min(&self) -> f64 {
        self.nu_min
    }

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    /// Slopes of every level, lowest first.
    pub fn slopes(&self) -> Vec<f64> {
        self.stacks.iter().map(|s| s[0]).collect()
    }

    /// Advance one level with top derivative `input` over `dt`, then apply the bounds.
    pub fn advance_level(&mut self, level: usize, input: f64, dt: f64) -> Result<(), ModelError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ModelError::InvalidChain(format!("step must be positive, got {dt}")));
        }
        if !input.is_finite() {
            return Err(ModelError::NonFinite(format!("top derivative input for level {level}")));
        }
        let s = &mut self.stacks[level];
        let len = s.len();
        let old = s.clone();
        for j in 0..len {
            let mut acc = 0.0;
            let mut coef = 1.0;
            for (m, &v) in old.iter().enumerate().skip(j) {
                if m > j {
                    coef *= dt / (m - j) as f64;
                }
                acc += v * coef;
            }
            coef *= dt / (len - j) as f64;
            s[j] = acc + input * coef;
        }
        if s[0] < self.nu_min || s[0] > self.nu_max {
            s[0] = s[0].clamp(self.nu_min, self.nu_max);
            s[1..].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(())
    }
}

/// Advance every level of the chain by `dt` under its designed top derivative.
///
/// Each level is a pure integrator chain, so the update is an exact polynomial.
/// A slope leaving `[ν_min, ν_max]` is clamped and its stored derivatives zeroed.
pub fn integrate_theta_chain(chain: &ClassKChain, top_inputs: &[f64], dt: f64) -> Result<ClassKChain, ModelError> {
    if top_inputs.len() != chain.relative_degree() {
        return Err(ModelError::Dimension(format!("{} top inputs for {} levels", top_inputs.len(), chain.relative_degree())));
    }
    let mut next = chain.clone();
    for (level, &w) in top_inputs.iter().enumerate() {
        next.advance_level(level, w, dt)?;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pair(nu: f64, rate: f64, nu_min: f64) -> ClassKChain {
        ClassKChain::from_stacks(vec![vec![nu, rate], vec![0.5]], nu_min, f64::INFINITY).unwrap()
    }

    #[test]
    fn double_integrator_update() {
        let c = integrate_theta_chain(&pair(1.0, 0.5, 0.0), &[0.0, 0.0], 0.1).unwrap();
        assert_abs_diff_eq!(c.stack(0)[0], 1.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c.stack(0)[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_input_at_rest_is_fixed() {
        let c0 = pair(0.8, 0.0, 0.0);
        for dt in [1e-3, 0.1, 7.0] {
            assert_eq!(integrate_theta_chain(&c0, &[0.0, 0.0], dt).unwrap(), c0);
        }
    }

    #[test]
    fn floor_zeroes_derivatives() {
        let c = integrate_theta_chain(&pair(0.01, -10.0, 0.0), &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(c.stack(0), &[0.0, 0.0]);
    }

    #[test]
    fn ceiling_zeroes_derivatives() {
        let c = pair(1.0, 5.0, 0.0).with_max(1.2).unwrap();
        let c = integrate_theta_chain(&c, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(c.stack(0), &[1.2, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let c = pair(1.0, 0.0, 0.0);
        assert!(matches!(integrate_theta_chain(&c, &[f64::NAN, 0.0], 0.1), Err(ModelError::NonFinite(_))));
        assert!(integrate_theta_chain(&c, &[0.0, 0.0], 0.0).is_err());
        assert!(integrate_theta_chain(&c, &[0.0], 0.1).is_err());
        assert!(ClassKChain::from_stacks(vec![vec![1.0], vec![1.0]], 0.0, 1.0).is_err());
        assert!(ClassKChain::new(&[0.1], 0.2).is_err());
    }

    proptest! {
        #[test]
        fn halving_composes_exactly(
            nu in 1.0f64..5.0,
            d1 in -1.0f64..1.0,
            d2 in -1.0f64..1.0,
            w0 in -1.0f64..1.0,
            w1 in -1.0f64..1.0,
            dt in 1e-3f64..0.2,
        ) {
            let c = ClassKChain::from_stacks(vec![vec![nu, d1, d2], vec![nu, d1], vec![nu]], 0.0, f64::INFINITY).unwrap();
            let whole = integrate_theta_chain(&c, &[w0, w1, w0], dt).unwrap();
            let half = integrate_theta_chain(&c, &[w0, w1, w0], dt / 2.0).unwrap();
            let half = integrate_theta_chain(&half, &[w0, w1, w0], dt / 2.0).unwrap();
            for level in 0..3 {
                for (a, b) in whole.stack(level).iter().zip(half.stack(level)) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                }
            }
        }

        #[test]
        fn slopes_never_below_floor(
            nu in 0.0f64..2.0,
            d in -50.0f64..50.0,
            w in -1e3f64..1e3,
            floor in 0.0f64..0.5,
        ) {
            let c = ClassKChain::from_stacks(vec![vec![nu.max(floor), d], vec![nu.max(floor)]], floor, f64::INFINITY).unwrap();
            let c = integrate_theta_chain(&c, &[w, w], 0.05).unwrap();
            prop_assert!(c.nu(0) >= floor && c.nu(1) >= floor);
        }
    }
}
