use serde::{Deserialize, Serialize};

use super::plants::AccParams;
use super::SimError;
use crate::adapt::DesiredPolicy;
use crate::multiagent::MultiAgentConfig;

fn default_dt() -> f64 {
    0.01
}
fn one() -> usize {
    1
}
fn default_k_margin() -> f64 {
    1.2
}
fn default_derivative_limit() -> f64 {
    1e3
}
fn yes() -> bool {
    true
}

/// A complete, self-contained run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Sampling period of the zero-order-hold loop.
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    /// RK4 substeps per sample.
    #[serde(default = "one")]
    pub substeps: usize,
    /// Recorded in the summary; every built-in scenario is deterministic.
    #[serde(default)]
    pub seed: u64,
    pub adaptation: AdaptationSettings,
    pub scenario: ScenarioKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSettings {
    /// Fixed slopes when false.
    pub enabled: bool,
    #[serde(default = "default_k_margin")]
    pub k_margin: f64,
    #[serde(default = "default_derivative_limit")]
    pub derivative_limit: f64,
    #[serde(default = "yes")]
    pub joint_top_bounds: bool,
    #[serde(default)]
    pub nu_min: f64,
    #[serde(default)]
    pub nu_max: Option<f64>,
}

impl Default for AdaptationSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            k_margin: default_k_margin(),
            derivative_limit: default_derivative_limit(),
            joint_top_bounds: true,
            nu_min: 0.0,
            nu_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Acc(AccConfig),
    Corridor(CorridorConfig),
    MultiAgent(MultiAgentConfig),
}

/// Initial slope of one class-K level and how its desired value evolves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub initial: f64,
    #[serde(default)]
    pub desired: DesiredSpec,
}

impl LevelConfig {
    pub fn hold(initial: f64) -> Self {
        Self { initial, desired: DesiredSpec::Hold }
    }

    pub fn policy(&self) -> DesiredPolicy {
        match self.desired {
            DesiredSpec::Hold => DesiredPolicy::Constant { value: self.initial },
            DesiredSpec::Constant { value } => DesiredPolicy::Constant { value },
            DesiredSpec::Proportional { gain, rate_limit, nominal } => {
                DesiredPolicy::Proportional { nominal: nominal.unwrap_or(self.initial), gain, rate_limit }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesiredSpec {
    /// Desired slope is the initial slope.
    #[default]
    Hold,
    Constant {
        value: f64,
    },
    /// Steer back to `nominal` (the initial slope when absent).
    Proportional {
        gain: f64,
        rate_limit: f64,
        #[serde(default)]
        nominal: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccInitial {
    pub speed: f64,
    pub leader_speed: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccConfig {
    pub plant: AccParams,
    pub desired_speed: f64,
    pub min_distance: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub clf_rate: f64,
    pub clf_slack_weight: f64,
    pub initial: AccInitial,
    /// Two levels for the gap constraint.
    pub distance_levels: Vec<LevelConfig>,
    pub min_speed_levels: Vec<LevelConfig>,
    pub max_speed_levels: Vec<LevelConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgoKind {
    SingleIntegrator,
    DoubleIntegrator,
}

impl EgoKind {
    pub fn relative_degree(&self) -> usize {
        match self {
            EgoKind::SingleIntegrator => 1,
            EgoKind::DoubleIntegrator => 2,
        }
    }
}

/// `x_i(t) = start + rate·min(t, settle_time)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinePath {
    pub start: f64,
    pub rate: f64,
    pub settle_time: f64,
}

impl LinePath {
    pub fn position(&self, t: f64) -> f64 {
        self.start + self.rate * t.min(self.settle_time)
    }

    pub fn velocity(&self, t: f64) -> f64 {
        if t < self.settle_time {
            self.rate
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClfConfig {
    pub rate: f64,
    pub slack_weight: f64,
}

fn default_goal() -> f64 {
    6.0
}
fn default_kx() -> f64 {
    1.0
}
fn default_kv() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorConfig {
    pub ego: EgoKind,
    pub x0: f64,
    #[serde(default)]
    pub v0: f64,
    #[serde(default = "default_goal")]
    pub goal: f64,
    #[serde(default = "default_kx")]
    pub k_x: f64,
    #[serde(default = "default_kv")]
    pub k_v: f64,
    /// `|u| ≤ input_bound`.
    pub input_bound: f64,
    /// Required clearance from each wall.
    pub d_min: f64,
    pub walls: Vec<LinePath>,
    /// Shared by every wall; one entry per level.
    pub levels: Vec<LevelConfig>,
    #[serde(default)]
    pub clf: Option<ClfConfig>,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), SimError> {
    if ok {
        Ok(())
    } else {
        Err(SimError::Config(msg()))
    }
}

fn check_levels(name: &str, levels: &[LevelConfig], r: usize, s: &AdaptationSettings) -> Result<(), SimError> {
    check(levels.len() == r, || format!("{name}: {} levels for relative degree {r}", levels.len()))?;
    for (i, l) in levels.iter().enumerate() {
        let hi = s.nu_max.unwrap_or(f64::INFINITY);
        check(l.initial.is_finite() && l.initial >= s.nu_min && l.initial <= hi, || {
            format!("{name} level {i}: initial slope {} outside [{}, {hi}]", l.initial, s.nu_min)
        })?;
        if let DesiredSpec::Proportional { gain, rate_limit, .. } = l.desired {
            check(gain >= 0.0 && rate_limit > 0.0, || format!("{name} level {i}: bad proportional policy"))?;
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        check(self.dt > 0.0 && self.dt.is_finite(), || format!("dt must be positive, got {}", self.dt))?;
        check(self.horizon > 0.0 && self.horizon.is_finite(), || format!("horizon must be positive, got {}", self.horizon))?;
        check(self.substeps >= 1, || "substeps must be at least 1".into())?;
        let a = &self.adaptation;
        check(a.k_margin >= 1.0, || format!("k_margin must be >= 1, got {}", a.k_margin))?;
        check(a.derivative_limit > 0.0, || "derivative_limit must be positive".into())?;
        check(a.nu_min >= 0.0, || "nu_min must be nonnegative".into())?;
        if let Some(hi) = a.nu_max {
            check(hi >= a.nu_min, || "nu_max must be >= nu_min".into())?;
        }
        match &self.scenario {
            ScenarioKind::Acc(c) => {
                let p = &c.plant;
                check(p.mass > 0.0 && p.gravity > 0.0 && p.accel_coeff > 0.0, || "ACC plant parameters must be positive".into())?;
                check(c.clf_rate > 0.0 && c.clf_slack_weight > 0.0, || "CLF rate and slack weight must be positive".into())?;
                check(c.min_speed < c.max_speed, || "min_speed must be below max_speed".into())?;
                check_levels("distance", &c.distance_levels, 2, a)?;
                check_levels("min_speed", &c.min_speed_levels, 1, a)?;
                check_levels("max_speed", &c.max_speed_levels, 1, a)?;
                let i = &c.initial;
                check(i.distance > c.min_distance, || "initial gap violates the distance constraint".into())?;
                check(i.speed > c.min_speed && i.speed < c.max_speed, || "initial speed violates the speed limits".into())?;
            }
            ScenarioKind::Corridor(c) => {
                check(c.input_bound > 0.0, || "input_bound must be positive".into())?;
                check(c.d_min >= 0.0, || "d_min must be nonnegative".into())?;
                check(!c.walls.is_empty(), || "corridor needs at least one wall".into())?;
                check_levels("corridor", &c.levels, c.ego.relative_degree(), a)?;
                if let Some(clf) = c.clf {
                    check(clf.rate > 0.0 && clf.slack_weight > 0.0, || "CLF rate and slack weight must be positive".into())?;
                }
                for (i, w) in c.walls.iter().enumerate() {
                    check(w.settle_time >= 0.0, || format!("wall {i}: negative settle time"))?;
                    check((c.x0 - w.start).abs() > c.d_min, || format!("wall {i}: initial position is inside the clearance"))?;
                }
            }
            ScenarioKind::MultiAgent(m) => m.validate(a)?,
        }
        Ok(())
    }

    /// Override one scalar for a sweep.
    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<(), SimError> {
        match (axis, &mut self.scenario) {
            ("dt", _) => self.dt = value,
            ("horizon", _) => self.horizon = value,
            ("k_margin", _) => self.adaptation.k_margin = value,
            ("x0", ScenarioKind::Corridor(c)) => c.x0 = value,
            ("v0", ScenarioKind::Corridor(c)) => c.v0 = value,
            ("speed", ScenarioKind::Acc(c)) => c.initial.speed = value,
            ("distance", ScenarioKind::Acc(c)) => c.initial.distance = value,
            _ => return Err(SimError::Config(format!("axis '{axis}' is not defined for scenario '{}'", self.name))),
        }
        Ok(())
    }
}
