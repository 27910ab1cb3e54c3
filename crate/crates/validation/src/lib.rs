//! Bundled scenario configs and the runs shared by the acceptance suite.

use rtcbf::sim::{run_scenario, ScenarioConfig, SimError, SimLog};

pub const ACC: &str = include_str!("../../../configs/acc.json");
pub const CORRIDOR_SI: &str = include_str!("../../../configs/corridor_si.json");
pub const CORRIDOR_DI: &str = include_str!("../../../configs/corridor_di.json");
pub const MULTI_1: &str = include_str!("../../../configs/multi_scenario1.json");
pub const MULTI_2: &str = include_str!("../../../configs/multi_scenario2.json");

pub const BUNDLED: [&str; 5] = [ACC, CORRIDOR_SI, CORRIDOR_DI, MULTI_1, MULTI_2];

/// Corridor start positions swept by the dominance check.
pub fn corridor_starts() -> Vec<f64> {
    (0..100).map(|i| -1.95 + 0.05 * i as f64).collect()
}

/// Parse `text` and force the adaptation switch.
pub fn config(text: &str, adaptive: bool) -> Result<ScenarioConfig, SimError> {
    let mut cfg = ScenarioConfig::from_json(text)?;
    cfg.adaptation.enabled = adaptive;
    Ok(cfg)
}

pub fn run(text: &str, adaptive: bool) -> Result<SimLog, SimError> {
    run_scenario(&config(text, adaptive)?)
}

/// Corridor run started at `x0`.
pub fn run_corridor(text: &str, adaptive: bool, x0: f64) -> Result<SimLog, SimError> {
    let mut cfg = config(text, adaptive)?;
    cfg.set_axis("x0", x0)?;
    run_scenario(&cfg)
}

/// Every bundled scenario in both modes, then both corridor sweeps.
pub fn suite_logs() -> Result<Vec<SimLog>, SimError> {
    let mut logs = Vec::new();
    for text in BUNDLED {
        for adaptive in [true, false] {
            logs.push(run(text, adaptive)?);
        }
    }
    for text in [CORRIDOR_SI, CORRIDOR_DI] {
        for x0 in corridor_starts() {
            for adaptive in [true, false] {
                logs.push(run_corridor(text, adaptive, x0)?);
            }
        }
    }
    Ok(logs)
}
