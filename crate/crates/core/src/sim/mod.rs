//! Sampled-data simulation: plants, scenario library, the zero-order-hold
//! loop and its CSV/JSON logs.

pub mod config;
mod format;
pub mod plants;
mod record;
mod run;
pub mod scenarios;

pub use config::{
    AccConfig, AccInitial, AdaptationSettings, ClfConfig, CorridorConfig, DesiredSpec, EgoKind, LevelConfig, LinePath, ScenarioConfig,
    ScenarioKind,
};
pub use format::fmt_sig;
pub use plants::{leader_accel, AccParams, AccPlant, DoubleIntegrator, SingleIntegrator, Unicycle};
pub use record::{LogSchema, Record, RunStatus, SampleStatus, SimLog, Summary};
pub(crate) use run::flat_nu;
pub use run::{run_scenario, step_plant};

use thiserror::Error;

use crate::adapt::AdaptError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
