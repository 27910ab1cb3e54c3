use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::format::fmt_sig;
use super::SimError;
use crate::adapt::FailureReason;

/// Column names for each group of logged values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogSchema {
    pub state: Vec<String>,
    pub input: Vec<String>,
    /// One per safety constraint.
    pub barriers: Vec<String>,
    pub psi: Vec<String>,
    pub nu: Vec<String>,
    pub trust: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    Incompatible,
    Boundary,
    Numerical,
}

impl SampleStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleStatus::Ok => "ok",
            SampleStatus::Incompatible => "incompatible",
            SampleStatus::Boundary => "boundary",
            SampleStatus::Numerical => "numerical",
        }
    }
}

impl From<FailureReason> for SampleStatus {
    fn from(r: FailureReason) -> Self {
        match r {
            FailureReason::Incompatible => SampleStatus::Incompatible,
            FailureReason::Boundary => SampleStatus::Boundary,
            FailureReason::Numerical => SampleStatus::Numerical,
        }
    }
}

/// One sample of the sampled-data loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub state: Vec<f64>,
    pub input: Vec<f64>,
    pub delta: f64,
    pub h: Vec<f64>,
    pub psi: Vec<f64>,
    pub nu: Vec<f64>,
    pub trust: Vec<f64>,
    pub status: SampleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failure { reason: FailureReason, t_fail: f64, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub scenario: String,
    pub adaptive: bool,
    pub horizon: f64,
    pub schema: LogSchema,
    pub records: Vec<Record>,
    pub status: RunStatus,
    /// State at the end of the run (the failure sample for failed runs).
    pub final_state: Vec<f64>,
}

/// Compact run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub adaptive: bool,
    pub status: String,
    pub reason: Option<FailureReason>,
    pub t_fail: Option<f64>,
    pub samples: usize,
    /// Smallest barrier value over feasible samples.
    pub min_h: Option<f64>,
    pub min_h_per_barrier: BTreeMap<String, f64>,
}

impl SimLog {
    pub fn completed(&self) -> bool {
        matches!(self.status, RunStatus::Completed)
    }

    /// Failure time, or the horizon for a completed run.
    pub fn time_to_failure(&self) -> f64 {
        match &self.status {
            RunStatus::Completed => self.horizon,
            RunStatus::Failure { t_fail, .. } => *t_fail,
        }
    }

    pub fn feasible_records(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.status == SampleStatus::Ok)
    }

    /// Minimum of each barrier over feasible samples.
    pub fn min_h_per_barrier(&self) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.schema.barriers.len()];
        for r in self.feasible_records() {
            for (m, &h) in out.iter_mut().zip(&r.h) {
                *m = m.min(h);
            }
        }
        out
    }

    pub fn min_h(&self) -> Option<f64> {
        let m = self.min_h_per_barrier().into_iter().fold(f64::INFINITY, f64::min);
        m.is_finite().then_some(m)
    }

    pub fn summary(&self) -> Summary {
        let (status, reason, t_fail) = match &self.status {
            RunStatus::Completed => ("completed".to_string(), None, None),
            RunStatus::Failure { reason, t_fail, .. } => ("failure".to_string(), Some(*reason), Some(*t_fail)),
        };
        let min_h_per_barrier = self.schema.barriers.iter().cloned().zip(self.min_h_per_barrier()).filter(|(_, v)| v.is_finite()).collect();
        Summary {
            scenario: self.scenario.clone(),
            adaptive: self.adaptive,
            status,
            reason,
            t_fail,
            samples: self.records.len(),
            min_h: self.min_h(),
            min_h_per_barrier,
        }
    }

    pub fn header(&self) -> Vec<String> {
        let s = &self.schema;
        let mut h = vec!["t".to_string()];
        h.extend(s.state.iter().cloned());
        h.extend(s.input.iter().cloned());
        h.push("delta".into());
        h.extend(s.barriers.iter().map(|b| format!("h_{b}")));
        h.extend(s.psi.iter().cloned());
        h.extend(s.nu.iter().cloned());
        h.extend(s.trust.iter().cloned());
        h.push("status".into());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.records {
            let mut row = vec![fmt_sig(r.t)];
            for group in [&r.state, &r.input] {
                row.extend(group.iter().map(|&v| fmt_sig(v)));
            }
            row.push(fmt_sig(r.delta));
            for group in [&r.h, &r.psi, &r.nu, &r.trust] {
                row.extend(group.iter().map(|&v| fmt_sig(v)));
            }
            row.push(r.status.as_str().into());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String, SimError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
