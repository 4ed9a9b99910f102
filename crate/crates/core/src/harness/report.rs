//! Benchmark reports: a versioned JSON document plus a CSV summary table.
//!
//! Wall-clock timings live next to the report body rather than inside it, so
//! two runs of the same configuration serialize to identical bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorKind, Result};
use crate::harness::config::{Method, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// One method on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    /// Ground truth for `predictions`, index-aligned.
    pub true_labels: Vec<usize>,
    /// Target indices `predictions` refer to, when only a subset is evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluated_indices: Option<Vec<usize>>,
    pub true_proportions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_hat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// `||h_t - h_{t-1}||_2` per sweep (JCPOT only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_trace: Option<Vec<f64>>,
    /// Transported mass between points of different true classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_mass_leakage: Option<f64>,
    /// Target points that received no label mass (label propagation only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unlabeled: Vec<usize>,
}

/// Summary of one (K, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub num_sources: usize,
    pub method: Method,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_l1_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_l1_error: Option<f64>,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub num_sources: usize,
    pub repetition: usize,
    pub method: Method,
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub num_sources: usize,
    pub repetition: usize,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: RunConfig,
    pub entries: Vec<BenchEntry>,
    #[serde(default)]
    pub errors: Vec<ErrorRecord>,
    /// Wall-clock per stage; left out of [`Report::body_json`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<StageTiming>,
}

impl Report {
    pub fn entry(&self, num_sources: usize, method: Method) -> Option<&BenchEntry> {
        self.entries
            .iter()
            .find(|e| e.num_sources == num_sources && e.method == method)
    }

    /// Any recorded run that hit `max_iter`.
    pub fn has_nonconverged(&self) -> bool {
        self.entries
            .iter()
            .flat_map(|e| &e.runs)
            .any(|r| r.converged == Some(false))
    }

    /// Full document, timings included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Deterministic part of the report: everything except timings.
    pub fn body_json(&self) -> String {
        let body = Report {
            timings: Vec::new(),
            ..self.clone()
        };
        body.to_json()
    }

    pub fn timings_json(&self) -> String {
        serde_json::to_string_pretty(&self.timings).expect("timings serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Report = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "report schema version {} is not {SCHEMA_VERSION}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// `num_sources,method,runs,mean_accuracy,std_accuracy,mean_l1_error,std_l1_error`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("num_sources,method,runs,mean_accuracy,std_accuracy,mean_l1_error,std_l1_error\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.num_sources,
                e.method,
                e.runs.len(),
                e.mean_accuracy,
                e.std_accuracy,
                opt(e.mean_l1_error),
                opt(e.std_l1_error)
            )
            .unwrap();
        }
        out
    }
}
