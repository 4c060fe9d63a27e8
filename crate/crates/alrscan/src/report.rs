//! The JSON analysis report emitted by the CLI.
//!
//! Reports are deterministic functions of (arguments, seed, input files):
//! field order is fixed by the struct layout and every number is written
//! with shortest round-trip formatting, so identical runs produce identical
//! bytes regardless of thread count. Wall-clock timing is therefore logged
//! to stderr, never into the report.

use serde::Serialize;

use crate::likelihood::Sidedness;
use crate::pvalue::PValueResult;
use crate::stats::{StatKind, TestStatistic};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Serialize)]
pub struct DatasetSummary {
    pub path: String,
    pub kind: &'static str,
    pub subjects: u64,
    pub cases: u64,
    pub p0_hat: f64,
}

#[derive(Debug, Serialize)]
pub struct WindowSummary {
    /// The window spec as given on the command line.
    pub spec: String,
    pub count: usize,
}

#[derive(Debug, Serialize)]
pub struct ArgmaxInfo {
    pub window: usize,
    pub provenance: String,
    pub n: u32,
    pub m: u32,
}

#[derive(Debug, Serialize)]
pub struct StatRecord {
    pub kind: StatKind,
    pub sidedness: Sidedness,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax: Option<ArgmaxInfo>,
    pub windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
}

impl StatRecord {
    pub fn from_statistic(t: &TestStatistic, argmax: Option<ArgmaxInfo>) -> Self {
        StatRecord {
            kind: t.kind,
            sidedness: t.sidedness,
            value: t.value,
            argmax,
            windows: t.n_windows,
            weights: t.weights.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CovariateInfo {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub refit_fallback_windows: Vec<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub degenerate_windows: Vec<u32>,
}

/// The full self-describing analysis report.
#[derive(Debug, Serialize)]
pub struct TestReport {
    pub schema: u32,
    pub tool_version: &'static str,
    pub dataset: DatasetSummary,
    pub windows: WindowSummary,
    pub covariates: CovariateInfo,
    pub statistics: Vec<StatRecord>,
    pub pvalues: Vec<PValueResult>,
    pub seed: u64,
}

impl TestReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
