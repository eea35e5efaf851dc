//! Suite reports and the run summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{Mutation, RunConfig, SuiteName, Tolerances, SCHEMA};
use crate::error::CliResult;

/// One hard assertion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Observed quantity (a defect, margin or count).
    #[serde(with = "finite_or_null")]
    pub value: f64,
    /// Threshold the value was compared against.
    #[serde(with = "finite_or_null")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Non-finite floats are written as `null` and read back as NaN.
mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Sizes of the truncations a suite worked with.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub operator_dim: usize,
    pub n_modes: usize,
    pub nt: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub suite: SuiteName,
    pub config_hash: String,
    pub seed: u64,
    pub epsilon: f64,
    pub tolerances: Tolerances,
    pub truncation: Truncation,
    pub mutation: Mutation,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    /// Suite-specific tables (plot data and diagnostics).
    pub data: Map<String, Value>,
}

/// Collects checks and data while a suite runs.
pub struct Recorder {
    report: SuiteReport,
}

impl Recorder {
    pub fn new(suite: SuiteName, cfg: &RunConfig, truncation: Truncation) -> Self {
        Self {
            report: SuiteReport {
                schema: SCHEMA,
                suite,
                config_hash: cfg.hash(),
                seed: cfg.seed,
                epsilon: cfg.epsilon,
                tolerances: cfg.tolerances.clone(),
                truncation,
                mutation: cfg.mutation,
                checks: Vec::new(),
                passed: 0,
                failed: 0,
                data: Map::new(),
            },
        }
    }

    fn push(&mut self, name: &str, passed: bool, value: f64, threshold: f64, note: Option<String>) {
        self.report.checks.push(Check { name: name.to_string(), passed, value, threshold, note });
    }

    /// Passes when `value ≤ tol`.
    pub fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.push(name, value <= tol, value, tol, None);
    }

    /// Passes when `value ≥ bound`.
    pub fn at_least(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value >= bound, value, bound, None);
    }

    /// Passes when the integers agree; `value` holds the observed count.
    pub fn equal(&mut self, name: &str, got: i64, want: i64) {
        self.push(name, got == want, got as f64, want as f64, None);
    }

    pub fn flag(&mut self, name: &str, ok: bool) {
        self.push(name, ok, if ok { 1.0 } else { 0.0 }, 1.0, None);
    }

    /// Records a failed check for an operation that returned an error.
    pub fn error(&mut self, name: &str, err: impl std::fmt::Display) {
        self.push(name, false, f64::NAN, f64::NAN, Some(err.to_string()));
    }

    /// Runs a fallible block; an error becomes a failed check.
    pub fn guard(&mut self, name: &str, f: impl FnOnce(&mut Self) -> CliResult<()>) {
        if let Err(e) = f(self) {
            self.error(name, e);
        }
    }

    pub fn data(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.report.data.insert(key.to_string(), v);
    }

    pub fn finish(mut self) -> SuiteReport {
        self.report.passed = self.report.checks.iter().filter(|c| c.passed).count();
        self.report.failed = self.report.checks.len() - self.report.passed;
        self.report
    }
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn file_name(&self) -> String {
        format!("{}.json", self.suite.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteCount {
    pub suite: SuiteName,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub config_hash: String,
    pub seed: u64,
    pub epsilon: f64,
    pub mutation: Mutation,
    pub suites: Vec<SuiteCount>,
    pub total_passed: usize,
    pub total_failed: usize,
    pub all_passed: bool,
    /// Numerical index of the configured flow instance, if the fredholm suite ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_index: Option<i64>,
}

impl Summary {
    pub fn from_reports(cfg: &RunConfig, reports: &[SuiteReport]) -> Self {
        let suites: Vec<SuiteCount> = reports
            .iter()
            .map(|r| SuiteCount { suite: r.suite, passed: r.passed, failed: r.failed })
            .collect();
        let total_passed = suites.iter().map(|s| s.passed).sum();
        let total_failed: usize = suites.iter().map(|s| s.failed).sum();
        let fred = reports.iter().find(|r| r.suite == SuiteName::Fredholm);
        let get = |k: &str| fred.and_then(|r| r.data.get("flagship")).and_then(|v| v.get(k)).and_then(Value::as_i64);
        Self {
            schema: SCHEMA,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            epsilon: cfg.epsilon,
            mutation: cfg.mutation,
            suites,
            total_passed,
            total_failed,
            all_passed: total_failed == 0,
            index: get("index"),
            oracle_index: get("oracle_index"),
        }
    }
}

/// Writes each report to `<dir>/<suite>.json` and the summary last.
pub fn write_all(dir: &Path, reports: &[SuiteReport], summary: &Summary) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for r in reports {
        let p = dir.join(r.file_name());
        fs::write(&p, r.to_json())?;
        out.push(p);
    }
    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(summary).expect("summary serializes"))?;
    out.push(p);
    Ok(out)
}
