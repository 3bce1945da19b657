//! Per-assertion reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    /// Largest deviation seen; `null` in JSON if a check produced NaN.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub suite: String,
    pub trial: Option<usize>,
    pub assertion: String,
    pub deviation: f64,
    /// Serialized instance, when one was written.
    pub instance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub tolerance_scale: f64,
    pub assertions: Vec<Assertion>,
    pub failures: Vec<Failure>,
    /// Free-form counters and observations that are not pass/fail.
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            seed: None,
            n_max: None,
            trials: None,
            tolerance_scale: ncrep_core::tol::scale(),
            assertions: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    /// Fold one measurement into the named assertion. Returns whether this
    /// measurement passed; NaN never passes.
    pub fn record(&mut self, name: &str, deviation: f64, tolerance: f64) -> bool {
        let ok = deviation <= tolerance;
        let idx = match self.assertions.iter().position(|a| a.name == name) {
            Some(i) => i,
            None => {
                self.assertions.push(Assertion {
                    name: name.to_string(),
                    max_deviation: 0.0,
                    tolerance,
                    pass: true,
                    count: 0,
                });
                self.assertions.len() - 1
            }
        };
        let a = &mut self.assertions[idx];
        a.count += 1;
        if !a.max_deviation.is_nan() && (deviation.is_nan() || deviation > a.max_deviation) {
            a.max_deviation = deviation;
        }
        a.pass &= ok;
        self.pass &= ok;
        ok
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Merge another report's assertions and failures into this one.
    pub fn absorb(&mut self, other: Report) {
        for a in other.assertions {
            self.assertions.push(a);
        }
        self.failures.extend(other.failures);
        self.notes.extend(other.notes);
        self.pass &= other.pass;
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn write_json(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
    }

    /// One line per assertion, then failures and notes.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let width = self.assertions.iter().map(|a| a.name.len()).max().unwrap_or(0);
        for a in &self.assertions {
            let _ = writeln!(
                out,
                "{} {:<width$}  max {:>10.3e}  tol {:>8.1e}  n={}",
                if a.pass { "PASS" } else { "FAIL" },
                a.name,
                a.max_deviation,
                a.tolerance,
                a.count,
            );
        }
        for f in &self.failures {
            let trial = f.trial.map(|t| format!(" trial {t}")).unwrap_or_default();
            let file = f.instance.as_deref().map(|p| format!(" -> {p}")).unwrap_or_default();
            let _ = writeln!(out, "failure: {}{trial}: {} ({:.3e}){file}", f.suite, f.assertion, f.deviation);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let _ = writeln!(out, "{}", if self.pass { "result: pass" } else { "result: FAIL" });
        out
    }
}
