//! Run reports and their JSON, CSV and text renderings.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst_value: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub detail: Value,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            worst_value: None,
            witness: None,
            detail: Value::Null,
        }
    }

    pub fn worst(mut self, value: f64) -> Self {
        self.worst_value = Some(value);
        self
    }

    pub fn witness(mut self, point: Vec<f64>) -> Self {
        self.witness = Some(point);
        self
    }

    pub fn detail<T: Serialize>(mut self, detail: &T) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub command: String,
    pub warnings: Vec<String>,
    pub checks: Vec<CheckResult>,
    pub verdict: Verdict,
}

impl RunReport {
    pub fn new(scenario: &str, command: &str, warnings: Vec<String>, checks: Vec<CheckResult>) -> Self {
        let verdict = if checks.iter().all(|c| c.passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        RunReport {
            scenario: scenario.into(),
            command: command.into(),
            warnings,
            checks,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(Error::Usage(format!("unknown format `{other}` (json|csv|text)"))),
        }
    }
}

/// Fixed 17-significant-digit rendering for CSV and text.
pub fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn witness_cell(w: &Option<Vec<f64>>) -> String {
    w.as_ref()
        .map(|p| p.iter().map(|&v| number(v)).collect::<Vec<_>>().join(" "))
        .unwrap_or_default()
}

pub fn emit_reports(reports: &[RunReport], format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(reports)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Numerical(e.to_string());
            w.write_record(["scenario", "command", "check", "passed", "worst_value", "witness"])
                .map_err(io)?;
            for r in reports {
                for c in &r.checks {
                    w.write_record([
                        r.scenario.as_str(),
                        r.command.as_str(),
                        c.name.as_str(),
                        if c.passed { "true" } else { "false" },
                        &c.worst_value.map(number).unwrap_or_default(),
                        &witness_cell(&c.witness),
                    ])
                    .map_err(io)?;
                }
            }
            let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
        }
        Format::Text => {
            if reports.is_empty() {
                return Ok("no reports\n".into());
            }
            let mut out = String::new();
            for r in reports {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                out.push_str(&format!("{} {}: {verdict}\n", r.command, r.scenario));
                for warning in &r.warnings {
                    out.push_str(&format!("  warning: {warning}\n"));
                }
                for c in &r.checks {
                    let mark = if c.passed { "ok  " } else { "FAIL" };
                    out.push_str(&format!("  [{mark}] {}", c.name));
                    if let Some(v) = c.worst_value {
                        out.push_str(&format!("  worst {}", number(v)));
                    }
                    if c.witness.is_some() {
                        out.push_str(&format!("  at [{}]", witness_cell(&c.witness)));
                    }
                    out.push('\n');
                }
            }
            Ok(out)
        }
    }
}
