//! Structured audit results, serialized as JSON with a CSV view of the table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Version of the JSON layout written by [`AuditReport::to_json`].
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.3e}")
    }
}

/// Outcome of an inequality, identity or exponent audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub name: String,
    /// The audited statement in words.
    pub inequality: String,
    pub params: BTreeMap<String, Value>,
    /// Measured constant (or the headline measured quantity).
    pub constant: Option<f64>,
    /// Largest value of the measured quantity that still passes.
    pub allowed: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    pub table: Table,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn new(name: &str, inequality: &str) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            name: name.to_string(),
            inequality: inequality.to_string(),
            params: BTreeMap::new(),
            constant: None,
            allowed: None,
            tolerance: None,
            pass: false,
            metrics: BTreeMap::new(),
            table: Table::default(),
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn set_param(&mut self, key: &str, value: impl Into<Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Attach the headline constant, its allowed bound and the verdict.
    pub fn verdict(&mut self, measured: f64, allowed: f64, pass: bool) {
        self.constant = Some(measured);
        self.allowed = Some(allowed);
        self.pass = pass;
    }

    /// One-line human summary; failures name the inequality and the
    /// measured versus allowed value.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(s, "[{status}] {}", self.name).unwrap();
        if let Some(c) = self.constant {
            write!(s, ": measured {}", num(c)).unwrap();
        }
        if let Some(a) = self.allowed {
            write!(s, ", allowed {}", num(a)).unwrap();
        }
        if !self.pass {
            write!(s, " (violated: {})", self.inequality).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_everything() {
        let mut r = AuditReport::new("demo", "a <= C b").param("p", 2.0).param("d", 1);
        r.table = Table::new(&["k", "ratio"]);
        r.table.push(vec![3.0, 0.5]);
        r.metric("slope", -0.01);
        r.verdict(1.25, 2.0, true);
        let back = AuditReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.table.to_csv(), "k,ratio\n3.0,0.5\n");
    }

    #[test]
    fn failure_summary_names_inequality() {
        let mut r = AuditReport::new("demo", "a <= C b");
        r.verdict(3.0, 2.0, false);
        let s = r.summary();
        assert!(s.contains("FAIL") && s.contains("a <= C b") && s.contains("3.0"));
    }
}
