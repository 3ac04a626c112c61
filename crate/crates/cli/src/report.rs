use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{CliError, ExperimentConfig, Format};

/// One checked number. `value = None` with `divergent = true` is a computed
/// divergence, which may well be the expected outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: Option<f64>,
    pub error_estimate: Option<f64>,
    pub divergent: bool,
    /// The statement this number checks.
    pub claim: String,
    pub expected: Option<String>,
    /// `None` for recorded quantities that carry no pass/fail verdict.
    pub pass: Option<bool>,
}

impl Quantity {
    pub fn new(name: impl Into<String>, value: Option<f64>, claim: impl Into<String>) -> Self {
        let value = value.filter(|v| v.is_finite());
        Quantity {
            name: name.into(),
            divergent: value.is_none(),
            value,
            error_estimate: None,
            claim: claim.into(),
            expected: None,
            pass: None,
        }
    }

    pub fn err(mut self, e: f64) -> Self {
        self.error_estimate = Some(e).filter(|e| e.is_finite());
        self
    }

    pub fn expect(mut self, what: impl Into<String>, pass: bool) -> Self {
        self.expected = Some(what.into());
        self.pass = Some(pass);
        self
    }

    /// A flag quantity: 1 for true, 0 for false.
    pub fn flag(name: impl Into<String>, ok: bool, claim: impl Into<String>) -> Self {
        Quantity::new(name, Some(if ok { 1.0 } else { 0.0 }), claim).expect("1", ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub quantities: Vec<Quantity>,
    /// One row per grid point, for CSV output.
    pub rows: Vec<BTreeMap<String, Value>>,
    pub passed: bool,
    pub wall_time_s: Option<f64>,
}

impl ExperimentReport {
    pub fn failures(&self) -> Vec<&Quantity> {
        self.quantities.iter().filter(|q| q.pass == Some(false)).collect()
    }
}

pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn opt_number(x: Option<f64>) -> Value {
    x.map(number).unwrap_or(Value::Null)
}

fn float_text(x: f64) -> String {
    format!("{x:.16e}")
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (_, Some(i)) => i.to_string(),
            _ => float_text(n.as_f64().unwrap()),
        },
        Value::String(s) => serde_json::to_string(s).unwrap(),
        _ => unreachable!(),
    }
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent + 1);
    match v {
        Value::Array(a) if !a.is_empty() => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad);
                write_json(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(m) if !m.is_empty() => {
            out.push_str("{\n");
            // serde_json's map is ordered by key
            for (i, (k, x)) in m.iter().enumerate() {
                let _ = write!(out, "{pad}{}: ", serde_json::to_string(k).unwrap());
                write_json(x, indent + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
        Value::Array(_) => out.push_str("[]"),
        Value::Object(_) => out.push_str("{}"),
        s => out.push_str(&scalar_text(s)),
    }
}

/// JSON with sorted keys and every float written with 17 significant digits.
pub fn to_json(report: &ExperimentReport) -> String {
    let v = serde_json::to_value(report).expect("report serializes");
    let mut out = String::new();
    write_json(&v, 0, &mut out);
    out.push('\n');
    out
}

pub fn from_json(text: &str) -> Result<ExperimentReport, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad report: {e}")))
}

fn csv_field(v: &Value) -> String {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Array(_) | Value::Object(_) => v.to_string(),
        x => scalar_text(x),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// One line per row; the header is the sorted union of the row keys. Empty
/// cells are divergent or undefined values.
pub fn to_csv(report: &ExperimentReport) -> String {
    let mut cols: Vec<&String> = report.rows.iter().flat_map(|r| r.keys()).collect();
    cols.sort();
    cols.dedup();
    let mut out = cols.iter().map(|c| csv_field(&Value::String((*c).clone()))).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in &report.rows {
        let line: Vec<String> = cols.iter().map(|c| r.get(*c).map(csv_field).unwrap_or_default()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn render(report: &ExperimentReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(report),
    }
}

pub fn emit(report: &ExperimentReport, path: &Path, format: Format) -> Result<(), CliError> {
    std::fs::write(path, render(report, format))?;
    Ok(())
}
