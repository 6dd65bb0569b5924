//! Reports and their renderings.

use crate::error::{CliError, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const REPORT_SCHEMA_VERSION: &str = "nclab.report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub seed: u64,
    /// Highest matrix level examined.
    pub levels: usize,
    pub samples: usize,
    pub tol: Option<f64>,
    pub solver: String,
    /// Command-specific arguments, as given.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub engine: String,
    pub adapter: String,
    pub feas_tol: f64,
    pub bisect_tol: f64,
    pub sdp_solves: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub spec_hash: String,
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: Parameters,
    pub results: Value,
    /// A mathematical negative was certified (exit code 2).
    pub certified_negative: bool,
    pub solver: SolverStats,
    pub timestamps: Timestamps,
}

impl Report {
    /// The report without its timestamps, for comparisons.
    pub fn stable_view(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("timestamps");
        }
        v
    }

    pub fn exit_code(&self) -> i32 {
        if self.certified_negative {
            2
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(CliError::InvalidArgument(format!("unknown format `{other}` (json|text)"))),
        }
    }
}

pub fn emit_report(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Text => Ok(render_text(report)),
    }
}

fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let p = &r.parameters;
    let _ = writeln!(out, "nclab {}  [{}]", r.command, r.inputs.join(", "));
    let _ = writeln!(out, "spec hash   {}", r.spec_hash);
    let _ = write!(out, "parameters  seed={} levels={} samples={} solver={}", p.seed, p.levels, p.samples, p.solver);
    if let Some(t) = p.tol {
        let _ = write!(out, " tol={t:e}");
    }
    for (k, v) in &p.extra {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    out.push('\n');
    render_value(&mut out, &r.results, 0);
    out.push('\n');
    let _ = writeln!(
        out,
        "solver: {} ({}), {} SDP solves, feas_tol={:e}",
        r.solver.engine, r.solver.adapter, r.solver.sdp_solves, r.solver.feas_tol
    );
    let _ = writeln!(out, "finished {} in {} ms", r.timestamps.finished, r.timestamps.elapsed_ms);
    if r.certified_negative {
        let _ = writeln!(out, "certified negative (exit code 2)");
    }
    out
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(f) if n.is_f64() => fmt_float(f),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn fmt_float(f: f64) -> String {
    if f == 0.0 || (1e-4..1e6).contains(&f.abs()) {
        let s = format!("{f:.9}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{f:.6e}")
    }
}

/// `[re, im]` rendered as a complex number.
fn complex(v: &Value) -> Option<String> {
    let a = v.as_array().filter(|a| a.len() == 2)?;
    let (re, im) = (a[0].as_f64()?, a[1].as_f64()?);
    Some(if im == 0.0 {
        fmt_float(re)
    } else {
        let sign = if im < 0.0 { '-' } else { '+' };
        format!("{}{sign}{}i", fmt_float(re), fmt_float(im.abs()))
    })
}

fn is_complex_matrix(v: &Value) -> bool {
    v.as_array().is_some_and(|rows| {
        !rows.is_empty() && rows.iter().all(|r| r.as_array().is_some_and(|c| !c.is_empty() && c.iter().all(|z| complex(z).is_some())))
    })
}

fn flat_array(v: &Value) -> bool {
    v.as_array().is_some_and(|a| a.iter().all(|e| scalar(e).is_some() || e.as_array().is_some_and(|p| p.iter().all(|q| scalar(q).is_some()))))
}

fn is_table(v: &Value) -> bool {
    v.as_array().is_some_and(|rows| {
        !rows.is_empty() && rows.iter().all(|r| r.as_object().is_some_and(|o| o.values().all(|x| scalar(x).is_some() || flat_array(x))))
    })
}

fn inline(v: &Value) -> String {
    if let Some(s) = scalar(v) {
        return s;
    }
    match v {
        Value::Array(a) => format!("[{}]", a.iter().map(inline).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

fn render_value(out: &mut String, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(o) => {
            for (k, x) in o {
                if let Some(s) = scalar(x) {
                    let _ = writeln!(out, "{pad}{k}: {s}");
                } else if is_complex_matrix(x) {
                    let _ = writeln!(out, "{pad}{k}:");
                    for row in x.as_array().into_iter().flatten() {
                        let cells: Vec<String> = row.as_array().into_iter().flatten().filter_map(complex).collect();
                        let _ = writeln!(out, "{pad}  [ {} ]", cells.iter().map(|c| format!("{c:>14}")).collect::<Vec<_>>().join(" "));
                    }
                } else if is_table(x) {
                    let _ = writeln!(out, "{pad}{k}:");
                    render_table(out, x.as_array().expect("table rows"), depth + 1);
                } else if flat_array(x) {
                    let _ = writeln!(out, "{pad}{k}: {}", inline(x));
                } else {
                    let _ = writeln!(out, "{pad}{k}:");
                    render_value(out, x, depth + 1);
                }
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                if scalar(x).is_some() {
                    let _ = writeln!(out, "{pad}- {}", inline(x));
                } else {
                    let _ = writeln!(out, "{pad}[{i}]");
                    render_value(out, x, depth + 1);
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", inline(other));
        }
    }
}

fn render_table(out: &mut String, rows: &[Value], depth: usize) {
    let pad = "  ".repeat(depth);
    let mut cols: Vec<String> = Vec::new();
    for r in rows {
        for k in r.as_object().expect("object rows").keys() {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| cols.iter().map(|c| r.get(c).map_or_else(|| "-".into(), inline)).collect())
        .collect();
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| cells.iter().map(|r| r[j].chars().count()).chain([c.len()]).max().unwrap_or(0).min(72))
        .collect();
    let line = |vals: &[String]| -> String {
        vals.iter()
            .zip(&widths)
            .map(|(v, &w)| {
                let v: String = if v.chars().count() > w { v.chars().take(w - 1).chain(['…']).collect() } else { v.clone() };
                format!("{v:<w$}")
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{pad}{}", line(&cols).trim_end());
    for r in &cells {
        let _ = writeln!(out, "{pad}{}", line(r).trim_end());
    }
}
