//! Report envelopes and writers.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub const UNITS_LINE: &str =
    "times in μs; rates in rad/μs (MHz inputs multiplied by 2π); probabilities and fidelities dimensionless";

#[derive(Serialize)]
pub struct Units {
    time: &'static str,
    rate: &'static str,
    probability: &'static str,
}

pub const UNITS: Units = Units {
    time: "μs",
    rate: "rad/μs (MHz inputs multiplied by 2π)",
    probability: "dimensionless",
};

/// Every report carries the units and the effective configuration.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'static str,
    pub units: Units,
    pub config: &'a RunConfig,
    pub warnings: Vec<String>,
    pub results: T,
}

/// Decimal scientific notation with 12 significant digits.
pub fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn to_json<T: Serialize>(report: &Report<'_, T>) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
    out.push(b'\n');
    out
}

/// Header comments (units, config) followed by a CSV table.
pub fn to_csv(config: &RunConfig, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Failure> {
    let mut out = Vec::new();
    writeln!(out, "# {UNITS_LINE}").expect("write to memory");
    let config_line = serde_json::to_string(config).expect("config serializes");
    writeln!(out, "# config: {config_line}").expect("write to memory");
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Failure::Io(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::Io(format!("csv: {e}")))
}

/// Flattens the scalar leaves of a report into `quantity,value` rows.
pub fn flatten(value: &Value) -> Vec<Vec<String>> {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
        let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, v)| walk(&join(k), v, rows)),
            Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| walk(&join(&i.to_string()), v, rows)),
            Value::Number(n) => {
                let text = match (n.as_u64(), n.as_i64(), n.as_f64()) {
                    (Some(u), _, _) => u.to_string(),
                    (_, Some(i), _) => i.to_string(),
                    (_, _, Some(f)) => sig12(f),
                    _ => n.to_string(),
                };
                rows.push(vec![prefix.to_string(), text]);
            }
            Value::Null => rows.push(vec![prefix.to_string(), String::new()]),
            Value::Bool(b) => rows.push(vec![prefix.to_string(), b.to_string()]),
            Value::String(s) => rows.push(vec![prefix.to_string(), s.clone()]),
        }
    }
    let mut rows = Vec::new();
    walk("", value, &mut rows);
    rows
}

pub fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|()| stdout.flush())
                .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}")))
        }
    }
}
