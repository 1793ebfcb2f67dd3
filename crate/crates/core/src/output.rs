//! Tabular CSV/JSON emission and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Seventeen significant digits, so every f64 round-trips exactly.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => Value::String(format_f64(*v)),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Array of records keyed by column name. Numbers are written as the same
    /// strings as in CSV.
    pub fn to_json(&self) -> String {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert((*c).to_string(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(records)).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize, A: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub output: String,
    pub format: Format,
    pub config: &'a C,
    pub args: &'a A,
}

/// Writes the table to `out` (or stdout) and, for files, a manifest beside it.
pub fn write_table<C: Serialize, A: Serialize>(
    table: &Table,
    format: Format,
    out: Option<&Path>,
    command: &str,
    config: &C,
    args: &A,
) -> std::io::Result<()> {
    let body = table.render(format);
    match out {
        None => std::io::stdout().lock().write_all(body.as_bytes()),
        Some(path) => {
            std::fs::write(path, body)?;
            let manifest = Manifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command,
                output: path.display().to_string(),
                format,
                config,
                args,
            };
            let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
            text.push('\n');
            std::fs::write(manifest_path(path), text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 85.3, 1e-300, 6.02214076e23] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_f64(85.3), "8.5299999999999997e1");
    }

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new(&["x_mm", "g", "flag"]);
        t.push(vec![1.5.into(), Cell::Empty, true.into()]);
        assert_eq!(t.to_csv(), "x_mm,g,flag\n1.5000000000000000e0,,1\n");
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v[0]["x_mm"], "1.5000000000000000e0");
        assert!(v[0]["g"].is_null());
        assert_eq!(v[0]["flag"], 1);
    }

    #[test]
    fn manifest_beside_output() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.csv");
        let t = Table::new(&["x"]);
        write_table(&t, Format::Csv, Some(&out), "g", &json!({"k": 1}), &json!({})).unwrap();
        let m: Value = serde_json::from_str(&std::fs::read_to_string(manifest_path(&out)).unwrap()).unwrap();
        assert_eq!(m["command"], "g");
        assert_eq!(m["config"]["k"], 1);
    }
}
