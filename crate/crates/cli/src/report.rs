//! Deterministic rendering of command results as JSON, CSV or plot data.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    PlotData,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    /// Floats always carry 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Float(x) if x.is_finite() => Value::from(*x),
            Cell::Float(x) => Value::String(format_float(*x)),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    /// Fully resolved configuration, echoed into every output.
    pub config: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Cell)>,
    /// Axis labels and points for the two-column plot format.
    pub plot: Option<(String, String, Vec<(f64, f64)>)>,
}

impl Report {
    pub fn new(command: &str, config: Vec<(String, String)>) -> Self {
        Self {
            command: command.to_string(),
            config,
            ..Self::default()
        }
    }

    pub fn summarize(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.to_string(), value.into()));
    }

    fn config_json(&self) -> Value {
        let mut cfg = Map::new();
        cfg.insert("command".into(), Value::String(self.command.clone()));
        for (k, v) in &self.config {
            cfg.insert(k.clone(), Value::String(v.clone()));
        }
        Value::Object(cfg)
    }

    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        out.insert("config".into(), self.config_json());
        for (k, v) in &self.summary {
            out.insert(k.clone(), v.to_json());
        }
        if !self.columns.is_empty() {
            out.insert("columns".into(), self.columns.iter().map(|c| Value::String(c.clone())).collect());
            let rows = self
                .rows
                .iter()
                .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
                .collect();
            out.insert("rows".into(), Value::Array(rows));
        }
        Value::Object(out)
    }

    fn header_lines(&self, out: &mut String) {
        writeln!(out, "# command {}", self.command).unwrap();
        for (k, v) in &self.config {
            writeln!(out, "# config {k}={v}").unwrap();
        }
    }

    fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        self.header_lines(&mut out);
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.columns.is_empty() {
            w.write_record(["key", "value"])?;
            for (k, v) in &self.summary {
                w.write_record([k.clone(), v.render()])?;
            }
        } else {
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::render))?;
            }
        }
        out.push_str(std::str::from_utf8(&w.into_inner()?)?);
        if !self.columns.is_empty() {
            for (k, v) in &self.summary {
                writeln!(out, "# summary {k}={}", v.render()).unwrap();
            }
        }
        Ok(out)
    }

    fn to_plot_data(&self) -> Result<String> {
        let Some((xl, yl, points)) = &self.plot else {
            bail!("command {} has no plot data", self.command);
        };
        let mut out = String::new();
        self.header_lines(&mut out);
        writeln!(out, "# {xl} {yl}").unwrap();
        for (x, y) in points {
            writeln!(out, "{} {}", format_float(*x), format_float(*y)).unwrap();
        }
        Ok(out)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(json_text(&self.to_json())),
            Format::Csv => self.to_csv(),
            Format::PlotData => self.to_plot_data(),
        }
    }
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are serializable");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
