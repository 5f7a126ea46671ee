//! Tabular datasets and their CSV/JSON renderings.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

/// Version tag carried by every output file.
pub const SCHEMA: &str = "voi-design/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Missing,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            // adding zero folds -0 into 0 so files never print a signed zero
            Cell::Num(v + 0.0)
        } else {
            Cell::Missing
        }
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::from)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

/// One chart's worth of data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub command: &'static str,
    /// Resolved parameters, echoed so the file can be regenerated.
    pub parameters: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Dataset {
    pub fn new<S: Into<String>>(
        command: &'static str,
        parameters: Value,
        columns: impl IntoIterator<Item = S>,
    ) -> Self {
        Dataset {
            command,
            parameters,
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => {
                let doc = json!({
                    "schema": SCHEMA,
                    "command": self.command,
                    "parameters": self.parameters,
                    "columns": self.columns,
                    "rows": self.rows,
                });
                pretty(&doc)
            }
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# schema: {SCHEMA}").unwrap();
        writeln!(out, "# command: {} {}", self.command, self.parameters).unwrap();
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}
