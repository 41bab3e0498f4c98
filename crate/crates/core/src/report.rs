//! Tabular reports and their CSV / JSON serialisation.
//!
//! Numbers are written with 12 significant digits. With the percent view
//! enabled, every probability-valued column gains a `<name>_pct` sibling
//! rounded half-to-even to 0.1 percentage points.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value as Json};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Rounds `x` to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    s.parse().expect("formatted float parses")
}

/// 12-significant-digit rendering used in every output file.
pub fn format_number(x: f64) -> String {
    let r = round_significant(x, 12);
    if r == 0.0 {
        "0".to_owned()
    } else if r.abs() < 1e-6 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

/// `x` as a percentage rounded half-to-even to one decimal place.
pub fn percent(x: f64) -> f64 {
    // strip binary noise first so that decimal ties are seen as ties
    let tenths = round_significant(x * 1000.0, 10).round_ties_even();
    let p = tenths / 10.0;
    if p == 0.0 {
        0.0
    } else {
        p
    }
}

pub fn format_percent(x: f64) -> String {
    format!("{:.1}", percent(x))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Real(f64),
    /// A probability-scale quantity, eligible for the percent view.
    Prob(f64),
    Missing,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

pub fn prob(x: f64) -> Cell {
    Cell::Prob(x)
}

pub fn real(x: f64) -> Cell {
    Cell::Real(x)
}

pub fn opt_prob(x: Option<f64>) -> Cell {
    x.map_or(Cell::Missing, Cell::Prob)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(
            row.len(),
            self.columns.len(),
            "row width in table {}",
            self.name
        );
        self.rows.push(row);
    }

    fn is_prob_column(&self, idx: usize) -> bool {
        self.rows.iter().any(|r| matches!(r[idx], Cell::Prob(_)))
    }

    fn header(&self, percent_view: bool) -> Vec<String> {
        let mut out = Vec::new();
        for (i, c) in self.columns.iter().enumerate() {
            out.push(c.clone());
            if percent_view && self.is_prob_column(i) {
                out.push(format!("{c}_pct"));
            }
        }
        out
    }

    pub fn to_csv(&self, percent_view: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header(percent_view))?;
        let prob_cols: Vec<bool> = (0..self.columns.len())
            .map(|i| self.is_prob_column(i))
            .collect();
        for row in &self.rows {
            let mut rec = Vec::new();
            for (cell, &is_prob) in row.iter().zip(&prob_cols) {
                rec.push(match cell {
                    Cell::Text(s) => s.clone(),
                    Cell::Int(n) => n.to_string(),
                    Cell::Real(x) | Cell::Prob(x) => format_number(*x),
                    Cell::Missing => String::new(),
                });
                if percent_view && is_prob {
                    rec.push(match cell {
                        Cell::Prob(x) => format_percent(*x),
                        _ => String::new(),
                    });
                }
            }
            w.write_record(rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self, percent_view: bool) -> Json {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    let v = match cell {
                        Cell::Text(s) => json!(s),
                        Cell::Int(n) => json!(n),
                        Cell::Real(x) | Cell::Prob(x) => json!(round_significant(*x, 12)),
                        Cell::Missing => Json::Null,
                    };
                    obj.insert(name.clone(), v);
                    if percent_view {
                        if let Cell::Prob(x) = cell {
                            obj.insert(format!("{name}_pct"), json!(percent(*x)));
                        }
                    }
                }
                Json::Object(obj)
            })
            .collect();
        Json::Array(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            tables: Vec::new(),
        }
    }

    pub fn add(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self, percent_view: bool) -> Json {
        let mut tables = Map::new();
        for t in &self.tables {
            tables.insert(t.name.clone(), t.to_json(percent_view));
        }
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "tables": tables,
        })
    }

    /// Everything as one text stream: JSON, or CSV tables each preceded by a
    /// `# name` line.
    pub fn render(&self, format: Format, percent_view: bool) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.to_json(percent_view))? + "\n"),
            Format::Csv => {
                let mut out = String::new();
                for (i, t) in self.tables.iter().enumerate() {
                    if i > 0 {
                        out.push('\n');
                    }
                    out.push_str(&format!("# {}\n", t.name));
                    out.push_str(&t.to_csv(percent_view)?);
                }
                Ok(out)
            }
        }
    }

    /// Writes `report.json`, or one `<table>.csv` per table, into `dir`.
    /// Returns the paths written.
    pub fn write_to(
        &self,
        dir: &Path,
        format: Format,
        percent_view: bool,
    ) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        match format {
            Format::Json => {
                let path = dir.join("report.json");
                fs::write(&path, self.render(format, percent_view)?)?;
                written.push(path);
            }
            Format::Csv => {
                for t in &self.tables {
                    let path = dir.join(format!("{}.csv", t.name));
                    fs::write(&path, t.to_csv(percent_view)?)?;
                    written.push(path);
                }
            }
        }
        Ok(written)
    }
}
