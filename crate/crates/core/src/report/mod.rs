//! Machine-readable reports: named tables, two-column figure files and run
//! metadata. Output carries no timestamps, so reruns are byte-identical.

pub mod commands;
pub mod config;
pub mod reference;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::series::AnnualSeries;

pub use commands::{Context, DataSource};
pub use config::Config;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.replace(['\t', '\n'], " "),
            Cell::Empty => String::new(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Text(t) => s.serialize_str(t),
            _ => s.serialize_none(),
        }
    }
}

/// Six significant digits; scientific notation outside `[1e-3, 1e6)`.
pub fn format_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e6).contains(&a) {
        let decimals = (5 - a.log10().floor() as i32).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.5e}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Operation that produced the cells and its exact parameters.
    pub operation: String,
    pub parameters: Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: impl Into<String>, title: impl Into<String>, columns: &[&str], operation: impl Into<String>, parameters: Value) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            operation: operation.into(),
            parameters,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// One year/value curve written as its own two-column file.
#[derive(Debug, Clone, Serialize)]
pub struct Figure {
    pub name: String,
    pub title: String,
    pub series: AnnualSeries,
}

impl Figure {
    pub fn new(name: impl Into<String>, title: impl Into<String>, series: AnnualSeries) -> Self {
        Self { name: name.into(), title: title.into(), series }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("year\t{}\n", self.series.name);
        for (y, v) in self.series.years().zip(&self.series.values) {
            let _ = writeln!(out, "{y}\t{v:?}");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub data_source: String,
    pub data_sha256: String,
    pub provenance: String,
    pub seed: u64,
    pub parameters: Value,
    pub notes: Vec<String>,
    /// Data-provenance and degeneracy diagnostics raised during the run.
    pub diagnostics: Vec<String>,
    pub tables: Vec<TableIndex>,
    pub figures: Vec<FigureIndex>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableIndex {
    pub name: String,
    pub title: String,
    pub operation: String,
    pub parameters: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureIndex {
    pub name: String,
    pub title: String,
    pub first_year: i32,
    pub last_year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Tsv,
    Structured,
}

#[derive(Debug, Clone, Default)]
pub struct ReportBundle {
    pub tables: Vec<Table>,
    pub figures: Vec<Figure>,
    pub notes: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl ReportBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn note(&mut self, s: impl Into<String>) {
        let s = s.into();
        if !self.notes.contains(&s) {
            self.notes.push(s);
        }
    }

    pub fn diagnose(&mut self, s: impl Into<String>) {
        let s = s.into();
        log::warn!("{s}");
        if !self.diagnostics.contains(&s) {
            self.diagnostics.push(s);
        }
    }

    pub fn metadata(&self, command: &str, ctx: &Context, parameters: Value) -> Metadata {
        Metadata {
            command: command.to_string(),
            config_hash: ctx.config.hash(),
            data_source: ctx.source.label.clone(),
            data_sha256: ctx.source.sha256.clone(),
            provenance: ctx.dataset.provenance.clone(),
            seed: ctx.seed,
            parameters,
            notes: self.notes.clone(),
            diagnostics: self.diagnostics.clone(),
            tables: self
                .tables
                .iter()
                .map(|t| TableIndex {
                    name: t.name.clone(),
                    title: t.title.clone(),
                    operation: t.operation.clone(),
                    parameters: t.parameters.clone(),
                })
                .collect(),
            figures: self
                .figures
                .iter()
                .map(|f| FigureIndex {
                    name: f.name.clone(),
                    title: f.title.clone(),
                    first_year: f.series.start_year,
                    last_year: f.series.end_year(),
                })
                .collect(),
        }
    }

    /// Writes `tables/*.tsv` (or `report.json`), `figures/*.tsv` and
    /// `metadata.json` under `dir`.
    pub fn write(&self, dir: &Path, format: Format, meta: &Metadata) -> Result<()> {
        fs::create_dir_all(dir)?;
        match format {
            Format::Tsv => {
                let tdir = dir.join("tables");
                fs::create_dir_all(&tdir)?;
                for t in &self.tables {
                    fs::write(tdir.join(format!("{}.tsv", file_stem(&t.name))), t.to_tsv())?;
                }
            }
            Format::Structured => {
                let doc = serde_json::json!({ "tables": self.tables });
                fs::write(dir.join("report.json"), to_pretty_json(&doc)?)?;
            }
        }
        if !self.figures.is_empty() {
            let fdir = dir.join("figures");
            fs::create_dir_all(&fdir)?;
            for f in &self.figures {
                fs::write(fdir.join(format!("{}.tsv", file_stem(&f.name))), f.to_tsv())?;
            }
        }
        fs::write(dir.join("metadata.json"), to_pretty_json(meta)?)?;
        Ok(())
    }

    /// Tables for a terminal: TSV blocks under `## name` headings, or one
    /// JSON document.
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Tsv => {
                let mut out = String::new();
                for t in &self.tables {
                    let _ = writeln!(out, "## {}\t{}", t.name, t.title);
                    out.push_str(&t.to_tsv());
                    out.push('\n');
                }
                Ok(out)
            }
            Format::Structured => to_pretty_json(&serde_json::json!({ "tables": self.tables })),
        }
    }

    pub fn extend(&mut self, other: ReportBundle) {
        self.tables.extend(other.tables);
        self.figures.extend(other.figures);
        for n in other.notes {
            self.note(n);
        }
        for d in other.diagnostics {
            if !self.diagnostics.contains(&d) {
                self.diagnostics.push(d);
            }
        }
    }
}

fn to_pretty_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(format!("JSON encoding: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// File-system-safe name: `d(dLF/LF)` becomes `d_dLF_LF`.
pub fn file_stem(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() || ch == '-' || ch == '.' {
            out.push(ch);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}
