//! Comma-delimited annual datasets: one row per year, year in the first
//! column, blank cells only at the ragged ends of a column. Leading `#` lines
//! carry provenance text.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::series::{AnnualSeries, Units};

/// Which columns are levels; everything else is read as a rate.
#[derive(Debug, Clone)]
pub struct Schema {
    pub level_columns: BTreeSet<String>,
    /// Divide rate columns by 100 at ingest.
    pub percent_input: bool,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            level_columns: ["LF".to_string()].into_iter().collect(),
            percent_input: false,
        }
    }
}

impl Schema {
    pub fn with_percent_input(mut self, on: bool) -> Self {
        self.percent_input = on;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Column order as in the file, derived series appended.
    pub series: Vec<AnnualSeries>,
    pub provenance: String,
}

impl Dataset {
    pub fn get(&self, name: &str) -> Option<&AnnualSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&AnnualSeries> {
        self.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("dataset has no series `{name}`")))
    }

    pub fn names(&self) -> Vec<&str> {
        self.series.iter().map(|s| s.name.as_str()).collect()
    }

    fn push(&mut self, s: AnnualSeries) {
        self.series.retain(|x| x.name != s.name);
        self.series.push(s);
    }
}

pub fn load(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let text = fs::read_to_string(path.as_ref())?;
    parse(&text, schema)
}

pub fn parse(text: &str, schema: &Schema) -> Result<Dataset> {
    let mut provenance = Vec::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix('#') {
            provenance.push(rest.strip_prefix(' ').unwrap_or(rest).trim_end().to_string());
            body_start += line.len();
        } else if t.trim().is_empty() {
            body_start += line.len();
        } else {
            break;
        }
    }
    // Rows counted from 1 at the header line, comments excluded.
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(&text.as_bytes()[body_start..]);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return Err(Error::Data {
            row: 1,
            column: headers.first().cloned().unwrap_or_default(),
            message: "need a year column and at least one series".into(),
        });
    }
    let ncol = headers.len() - 1;
    let mut years: Vec<i32> = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); ncol];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let year_txt = rec.get(0).unwrap_or("");
        let year: i32 = year_txt.parse().map_err(|_| Error::Data {
            row,
            column: headers[0].clone(),
            message: format!("`{year_txt}` is not a year"),
        })?;
        if let Some(&prev) = years.last() {
            if year == prev {
                return Err(Error::Data { row, column: headers[0].clone(), message: format!("duplicate year {year}") });
            }
            if year != prev + 1 {
                return Err(Error::Data {
                    row,
                    column: headers[0].clone(),
                    message: format!("year {year} does not follow {prev}"),
                });
            }
        }
        years.push(year);
        for j in 0..ncol {
            let txt = rec.get(j + 1).unwrap_or("");
            let cell = if txt.is_empty() {
                None
            } else {
                let v: f64 = txt.parse().map_err(|_| Error::Data {
                    row,
                    column: headers[j + 1].clone(),
                    message: format!("`{txt}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Data { row, column: headers[j + 1].clone(), message: "non-finite value".into() });
                }
                Some(v)
            };
            cells[j].push(cell);
        }
    }
    if years.is_empty() {
        return Err(Error::Data { row: 2, column: headers[0].clone(), message: "no data rows".into() });
    }
    let mut series = Vec::with_capacity(ncol);
    for (j, col) in cells.into_iter().enumerate() {
        let name = &headers[j + 1];
        let Some(first) = col.iter().position(Option::is_some) else {
            warn!("column `{name}` is empty; skipped");
            continue;
        };
        let last = col.iter().rposition(Option::is_some).unwrap();
        if let Some(gap) = (first..=last).find(|&i| col[i].is_none()) {
            return Err(Error::Data { row: gap + 2, column: name.clone(), message: "interior blank cell".into() });
        }
        let is_level = schema.level_columns.contains(name);
        let mut values = Vec::with_capacity(last - first + 1);
        for (i, v) in col[first..=last].iter().enumerate() {
            let mut v = v.unwrap();
            let row = first + i + 2;
            if is_level {
                if v <= 0.0 {
                    return Err(Error::Data { row, column: name.clone(), message: format!("level {v} must be positive") });
                }
            } else {
                if schema.percent_input {
                    v /= 100.0;
                }
                if v.abs() > 1.0 {
                    return Err(Error::Data {
                        row,
                        column: name.clone(),
                        message: format!("rate {v} outside [-1, 1]; percent values need explicit percent input"),
                    });
                }
            }
            values.push(v);
        }
        let units = if is_level { Units::Level } else { Units::Rate };
        series.push(AnnualSeries::new(name.clone(), years[first], values, units)?);
    }
    Ok(Dataset { series, provenance: provenance.join("\n") })
}

/// Writes a file that [`load`] reads back to identical values.
pub fn save(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), to_csv_string(ds)?)?;
    Ok(())
}

pub fn to_csv_string(ds: &Dataset) -> Result<String> {
    let mut out = String::new();
    for line in ds.provenance.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    if ds.series.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let lo = ds.series.iter().map(|s| s.start_year).min().unwrap();
    let hi = ds.series.iter().map(|s| s.end_year()).max().unwrap();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["year".to_string()];
    header.extend(ds.series.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for year in lo..=hi {
        let mut rec = vec![year.to_string()];
        rec.extend(ds.series.iter().map(|s| s.get(year).map_or(String::new(), |v| format!("{v:?}"))));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
    Ok(out)
}

/// Adds `dLF/LF` and the first differences of every rate series
/// (`dGDPD`, `dCPI`, `d(dLF/LF)`, `dUE`, ...).
pub fn derive(ds: &Dataset) -> Result<Dataset> {
    let mut out = ds.clone();
    match ds.get("LF") {
        Some(lf) => out.push(lf.change_rate()?),
        None => warn!("no LF column; dLF/LF and its difference are not derived"),
    }
    let rates: Vec<AnnualSeries> = ds
        .series
        .iter()
        .filter(|s| s.units == Units::Rate)
        .chain(out.get("dLF/LF"))
        .cloned()
        .collect();
    for s in rates {
        if s.len() < 2 {
            warn!("`{}` too short to difference", s.name);
            continue;
        }
        let name = if s.name.contains('/') { format!("d({})", s.name) } else { format!("d{}", s.name) };
        out.push(s.first_diff()?.renamed(name));
    }
    Ok(out)
}

/// The eight series of the descriptive-statistics table, in order.
pub const TABLE1_SERIES: [&str; 8] = ["GDPD", "CPI", "dLF/LF", "UE", "dGDPD", "dCPI", "d(dLF/LF)", "dUE"];
