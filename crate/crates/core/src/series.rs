//! Year-indexed annual series and the transforms built on them.
//!
//! Every series is contiguous: element `i` belongs to `start_year + i`.
//! Rates are stored as fractions (0.053, not 5.3).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Dimensionless fraction per year.
    Rate,
    /// Level (index, head count, ...).
    Level,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Units::Rate => f.write_str("rate"),
            Units::Level => f.write_str("level"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries {
    pub name: String,
    pub start_year: i32,
    pub values: Vec<f64>,
    pub units: Units,
}

/// Moments with divisor N; kurtosis is raw (normal = 3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub stdev: f64,
    /// `None` for a zero-variance series.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

/// Optional first/last year of an estimation sample. Lagged values may reach
/// back before `start`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Option<i32>,
    pub end: Option<i32>,
}

impl Window {
    pub fn new(start: i32, end: i32) -> Self {
        Self { start: Some(start), end: Some(end) }
    }

    pub fn all() -> Self {
        Self::default()
    }
}

/// Rectangular observation block produced by [`align`].
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub start_year: i32,
    pub names: Vec<String>,
    /// `columns[j][t]` is series `j` at year `start_year + t`.
    pub columns: Vec<Vec<f64>>,
}

impl Aligned {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.len() as i32 - 1
    }

    pub fn column_series(&self, j: usize, units: Units) -> AnnualSeries {
        AnnualSeries {
            name: self.names[j].clone(),
            start_year: self.start_year,
            values: self.columns[j].clone(),
            units,
        }
    }
}

impl AnnualSeries {
    pub fn new(name: impl Into<String>, start_year: i32, values: Vec<f64>, units: Units) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::TooShort { name, needed: 1, got: 0 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { name, year: start_year + i as i32 });
        }
        Ok(Self { name, start_year, values, units })
    }

    pub fn rate(name: impl Into<String>, start_year: i32, values: Vec<f64>) -> Result<Self> {
        Self::new(name, start_year, values, Units::Rate)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.values.len()).map(move |i| self.start_year + i as i32)
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        if year < self.start_year {
            return None;
        }
        self.values.get((year - self.start_year) as usize).copied()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn require_len(&self, needed: usize) -> Result<()> {
        if self.values.len() < needed {
            return Err(Error::TooShort {
                name: self.name.clone(),
                needed,
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Restrict to `[start, end]` (either bound optional).
    pub fn window(&self, start: Option<i32>, end: Option<i32>) -> Result<Self> {
        let lo = start.unwrap_or(self.start_year).max(self.start_year);
        let hi = end.unwrap_or(self.end_year()).min(self.end_year());
        if lo > hi {
            return Err(Error::NoOverlap(format!(
                "`{}` ({}-{}) and window {:?}-{:?}",
                self.name,
                self.start_year,
                self.end_year(),
                start,
                end
            )));
        }
        let a = (lo - self.start_year) as usize;
        let b = (hi - self.start_year) as usize;
        Ok(Self {
            name: self.name.clone(),
            start_year: lo,
            values: self.values[a..=b].to_vec(),
            units: self.units,
        })
    }

    pub fn first_diff(&self) -> Result<Self> {
        self.require_len(2)?;
        let values = self.values.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            name: format!("d{}", self.name),
            start_year: self.start_year + 1,
            values,
            units: self.units,
        })
    }

    /// `(L(t) - L(t-1)) / L(t-1)`, dated at year `t`.
    pub fn change_rate(&self) -> Result<Self> {
        self.require_len(2)?;
        if let Some((i, &v)) = self.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::NonPositiveLevel {
                name: self.name.clone(),
                year: self.start_year + i as i32,
                value: v,
            });
        }
        let values = self.values.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
        Ok(Self {
            name: format!("d{0}/{0}", self.name),
            start_year: self.start_year + 1,
            values,
            units: Units::Rate,
        })
    }

    /// Re-date every observation `k` years later, so that at year `t` the
    /// lagged series holds the value observed at `t - k`.
    pub fn lag(&self, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        Self {
            name: format!("{}(t-{k})", self.name),
            start_year: self.start_year + k as i32,
            values: self.values.clone(),
            units: self.units,
        }
    }

    /// Strictly trailing moving average: mean of the `k` values ending at `t`.
    pub fn trailing_ma(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("moving-average window must be >= 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        self.require_len(k)?;
        let values = self
            .values
            .windows(k)
            .map(|w| w.iter().sum::<f64>() / k as f64)
            .collect();
        Ok(Self {
            name: format!("MA{k}({})", self.name),
            start_year: self.start_year + k as i32 - 1,
            values,
            units: self.units,
        })
    }

    pub fn cumsum(&self) -> Self {
        let mut acc = 0.0;
        let values = self
            .values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Self {
            name: format!("cum({})", self.name),
            start_year: self.start_year,
            values,
            units: Units::Level,
        }
    }

    pub fn describe(&self) -> Result<DescriptiveStats> {
        describe_values(&self.name, &self.values)
    }

    /// Pointwise `self - other` on the common span.
    pub fn sub(&self, other: &AnnualSeries) -> Result<Self> {
        let al = align(&[self, other])?;
        let values = al.columns[0].iter().zip(&al.columns[1]).map(|(a, b)| a - b).collect();
        Ok(Self {
            name: format!("{}-{}", self.name, other.name),
            start_year: al.start_year,
            values,
            units: self.units,
        })
    }

    /// `a * self + b`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            name: self.name.clone(),
            start_year: self.start_year,
            values: self.values.iter().map(|v| a * v + b).collect(),
            units: self.units,
        }
    }
}

pub fn describe_values(name: &str, values: &[f64]) -> Result<DescriptiveStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooShort { name: name.to_string(), needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let stdev = m2.sqrt();
    // Relative threshold so that constant series with rounding noise count as degenerate.
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let degenerate = stdev <= 1e-14 * scale.max(f64::MIN_POSITIVE) || stdev == 0.0;
    let (skewness, kurtosis) = if degenerate {
        (None, None)
    } else {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    };
    Ok(DescriptiveStats { n, mean, stdev, skewness, kurtosis })
}

/// Intersect the year spans of `series` into a rectangular block.
pub fn align(series: &[&AnnualSeries]) -> Result<Aligned> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("align needs at least one series".into()));
    }
    let start = series.iter().map(|s| s.start_year).max().unwrap();
    let end = series.iter().map(|s| s.end_year()).min().unwrap();
    if start > end {
        let names: Vec<_> = series
            .iter()
            .map(|s| format!("{} ({}-{})", s.name, s.start_year, s.end_year()))
            .collect();
        return Err(Error::NoOverlap(names.join(", ")));
    }
    let columns = series
        .iter()
        .map(|s| {
            let a = (start - s.start_year) as usize;
            let b = (end - s.start_year) as usize;
            s.values[a..=b].to_vec()
        })
        .collect();
    Ok(Aligned {
        start_year: start,
        names: series.iter().map(|s| s.name.clone()).collect(),
        columns,
    })
}

/// Like [`align`], then clip to an optional `[start, end]` window.
pub fn align_window(series: &[&AnnualSeries], start: Option<i32>, end: Option<i32>) -> Result<Aligned> {
    let al = align(series)?;
    let lo = start.unwrap_or(al.start_year).max(al.start_year);
    let hi = end.unwrap_or(al.end_year()).min(al.end_year());
    if lo > hi {
        return Err(Error::NoOverlap(format!(
            "common span {}-{} and window {:?}-{:?}",
            al.start_year,
            al.end_year(),
            start,
            end
        )));
    }
    let a = (lo - al.start_year) as usize;
    let b = (hi - al.start_year) as usize;
    Ok(Aligned {
        start_year: lo,
        names: al.names,
        columns: al.columns.into_iter().map(|c| c[a..=b].to_vec()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(start: i32, v: &[f64]) -> AnnualSeries {
        AnnualSeries::rate("x", start, v.to_vec()).unwrap()
    }

    #[test]
    fn first_diff_basic() {
        assert_eq!(s(2000, &[5.0, 5.0, 5.0]).first_diff().unwrap().values, vec![0.0, 0.0]);
        let d = s(2000, &[1.0, 2.0, 4.0]).first_diff().unwrap();
        assert_eq!(d.values, vec![1.0, 2.0]);
        assert_eq!(d.start_year, 2001);
        assert!(s(2000, &[1.0]).first_diff().is_err());
    }

    #[test]
    fn change_rate_dating_and_errors() {
        let lf = AnnualSeries::new("LF", 1990, vec![100.0, 102.0], Units::Level).unwrap();
        let r = lf.change_rate().unwrap();
        assert_eq!(r.start_year, 1991);
        assert!((r.values[0] - 0.02).abs() < 1e-15);
        assert_eq!(r.name, "dLF/LF");
        let flat = AnnualSeries::new("LF", 1990, vec![7.0; 5], Units::Level).unwrap();
        assert!(flat.change_rate().unwrap().values.iter().all(|v| *v == 0.0));
        let bad = AnnualSeries::new("LF", 1990, vec![1.0, 0.0, 2.0], Units::Level).unwrap();
        assert!(matches!(bad.change_rate(), Err(Error::NonPositiveLevel { year: 1991, .. })));
    }

    #[test]
    fn lag_redates() {
        let x = s(1957, &[1.0, 2.0, 3.0]);
        assert_eq!(x.lag(0), x);
        let l = x.lag(4);
        assert_eq!(l.len(), 3);
        assert_eq!(l.start_year, 1961);
        assert_eq!(l.get(1961), Some(1.0));
    }

    #[test]
    fn lagged_overlap_count() {
        // dLF/LF 1957-2004 lagged by 4 covers 1961-2008; GDPD covers 1971-2004.
        let rate = s(1957, &vec![0.0; 48]);
        let gdpd = s(1971, &vec![0.0; 34]);
        let lagged = rate.lag(4);
        let al = align(&[&gdpd, &lagged]).unwrap();
        assert_eq!(al.len(), 34);
        assert_eq!(al.start_year, 1971);
    }

    #[test]
    fn trailing_ma_cases() {
        let x = s(2000, &[0.0, 3.0, 6.0]);
        assert_eq!(x.trailing_ma(1).unwrap(), x);
        let m = x.trailing_ma(3).unwrap();
        assert_eq!(m.values, vec![3.0]);
        assert_eq!(m.start_year, 2002);
        assert!(x.trailing_ma(4).is_err());
        assert!(x.trailing_ma(0).is_err());
    }

    #[test]
    fn cumsum_cases() {
        assert_eq!(s(2000, &[1.0, 1.0, 1.0]).cumsum().values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn describe_cases() {
        let d = s(2000, &[1.0, 1.0, 1.0, 1.0]).describe().unwrap();
        assert_eq!(d.mean, 1.0);
        assert_eq!(d.stdev, 0.0);
        assert!(d.skewness.is_none() && d.kurtosis.is_none());
        let d = s(2000, &[-1.0, 1.0]).describe().unwrap();
        assert_eq!(d.skewness, Some(0.0));
        assert_eq!(d.kurtosis, Some(1.0));
    }

    #[test]
    fn align_cases() {
        let a = s(2000, &[1.0, 2.0, 3.0]);
        let al = align(&[&a, &a]).unwrap();
        assert_eq!(al.len(), 3);
        let long = s(1957, &vec![0.0; 48]);
        let short = s(1971, &vec![0.0; 34]);
        assert_eq!(align(&[&long, &short]).unwrap().len(), 34);
        let far = s(2010, &[1.0]);
        assert!(matches!(align(&[&a, &far]), Err(Error::NoOverlap(_))));
        assert!(align(&[]).is_err());
    }

    #[test]
    fn window_clips() {
        let a = s(2000, &[1.0, 2.0, 3.0, 4.0]);
        let w = a.window(Some(2001), Some(2002)).unwrap();
        assert_eq!(w.values, vec![2.0, 3.0]);
        assert!(a.window(Some(2010), None).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(AnnualSeries::rate("x", 2000, vec![1.0, f64::NAN]).is_err());
        assert!(AnnualSeries::rate("x", 2000, vec![]).is_err());
    }
}
