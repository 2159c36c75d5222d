//! Embedded finite-sample critical values, interpolated linearly in `1/n`.
//!
//! ADF tables are Fuller's Dickey-Fuller tau percentiles. DF-GLS with a
//! constant uses the no-deterministic Dickey-Fuller row; DF-GLS with a trend
//! uses the Elliott-Rothenberg-Stock detrended table. Below the smallest
//! tabulated size the first row is used unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Deterministic {
    None,
    Constant,
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitRootTest {
    Adf,
    DfGls,
}

/// Significance levels carried by the tables, strictest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "1%")]
    One,
    #[serde(rename = "5%")]
    Five,
    #[serde(rename = "10%")]
    Ten,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::One, Level::Five, Level::Ten];

    pub fn alpha(self) -> f64 {
        match self {
            Level::One => 0.01,
            Level::Five => 0.05,
            Level::Ten => 0.10,
        }
    }

    pub fn from_percent(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Level::One),
            5 => Ok(Level::Five),
            10 => Ok(Level::Ten),
            _ => Err(Error::Unsupported(format!("{p}% level is not tabulated"))),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

const INF: f64 = f64::INFINITY;

struct Table {
    sizes: &'static [f64],
    /// `values[level][size]`
    values: [&'static [f64]; 3],
}

const FULLER_SIZES: &[f64] = &[25.0, 50.0, 100.0, 250.0, 500.0, INF];

const ADF_NONE: Table = Table {
    sizes: FULLER_SIZES,
    values: [
        &[-2.66, -2.62, -2.60, -2.58, -2.58, -2.58],
        &[-1.95, -1.95, -1.95, -1.95, -1.95, -1.95],
        &[-1.60, -1.61, -1.61, -1.62, -1.62, -1.62],
    ],
};

const ADF_CONSTANT: Table = Table {
    sizes: FULLER_SIZES,
    values: [
        &[-3.75, -3.58, -3.51, -3.46, -3.44, -3.43],
        &[-3.00, -2.93, -2.89, -2.88, -2.87, -2.86],
        &[-2.63, -2.60, -2.58, -2.57, -2.57, -2.57],
    ],
};

const ADF_TREND: Table = Table {
    sizes: FULLER_SIZES,
    values: [
        &[-4.38, -4.15, -4.04, -3.99, -3.98, -3.96],
        &[-3.60, -3.50, -3.45, -3.43, -3.42, -3.41],
        &[-3.24, -3.18, -3.15, -3.13, -3.13, -3.12],
    ],
};

const ERS_TREND: Table = Table {
    sizes: &[50.0, 100.0, 200.0, INF],
    values: [
        &[-3.77, -3.58, -3.46, -3.48],
        &[-3.19, -3.03, -2.93, -2.89],
        &[-2.89, -2.74, -2.64, -2.57],
    ],
};

impl Table {
    fn lookup(&self, level: Level, n: usize) -> f64 {
        let row = self.values[level.index()];
        let x = 1.0 / n as f64;
        let inv = |s: f64| if s.is_infinite() { 0.0 } else { 1.0 / s };
        if x >= inv(self.sizes[0]) {
            return row[0];
        }
        for i in 1..self.sizes.len() {
            let (x0, x1) = (inv(self.sizes[i - 1]), inv(self.sizes[i]));
            if x >= x1 {
                let w = (x0 - x) / (x0 - x1);
                return row[i - 1] + w * (row[i] - row[i - 1]);
            }
        }
        *row.last().unwrap()
    }
}

fn table(test: UnitRootTest, det: Deterministic) -> Result<&'static Table> {
    match (test, det) {
        (UnitRootTest::Adf, Deterministic::None) => Ok(&ADF_NONE),
        (UnitRootTest::Adf, Deterministic::Constant) => Ok(&ADF_CONSTANT),
        (UnitRootTest::Adf, Deterministic::Trend) => Ok(&ADF_TREND),
        (UnitRootTest::DfGls, Deterministic::Constant) => Ok(&ADF_NONE),
        (UnitRootTest::DfGls, Deterministic::Trend) => Ok(&ERS_TREND),
        (UnitRootTest::DfGls, Deterministic::None) => {
            Err(Error::Unsupported("DF-GLS requires a constant or a trend".into()))
        }
    }
}

pub fn critical_value(test: UnitRootTest, det: Deterministic, level: Level, n: usize) -> Result<f64> {
    if n < 10 {
        return Err(Error::InsufficientData(format!("critical values need n >= 10, got {n}")));
    }
    Ok(table(test, det)?.lookup(level, n))
}

/// 1%, 5%, 10% critical values.
pub fn critical_values(test: UnitRootTest, det: Deterministic, n: usize) -> Result<[f64; 3]> {
    Ok([
        critical_value(test, det, Level::One, n)?,
        critical_value(test, det, Level::Five, n)?,
        critical_value(test, det, Level::Ten, n)?,
    ])
}

/// Johansen trace test: deterministic specification of the VAR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JohansenDet {
    /// Unrestricted constant.
    Constant,
    /// Constant restricted to the cointegrating space.
    RConstant,
    /// No deterministic terms.
    None,
}

impl JohansenDet {
    pub const ALL: [JohansenDet; 3] = [JohansenDet::Constant, JohansenDet::RConstant, JohansenDet::None];

    pub fn label(self) -> &'static str {
        match self {
            JohansenDet::Constant => "constant",
            JohansenDet::RConstant => "rconstant",
            JohansenDet::None => "none",
        }
    }
}

impl std::str::FromStr for JohansenDet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(JohansenDet::Constant),
            "rconstant" => Ok(JohansenDet::RConstant),
            "none" => Ok(JohansenDet::None),
            other => Err(Error::InvalidArgument(format!("unknown trend specification `{other}`"))),
        }
    }
}

// Osterwald-Lenum 5% trace quantiles, indexed by K - r = 1..=5.
const TRACE_5_CONSTANT: [f64; 5] = [3.76, 15.41, 29.68, 47.21, 68.52];
const TRACE_5_RCONSTANT: [f64; 5] = [9.42, 19.96, 34.91, 53.12, 76.07];
const TRACE_5_NONE: [f64; 5] = [3.76, 12.53, 24.31, 39.89, 59.46];

/// 5% trace critical value for `k_minus_r` common trends.
pub fn trace_critical_5pct(det: JohansenDet, k_minus_r: usize) -> Result<f64> {
    let tab = match det {
        JohansenDet::Constant => &TRACE_5_CONSTANT,
        JohansenDet::RConstant => &TRACE_5_RCONSTANT,
        JohansenDet::None => &TRACE_5_NONE,
    };
    if k_minus_r == 0 || k_minus_r > tab.len() {
        return Err(Error::Unsupported(format!(
            "trace critical values tabulated for K - r in 1..=5, got {k_minus_r}"
        )));
    }
    Ok(tab[k_minus_r - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_points_reproduced() {
        let v = critical_value(UnitRootTest::Adf, Deterministic::Constant, Level::One, 50).unwrap();
        assert!((v + 3.58).abs() < 1e-12);
        let v = critical_value(UnitRootTest::Adf, Deterministic::Constant, Level::Five, 1_000_000).unwrap();
        assert!((v + 2.86).abs() < 1e-4);
        let v = critical_value(UnitRootTest::DfGls, Deterministic::Trend, Level::One, 30).unwrap();
        assert_eq!(v, -3.77);
    }

    #[test]
    fn strictly_ordered() {
        for test in [UnitRootTest::Adf, UnitRootTest::DfGls] {
            for det in [Deterministic::None, Deterministic::Constant, Deterministic::Trend] {
                if test == UnitRootTest::DfGls && det == Deterministic::None {
                    continue;
                }
                for n in [10, 20, 33, 48, 75, 200, 400, 5000] {
                    let c = critical_values(test, det, n).unwrap();
                    assert!(c[0] < c[1] && c[1] < c[2], "{test:?} {det:?} {n}: {c:?}");
                }
            }
        }
    }

    #[test]
    fn unsupported_and_short() {
        assert!(critical_value(UnitRootTest::DfGls, Deterministic::None, Level::One, 50).is_err());
        assert!(critical_value(UnitRootTest::Adf, Deterministic::None, Level::One, 9).is_err());
        assert!(Level::from_percent(2).is_err());
        assert!(trace_critical_5pct(JohansenDet::Constant, 6).is_err());
    }
}
