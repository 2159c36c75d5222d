//! Augmented Dickey-Fuller and DF-GLS unit-root tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::critical::{critical_values, Deterministic, Level, UnitRootTest};
use crate::error::{Error, Result};
use crate::regression::lstsq;
use crate::series::AnnualSeries;

/// Smallest effective sample either test accepts.
pub const MIN_EFFECTIVE_SAMPLE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRootSpec {
    pub deterministic: Deterministic,
    /// Number of lagged differences in the test regression.
    pub lags: usize,
}

impl UnitRootSpec {
    pub fn new(deterministic: Deterministic, lags: usize) -> Self {
        Self { deterministic, lags }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRootResult {
    pub test: UnitRootTest,
    pub series: String,
    pub statistic: f64,
    pub spec: UnitRootSpec,
    pub n_obs: usize,
    /// Critical values at 1%, 5%, 10%.
    pub critical_values: [f64; 3],
    /// Strictest level at which the unit-root null is rejected.
    pub reject_at: Option<Level>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl UnitRootResult {
    pub fn rejects(&self, level: Level) -> bool {
        matches!(self.reject_at, Some(l) if l <= level)
    }
}

fn verdict(statistic: f64, cv: &[f64; 3]) -> Option<Level> {
    Level::ALL.into_iter().zip(cv).find(|(_, c)| statistic < **c).map(|(l, _)| l)
}

/// t-ratio on the lagged level in
/// `dy_t = det + rho y_{t-1} + sum_j g_j dy_{t-j} + e_t`.
/// Returns the statistic and the number of observations used.
pub fn adf_statistic(y: &[f64], lags: usize, det: Deterministic) -> Result<(f64, usize)> {
    let n = y.len();
    if n < lags + 2 {
        return Err(Error::InsufficientData(format!("{n} values for {lags} lags")));
    }
    let m = n - lags - 1;
    if m < MIN_EFFECTIVE_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "effective sample {m} < {MIN_EFFECTIVE_SAMPLE}"
        )));
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = dy.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    let n_det = match det {
        Deterministic::None => 0,
        Deterministic::Constant => 1,
        Deterministic::Trend => 2,
    };
    let k = 1 + n_det + lags;
    // Observation i of the regression is dy[lags + i], i.e. y index lags + i + 1.
    let x = DMatrix::from_fn(m, k, |i, j| {
        let t = lags + i;
        if j == 0 {
            y[t]
        } else if j <= n_det {
            if j == 1 {
                1.0
            } else {
                (i + 1) as f64
            }
        } else {
            dy[t - (j - n_det)]
        }
    });
    let resp = DVector::from_iterator(m, (0..m).map(|i| dy[lags + i]));
    let sol = lstsq(&x, &resp)?;
    if sol.ssr <= 1e-28 * resp.norm_squared().max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("test regression fits exactly".into()));
    }
    let se = (sol.sigma2() * sol.xtx_inv[(0, 0)]).sqrt();
    Ok((sol.coefficients[0] / se, m))
}

pub fn adf_test(s: &AnnualSeries, spec: UnitRootSpec) -> Result<UnitRootResult> {
    let (statistic, n_obs) = adf_statistic(&s.values, spec.lags, spec.deterministic)?;
    let cv = critical_values(UnitRootTest::Adf, spec.deterministic, n_obs)?;
    Ok(UnitRootResult {
        test: UnitRootTest::Adf,
        series: s.name.clone(),
        statistic,
        spec,
        n_obs,
        critical_values: cv,
        reject_at: verdict(statistic, &cv),
        notes: Vec::new(),
    })
}

/// Local-to-unity GLS demeaning (`c = -7`) or detrending (`c = -13.5`).
pub fn gls_detrend(y: &[f64], det: Deterministic) -> Result<Vec<f64>> {
    let cbar = match det {
        Deterministic::Constant => -7.0,
        Deterministic::Trend => -13.5,
        Deterministic::None => {
            return Err(Error::Unsupported("DF-GLS requires a constant or a trend".into()))
        }
    };
    let n = y.len();
    let a = 1.0 + cbar / n as f64;
    let nz = if det == Deterministic::Trend { 2 } else { 1 };
    let z = |t: usize, j: usize| if j == 0 { 1.0 } else { (t + 1) as f64 };
    let zq = DMatrix::from_fn(n, nz, |t, j| if t == 0 { z(0, j) } else { z(t, j) - a * z(t - 1, j) });
    let yq = DVector::from_iterator(n, (0..n).map(|t| if t == 0 { y[0] } else { y[t] - a * y[t - 1] }));
    let sol = lstsq(&zq, &yq)?;
    Ok((0..n)
        .map(|t| y[t] - (0..nz).map(|j| z(t, j) * sol.coefficients[j]).sum::<f64>())
        .collect())
}

pub fn dfgls_test(s: &AnnualSeries, spec: UnitRootSpec) -> Result<UnitRootResult> {
    if spec.deterministic == Deterministic::None {
        return Err(Error::Unsupported("DF-GLS requires a constant or a trend".into()));
    }
    if s.values.len() < spec.lags + 2 + MIN_EFFECTIVE_SAMPLE - 1 {
        return Err(Error::InsufficientData(format!(
            "`{}` has {} values for {} lags",
            s.name,
            s.values.len(),
            spec.lags
        )));
    }
    let scale = s.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let spread = s.values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v))
        - s.values.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if spread <= 1e-14 * scale || spread == 0.0 {
        return Err(Error::Degenerate(format!("`{}` has zero variance", s.name)));
    }
    let detrended = gls_detrend(&s.values, spec.deterministic)?;
    let (statistic, n_obs) = adf_statistic(&detrended, spec.lags, Deterministic::None)?;
    let cv = critical_values(UnitRootTest::DfGls, spec.deterministic, n_obs)?;
    Ok(UnitRootResult {
        test: UnitRootTest::DfGls,
        series: s.name.clone(),
        statistic,
        spec,
        n_obs,
        critical_values: cv,
        reject_at: verdict(statistic, &cv),
        notes: Vec::new(),
    })
}

pub fn run_test(test: UnitRootTest, s: &AnnualSeries, spec: UnitRootSpec) -> Result<UnitRootResult> {
    match test {
        UnitRootTest::Adf => adf_test(s, spec),
        UnitRootTest::DfGls => dfgls_test(s, spec),
    }
}

/// One row of the residual battery: ADF over `adf_lags`, DF-GLS over
/// `dfgls_lags`, both with a constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryRow {
    pub series: String,
    pub adf: Vec<UnitRootResult>,
    pub dfgls: Vec<UnitRootResult>,
}

pub fn residual_unit_root_battery(
    diffs: &[AnnualSeries],
    adf_lags: std::ops::RangeInclusive<usize>,
    dfgls_lags: std::ops::RangeInclusive<usize>,
) -> Result<Vec<BatteryRow>> {
    diffs
        .iter()
        .map(|s| {
            if s.len() < MIN_EFFECTIVE_SAMPLE {
                return Err(Error::TooShort {
                    name: s.name.clone(),
                    needed: MIN_EFFECTIVE_SAMPLE,
                    got: s.len(),
                });
            }
            let adf = adf_lags
                .clone()
                .map(|p| adf_test(s, UnitRootSpec::new(Deterministic::Constant, p)))
                .collect::<Result<Vec<_>>>()?;
            let dfgls = dfgls_lags
                .clone()
                .map(|p| dfgls_test(s, UnitRootSpec::new(Deterministic::Constant, p)))
                .collect::<Result<Vec<_>>>()?;
            Ok(BatteryRow { series: s.name.clone(), adf, dfgls })
        })
        .collect()
}
