//! Two-step Engle-Granger analysis: OLS of the measured series on its
//! predictor, then unit-root tests on the residuals.

use serde::{Deserialize, Serialize};

use crate::critical::{Level, UnitRootTest};
use crate::error::{Error, Result};
use crate::regression::{ols, specification_battery, OlsFit, SpecificationBattery};
use crate::series::{align, AnnualSeries, Units};
use crate::unit_root::{run_test, UnitRootResult, UnitRootSpec};

/// Coefficients of `π(t) = A0·UE(t-t0) + A1·rate(t-t1) + A2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub t0: u32,
    pub t1: u32,
}

/// Labor-force input may be given as levels (converted to the change rate)
/// or directly as a rate. `ue` is needed only when `a0 != 0`.
pub fn build_predictor(lf: &AnnualSeries, ue: Option<&AnnualSeries>, c: &PredictorCoeffs) -> Result<AnnualSeries> {
    let rate = match lf.units {
        Units::Level => lf.change_rate()?,
        Units::Rate => lf.clone(),
    };
    let rate = rate.lag(c.t1);
    let (start, values) = if c.a0 != 0.0 {
        let ue = ue
            .ok_or_else(|| Error::InvalidArgument("A0 is nonzero but no unemployment series was given".into()))?
            .lag(c.t0);
        let al = align(&[&ue, &rate])?;
        let v = al.columns[0]
            .iter()
            .zip(&al.columns[1])
            .map(|(u, r)| c.a0 * u + c.a1 * r + c.a2)
            .collect();
        (al.start_year, v)
    } else {
        (rate.start_year, rate.values.iter().map(|r| c.a1 * r + c.a2).collect())
    };
    AnnualSeries::new("predicted", start, values, Units::Rate)
}

/// `y - MA_k(predictor)` on the common span, named `diff{k}`.
pub fn residual_series(y: &AnnualSeries, predictor: &AnnualSeries, k: usize) -> Result<AnnualSeries> {
    let smoothed = predictor.trailing_ma(k)?;
    Ok(y.sub(&smoothed)?.renamed(format!("diff{k}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngleGrangerResult {
    pub first_stage: OlsFit,
    pub residual_tests: Vec<UnitRootResult>,
    /// Strictest level at which any residual test rejects a unit root.
    pub cointegrated_at: Option<Level>,
    pub diagnostics: SpecificationBattery,
    pub notes: Vec<String>,
}

pub const EG_CAVEAT: &str = "residual unit-root tests use ordinary Dickey-Fuller critical values; \
     residual-based cointegration critical values are stricter, so rejections here are anticonservative";

pub fn engle_granger(
    y: &AnnualSeries,
    predictors: &[&AnnualSeries],
    ur_specs: &[(UnitRootTest, UnitRootSpec)],
) -> Result<EngleGrangerResult> {
    if predictors.is_empty() {
        return Err(Error::InvalidArgument("no predictors".into()));
    }
    for p in predictors {
        let al = align(&[y, p])?;
        let v = &al.columns[1];
        let m = v.iter().sum::<f64>() / v.len() as f64;
        if v.iter().all(|x| (x - m).abs() <= 1e-14 * m.abs().max(1.0)) {
            return Err(Error::Degenerate(format!("predictor `{}` has zero variance", p.name)));
        }
    }
    let fit = ols(y, predictors, true)?;
    let scale = fit.y.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if fit.residuals.values.iter().all(|e| e.abs() <= 1e-12 * scale) {
        return Err(Error::Degenerate(
            "first stage fits exactly; zero residuals say nothing about cointegration".into(),
        ));
    }
    let residual_tests = ur_specs
        .iter()
        .map(|(test, spec)| run_test(*test, &fit.residuals, *spec))
        .collect::<Result<Vec<_>>>()?;
    let cointegrated_at = residual_tests.iter().filter_map(|r| r.reject_at).min();
    let diagnostics = specification_battery(&fit)?;
    Ok(EngleGrangerResult {
        first_stage: fit,
        residual_tests,
        cointegrated_at,
        diagnostics,
        notes: vec![EG_CAVEAT.to_string()],
    })
}
