//! Ordinary least squares and the residual specification battery:
//! Breusch-Pagan, RESET, ARCH LM, Breusch-Godfrey, Durbin-Watson and
//! Jarque-Bera.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{chi2_sf, f_sf, t_two_sided};
use crate::error::{Error, Result};
use crate::series::{align, describe_values, AnnualSeries, Units};

/// Columns whose scaled QR pivot falls below this are treated as collinear.
const RANK_TOL: f64 = 1e-9;

/// Plain least-squares solution on a raw design matrix.
#[derive(Debug, Clone)]
pub struct LsSolution {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub ssr: f64,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
}

impl LsSolution {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    pub fn dof(&self) -> usize {
        self.n() - self.k()
    }

    /// `SSR / (n - k)`
    pub fn sigma2(&self) -> f64 {
        self.ssr / self.dof() as f64
    }

    pub fn std_errors(&self) -> DVector<f64> {
        let s2 = self.sigma2();
        DVector::from_iterator(self.k(), (0..self.k()).map(|i| (s2 * self.xtx_inv[(i, i)]).sqrt()))
    }

    /// Centered R² of `y` against its mean.
    pub fn r_squared(&self, y: &DVector<f64>) -> f64 {
        let mean = y.mean();
        let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        if sst == 0.0 {
            return if self.ssr == 0.0 { 1.0 } else { 0.0 };
        }
        1.0 - self.ssr / sst
    }
}

/// Householder QR least squares with column equilibration and an explicit
/// rank check.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LsSolution> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("design has {n} rows, response {}", y.len())));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!("{n} observations for {k} regressors")));
    }
    let mut scale = DVector::zeros(k);
    let mut xs = x.clone();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::RankDeficient(format!("column {j} is zero or non-finite")));
        }
        scale[j] = norm;
        xs.column_mut(j).scale_mut(1.0 / norm);
    }
    let qr = xs.qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..k {
        if r[(i, i)].abs() <= RANK_TOL * max_diag {
            return Err(Error::RankDeficient(format!("column {i} is (nearly) a combination of earlier columns")));
        }
    }
    let q = qr.q();
    let qty = q.transpose() * y;
    let bs = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Numerical("triangular inverse failed".into()))?;
    let mut xtx_inv = &r_inv * r_inv.transpose();
    let mut coefficients = bs;
    for i in 0..k {
        coefficients[i] /= scale[i];
        for j in 0..k {
            xtx_inv[(i, j)] /= scale[i] * scale[j];
        }
    }
    let fitted = x * &coefficients;
    let residuals = y - &fitted;
    let ssr = residuals.norm_squared();
    Ok(LsSolution { coefficients, residuals, fitted, ssr, xtx_inv })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OlsFit {
    /// Regressor labels, `"_cons"` first when an intercept is present.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: AnnualSeries,
    pub fitted: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major design matrix, `n x k`.
    pub design: Vec<Vec<f64>>,
    pub r_squared: f64,
    /// `sqrt(SSR / dof)`
    pub rmse: f64,
    pub dof: usize,
    pub n: usize,
    pub intercept: bool,
}

impl OlsFit {
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let k = self.coefficients.len();
        DMatrix::from_fn(self.n, k, |i, j| self.design[i][j])
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.values.iter().map(|e| e * e).sum()
    }
}

/// Regress `y` on the aligned regressors `xs` (plus an intercept if asked).
pub fn ols(y: &AnnualSeries, xs: &[&AnnualSeries], intercept: bool) -> Result<OlsFit> {
    let mut all: Vec<&AnnualSeries> = vec![y];
    all.extend_from_slice(xs);
    let al = align(&all)?;
    let n = al.len();
    let k = xs.len() + usize::from(intercept);
    if k == 0 {
        return Err(Error::InvalidArgument("no regressors".into()));
    }
    if n <= k + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} aligned observations for {k} regressors"
        )));
    }
    let x = DMatrix::from_fn(n, k, |i, j| {
        if intercept {
            if j == 0 {
                1.0
            } else {
                al.columns[j][i]
            }
        } else {
            al.columns[j + 1][i]
        }
    });
    let yv = DVector::from_vec(al.columns[0].clone());
    let mut names = Vec::with_capacity(k);
    if intercept {
        names.push("_cons".to_string());
    }
    names.extend(xs.iter().map(|s| s.name.clone()));
    fit_from_matrix(&y.name, al.start_year, names, &x, &yv, intercept)
}

/// Build an [`OlsFit`] from an explicit design.
pub fn fit_from_matrix(
    y_name: &str,
    start_year: i32,
    names: Vec<String>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    intercept: bool,
) -> Result<OlsFit> {
    let sol = lstsq(x, y)?;
    let n = sol.n();
    let dof = sol.dof();
    let se = sol.std_errors();
    let t_stats: Vec<f64> = sol.coefficients.iter().zip(se.iter()).map(|(b, s)| b / s).collect();
    let p_values = t_stats.iter().map(|t| t_two_sided(*t, dof as f64)).collect();
    let residuals = AnnualSeries {
        name: format!("resid({y_name})"),
        start_year,
        values: sol.residuals.iter().copied().collect(),
        units: Units::Rate,
    };
    Ok(OlsFit {
        names,
        coefficients: sol.coefficients.iter().copied().collect(),
        std_errors: se.iter().copied().collect(),
        t_stats,
        p_values,
        residuals,
        fitted: sol.fitted.iter().copied().collect(),
        y: y.iter().copied().collect(),
        design: (0..n).map(|i| x.row(i).iter().copied().collect()).collect(),
        r_squared: sol.r_squared(y),
        rmse: (sol.ssr / dof as f64).sqrt(),
        dof,
        n,
        intercept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub null_description: String,
    pub df: Df,
}

impl TestVerdict {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

fn chi2_verdict(test: &str, stat: f64, df: usize, null: &str) -> Result<TestVerdict> {
    if !stat.is_finite() {
        return Err(Error::Numerical(format!("{test} statistic is not finite")));
    }
    Ok(TestVerdict {
        test: test.to_string(),
        statistic: stat,
        p_value: chi2_sf(stat, df as f64),
        null_description: null.to_string(),
        df: Df::One(df),
    })
}

pub fn durbin_watson(fit: &OlsFit) -> Result<f64> {
    durbin_watson_values(&fit.residuals.values)
}

pub fn durbin_watson_values(e: &[f64]) -> Result<f64> {
    if e.len() < 2 {
        return Err(Error::InsufficientData("Durbin-Watson needs two residuals".into()));
    }
    let den: f64 = e.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("zero residual variance".into()));
    }
    let num: f64 = e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / den)
}

/// Breusch-Pagan / Cook-Weisberg test, fitted-values variant (1 df).
pub fn breusch_pagan(fit: &OlsFit) -> Result<TestVerdict> {
    if !fit.intercept {
        return Err(Error::InvalidArgument("Breusch-Pagan requires a fit with an intercept".into()));
    }
    let n = fit.n;
    let sigma2 = fit.ssr() / n as f64;
    if sigma2 == 0.0 {
        return Err(Error::Degenerate("zero residual variance".into()));
    }
    let g = DVector::from_iterator(n, fit.residuals.values.iter().map(|e| e * e / sigma2));
    let fmean = fit.fitted.iter().sum::<f64>() / n as f64;
    let fvar = fit.fitted.iter().map(|v| (v - fmean).powi(2)).sum::<f64>();
    if fvar <= 1e-28 * n as f64 {
        return Err(Error::Degenerate("fitted values have zero variance".into()));
    }
    let z = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { fit.fitted[i] });
    let aux = lstsq(&z, &g)?;
    let gm = g.mean();
    let ess: f64 = aux.fitted.iter().map(|v| (v - gm).powi(2)).sum();
    chi2_verdict("breusch_pagan", ess / 2.0, 1, "constant variance")
}

/// Ramsey RESET: F test on powers `2..=max_power` of the fitted values.
pub fn ramsey_reset(fit: &OlsFit, max_power: u32) -> Result<TestVerdict> {
    if max_power < 2 {
        return Err(Error::InvalidArgument("RESET needs max_power >= 2".into()));
    }
    let q = (max_power - 1) as usize;
    let n = fit.n;
    let k = fit.k();
    if n <= k + q {
        return Err(Error::InsufficientData(format!("RESET: {n} obs for {} regressors", k + q)));
    }
    let scale = fit.fitted.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Degenerate("fitted values are all zero".into()));
    }
    let x = fit.design_matrix();
    let xa = DMatrix::from_fn(n, k + q, |i, j| {
        if j < k {
            x[(i, j)]
        } else {
            (fit.fitted[i] / scale).powi((j - k + 2) as i32)
        }
    });
    let y = DVector::from_vec(fit.y.clone());
    let aug = lstsq(&xa, &y)?;
    let ssr_r = fit.ssr();
    let d2 = n - k - q;
    let stat = ((ssr_r - aug.ssr) / q as f64) / (aug.ssr / d2 as f64);
    if !stat.is_finite() {
        return Err(Error::Numerical("RESET statistic not finite".into()));
    }
    Ok(TestVerdict {
        test: "ramsey_reset".into(),
        statistic: stat,
        p_value: f_sf(stat, q as f64, d2 as f64),
        null_description: "no omitted variables".into(),
        df: Df::Pair(q, d2),
    })
}

/// Engle's LM test for ARCH effects of order `lags`.
pub fn arch_lm(fit: &OlsFit, lags: usize) -> Result<TestVerdict> {
    arch_lm_values(&fit.residuals.values, lags)
}

pub fn arch_lm_values(e: &[f64], lags: usize) -> Result<TestVerdict> {
    if lags == 0 {
        return Err(Error::InvalidArgument("ARCH LM needs lags >= 1".into()));
    }
    let n = e.len();
    if n <= 2 * lags + 1 {
        return Err(Error::InsufficientData(format!("ARCH LM({lags}) with {n} residuals")));
    }
    let e2: Vec<f64> = e.iter().map(|v| v * v).collect();
    let m = n - lags;
    let x = DMatrix::from_fn(m, lags + 1, |i, j| if j == 0 { 1.0 } else { e2[i + lags - j] });
    let y = DVector::from_iterator(m, (lags..n).map(|t| e2[t]));
    let aux = lstsq(&x, &y)?;
    let r2 = aux.r_squared(&y);
    chi2_verdict("arch_lm", m as f64 * r2, lags, "no ARCH effect")
}

/// Breusch-Godfrey LM test; pre-sample lagged residuals are set to zero.
pub fn breusch_godfrey(fit: &OlsFit, lags: usize) -> Result<TestVerdict> {
    if lags == 0 {
        return Err(Error::InvalidArgument("Breusch-Godfrey needs lags >= 1".into()));
    }
    let n = fit.n;
    let k = fit.k();
    if n <= lags + k {
        return Err(Error::InsufficientData(format!("Breusch-Godfrey({lags}) with {n} obs and {k} regressors")));
    }
    let e = &fit.residuals.values;
    if e.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("zero residuals".into()));
    }
    let x = fit.design_matrix();
    let xa = DMatrix::from_fn(n, k + lags, |i, j| {
        if j < k {
            x[(i, j)]
        } else {
            let l = j - k + 1;
            if i >= l {
                e[i - l]
            } else {
                0.0
            }
        }
    });
    let ev = DVector::from_vec(e.clone());
    let aux = lstsq(&xa, &ev)?;
    let r2 = aux.r_squared(&ev);
    chi2_verdict("breusch_godfrey", n as f64 * r2, lags, "no serial correlation")
}

/// `JB = N/6 (S^2 + (K-3)^2/4)` against chi2(2).
pub fn jarque_bera(sample: &AnnualSeries) -> Result<TestVerdict> {
    jarque_bera_values(&sample.name, &sample.values)
}

pub fn jarque_bera_values(name: &str, values: &[f64]) -> Result<TestVerdict> {
    if values.len() < 8 {
        return Err(Error::TooShort { name: name.to_string(), needed: 8, got: values.len() });
    }
    let d = describe_values(name, values)?;
    let (s, k) = match (d.skewness, d.kurtosis) {
        (Some(s), Some(k)) => (s, k),
        _ => return Err(Error::Degenerate(format!("`{name}` has zero variance"))),
    };
    chi2_verdict("jarque_bera", jb_statistic(values.len(), s, k), 2, "normality")
}

pub fn jb_statistic(n: usize, skewness: f64, kurtosis: f64) -> f64 {
    n as f64 / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0)
}

/// The full Table-5 style battery on one fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecificationBattery {
    pub breusch_pagan: TestVerdict,
    pub ramsey_reset: TestVerdict,
    pub arch_lm: TestVerdict,
    pub breusch_godfrey: TestVerdict,
    pub durbin_watson: f64,
    pub jarque_bera: TestVerdict,
}

pub fn specification_battery(fit: &OlsFit) -> Result<SpecificationBattery> {
    Ok(SpecificationBattery {
        breusch_pagan: breusch_pagan(fit)?,
        ramsey_reset: ramsey_reset(fit, 4)?,
        arch_lm: arch_lm(fit, 1)?,
        breusch_godfrey: breusch_godfrey(fit, 1)?,
        durbin_watson: durbin_watson(fit)?,
        jarque_bera: jarque_bera(&fit.residuals)?,
    })
}
