//! Vector autoregressions: estimation, lag-order selection, stability and
//! residual diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::chi2_sf;
use crate::error::{Error, Result};
use crate::regression::{jb_statistic, lstsq, Df, TestVerdict};
use crate::series::{align, describe_values, AnnualSeries, Window};

/// Endogenous and exogenous series aligned on their common span.
#[derive(Debug, Clone)]
pub(crate) struct System {
    pub names: Vec<String>,
    pub exog_names: Vec<String>,
    pub start_year: i32,
    /// `y[j][i]`: endogenous `j` at index `i`.
    pub y: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
}

impl System {
    pub fn build(ys: &[&AnnualSeries], exog: &[&AnnualSeries]) -> Result<Self> {
        if ys.is_empty() {
            return Err(Error::InvalidArgument("no endogenous series".into()));
        }
        let mut all: Vec<&AnnualSeries> = ys.to_vec();
        all.extend_from_slice(exog);
        let al = align(&all)?;
        let k = ys.len();
        let mut cols = al.columns;
        let x = cols.split_off(k);
        Ok(Self {
            names: ys.iter().map(|s| s.name.clone()).collect(),
            exog_names: exog.iter().map(|s| s.name.clone()).collect(),
            start_year: al.start_year,
            y: cols,
            x,
        })
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    pub fn len(&self) -> usize {
        self.y[0].len()
    }

    /// Inclusive index range of estimation rows: at least `presample` rows
    /// must precede the first one, and the window clips both ends.
    pub fn sample_range(&self, presample: usize, window: Window) -> Result<(usize, usize)> {
        let n = self.len() as i64;
        let mut lo = presample as i64;
        let mut hi = n - 1;
        if let Some(s) = window.start {
            lo = lo.max((s - self.start_year) as i64);
        }
        if let Some(e) = window.end {
            hi = hi.min((e - self.start_year) as i64);
        }
        if lo > hi {
            return Err(Error::InsufficientData(format!(
                "no estimation rows: span {}-{}, {presample} presample years, window {:?}",
                self.start_year,
                self.start_year + n as i32 - 1,
                window
            )));
        }
        Ok((lo as usize, hi as usize))
    }
}

#[derive(Debug, Clone)]
pub struct VarModel {
    pub names: Vec<String>,
    pub exog_names: Vec<String>,
    pub lag_order: usize,
    /// `A_1..A_p`, each `K x K`; row = equation.
    pub coefs: Vec<DMatrix<f64>>,
    pub intercept: Option<DVector<f64>>,
    /// `K x m` coefficients on contemporaneous exogenous regressors.
    pub exog_coefs: Option<DMatrix<f64>>,
    /// ML residual covariance (divisor T).
    pub sigma: DMatrix<f64>,
    /// `T x K`
    pub residuals: DMatrix<f64>,
    /// `T x k` regressors shared by all equations.
    pub regressors: DMatrix<f64>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub first_year: i32,
}

impl VarModel {
    pub fn k(&self) -> usize {
        self.names.len()
    }

    /// Regressors per equation.
    pub fn params_per_equation(&self) -> usize {
        self.regressors.ncols()
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.n_obs as i32 - 1
    }

    pub fn residual_column(&self, j: usize) -> Vec<f64> {
        self.residuals.column(j).iter().copied().collect()
    }
}

pub fn gaussian_loglik(t: usize, k: usize, sigma: &DMatrix<f64>) -> Result<f64> {
    let det = sigma.determinant();
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::Degenerate("residual covariance is singular".into()));
    }
    let tf = t as f64;
    Ok(-0.5 * tf * (k as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln()) + det.ln()))
}

fn estimate_rows(sys: &System, p: usize, intercept: bool, lo: usize, hi: usize) -> Result<VarModel> {
    let k = sys.k();
    let m = sys.x.len();
    let t = hi - lo + 1;
    let nreg = usize::from(intercept) + k * p + m;
    if nreg == 0 {
        // VAR(0) without intercept: residuals are the data.
        let resid = DMatrix::from_fn(t, k, |i, j| sys.y[j][lo + i]);
        let sigma = resid.transpose() * &resid / t as f64;
        return Ok(VarModel {
            names: sys.names.clone(),
            exog_names: sys.exog_names.clone(),
            lag_order: 0,
            coefs: Vec::new(),
            intercept: None,
            exog_coefs: None,
            log_likelihood: gaussian_loglik(t, k, &sigma)?,
            sigma,
            residuals: resid,
            regressors: DMatrix::zeros(t, 0),
            n_obs: t,
            first_year: sys.start_year + lo as i32,
        });
    }
    if t <= nreg {
        return Err(Error::InsufficientData(format!("{t} observations for {nreg} regressors per equation")));
    }
    let x = DMatrix::from_fn(t, nreg, |i, c| {
        let row = lo + i;
        let mut c = c;
        if intercept {
            if c == 0 {
                return 1.0;
            }
            c -= 1;
        }
        if c < k * p {
            let lag = c / k + 1;
            let var = c % k;
            return sys.y[var][row - lag];
        }
        sys.x[c - k * p][row]
    });
    let mut coef = DMatrix::zeros(k, nreg);
    let mut resid = DMatrix::zeros(t, k);
    for j in 0..k {
        let yj = DVector::from_iterator(t, (lo..=hi).map(|r| sys.y[j][r]));
        let sol = lstsq(&x, &yj)?;
        coef.row_mut(j).copy_from(&sol.coefficients.transpose());
        resid.column_mut(j).copy_from(&sol.residuals);
    }
    let sigma = resid.transpose() * &resid / t as f64;
    let off = usize::from(intercept);
    let coefs = (0..p)
        .map(|l| coef.view((0, off + l * k), (k, k)).into_owned())
        .collect();
    let intercept_v = intercept.then(|| coef.column(0).into_owned());
    let exog_coefs = (m > 0).then(|| coef.view((0, off + k * p), (k, m)).into_owned());
    Ok(VarModel {
        names: sys.names.clone(),
        exog_names: sys.exog_names.clone(),
        lag_order: p,
        coefs,
        intercept: intercept_v,
        exog_coefs,
        log_likelihood: gaussian_loglik(t, k, &sigma)?,
        sigma,
        residuals: resid,
        regressors: x,
        n_obs: t,
        first_year: sys.start_year + lo as i32,
    })
}

/// Equation-by-equation OLS VAR(p). Exogenous series enter contemporaneously.
pub fn var_estimate(
    ys: &[&AnnualSeries],
    p: usize,
    exog: &[&AnnualSeries],
    intercept: bool,
    window: Window,
) -> Result<VarModel> {
    let sys = System::build(ys, exog)?;
    let (lo, hi) = sys.sample_range(p, window)?;
    let needed = sys.k() * p + exog.len() + 1;
    if hi - lo < needed {
        return Err(Error::InsufficientData(format!(
            "{} observations, need more than {needed}",
            hi - lo + 1
        )));
    }
    estimate_rows(&sys, p, intercept, lo, hi)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagOrderRow {
    pub lag: usize,
    pub log_likelihood: f64,
    pub lr: Option<f64>,
    pub lr_df: usize,
    pub lr_p_value: Option<f64>,
    pub fpe: f64,
    pub aic: f64,
    pub hqic: f64,
    pub sbic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagOrderSelection {
    pub rows: Vec<LagOrderRow>,
    pub n_obs: usize,
    pub lr: usize,
    pub fpe: usize,
    pub aic: usize,
    pub hqic: usize,
    pub sbic: usize,
}

/// Lags `0..=p_max` on the common sample that `p_max` allows.
/// The LR pick is top-down sequential testing at 5%.
pub fn lag_order_select(
    ys: &[&AnnualSeries],
    p_max: usize,
    exog: &[&AnnualSeries],
    window: Window,
) -> Result<LagOrderSelection> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("p_max must be >= 1".into()));
    }
    let sys = System::build(ys, exog)?;
    let k = sys.k();
    let (lo, hi) = sys.sample_range(p_max, window)?;
    let t = hi - lo + 1;
    let tf = t as f64;
    let mut rows = Vec::with_capacity(p_max + 1);
    let mut prev_ll: Option<f64> = None;
    for p in 0..=p_max {
        let m = 1 + k * p + exog.len();
        if t <= m {
            return Err(Error::InsufficientData(format!("{t} observations for lag {p}")));
        }
        let model = estimate_rows(&sys, p, true, lo, hi)?;
        let ll = model.log_likelihood;
        let npar = (k * m) as f64;
        let det = model.sigma.determinant();
        let fpe = det * ((tf + m as f64) / (tf - m as f64)).powi(k as i32);
        let aic = -2.0 * ll / tf + 2.0 * npar / tf;
        let hqic = -2.0 * ll / tf + 2.0 * tf.ln().ln() * npar / tf;
        let sbic = -2.0 * ll / tf + tf.ln() * npar / tf;
        let (lr, lr_p) = match prev_ll {
            Some(pl) => {
                let lr = 2.0 * (ll - pl);
                (Some(lr), Some(chi2_sf(lr, (k * k) as f64)))
            }
            None => (None, None),
        };
        rows.push(LagOrderRow {
            lag: p,
            log_likelihood: ll,
            lr,
            lr_df: k * k,
            lr_p_value: lr_p,
            fpe,
            aic,
            hqic,
            sbic,
        });
        prev_ll = Some(ll);
    }
    let argmin = |f: fn(&LagOrderRow) -> f64| {
        rows.iter()
            .fold((0, f64::INFINITY), |(bi, bv), r| if f(r) < bv { (r.lag, f(r)) } else { (bi, bv) })
            .0
    };
    let lr_pick = rows
        .iter()
        .rev()
        .find(|r| r.lr_p_value.is_some_and(|p| p < 0.05))
        .map_or(0, |r| r.lag);
    Ok(LagOrderSelection {
        n_obs: t,
        lr: lr_pick,
        fpe: argmin(|r| r.fpe),
        aic: argmin(|r| r.aic),
        hqic: argmin(|r| r.hqic),
        sbic: argmin(|r| r.sbic),
        rows,
    })
}

/// Companion-form eigenvalue moduli, descending.
pub fn var_stability(m: &VarModel) -> Vec<f64> {
    let k = m.k();
    let p = m.lag_order;
    if p == 0 {
        return Vec::new();
    }
    let kp = k * p;
    let mut c = DMatrix::zeros(kp, kp);
    for (l, a) in m.coefs.iter().enumerate() {
        c.view_mut((0, l * k), (k, k)).copy_from(a);
    }
    for i in k..kp {
        c[(i, i - k)] = 1.0;
    }
    let mut moduli: Vec<f64> = c.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli
}

pub fn is_stable(m: &VarModel) -> bool {
    var_stability(m).first().is_none_or(|&r| r < 1.0)
}

/// Multivariate LM test for residual autocorrelation at each lag
/// `1..=max_lag`; auxiliary regression on the VAR regressors plus the
/// residuals lagged `j` (zero-filled), LR form with small-sample offset.
pub fn var_lm_autocorr(m: &VarModel, max_lag: usize) -> Result<Vec<TestVerdict>> {
    let t = m.n_obs;
    let k = m.k();
    if max_lag == 0 {
        return Err(Error::InvalidArgument("max_lag must be >= 1".into()));
    }
    if t <= k * max_lag {
        return Err(Error::InsufficientData(format!("{t} residuals for LM lag {max_lag}")));
    }
    let x = &m.regressors;
    let nx = x.ncols();
    let det_full = m.sigma.determinant();
    (1..=max_lag)
        .map(|j| {
            let xa = DMatrix::from_fn(t, nx + k, |i, c| {
                if c < nx {
                    x[(i, c)]
                } else if i >= j {
                    m.residuals[(i - j, c - nx)]
                } else {
                    0.0
                }
            });
            let mut aux = DMatrix::zeros(t, k);
            for e in 0..k {
                let ue = m.residuals.column(e).into_owned();
                let sol = lstsq(&xa, &ue)?;
                aux.column_mut(e).copy_from(&sol.residuals);
            }
            let sigma_aux = aux.transpose() * &aux / t as f64;
            let det_aux = sigma_aux.determinant();
            if det_aux <= 0.0 {
                return Err(Error::Degenerate("auxiliary residual covariance singular".into()));
            }
            let d = (nx + k) as f64;
            let stat = (t as f64 - d - 0.5) * (det_full / det_aux).ln();
            Ok(TestVerdict {
                test: format!("var_lm_lag{j}"),
                statistic: stat,
                p_value: chi2_sf(stat, (k * k) as f64),
                null_description: format!("no autocorrelation at lag {j}"),
                df: Df::One(k * k),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarNormality {
    /// Raw (unrotated) residual skewness and kurtosis per equation.
    pub raw_moments: Vec<(String, f64, f64)>,
    /// Per-component JB on Cholesky-orthogonalized residuals.
    pub equations: Vec<TestVerdict>,
    pub joint: TestVerdict,
}

pub fn var_jarque_bera(m: &VarModel) -> Result<VarNormality> {
    let t = m.n_obs;
    let k = m.k();
    if t < 8 {
        return Err(Error::InsufficientData(format!("{t} residuals for Jarque-Bera")));
    }
    let chol = m
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("residual covariance not positive definite".into()))?;
    let l = chol.l();
    let w = l
        .solve_lower_triangular(&m.residuals.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut raw = Vec::with_capacity(k);
    let mut eqs = Vec::with_capacity(k);
    let mut total = 0.0;
    for j in 0..k {
        let rj = m.residual_column(j);
        let d = describe_values(&m.names[j], &rj)?;
        raw.push((
            m.names[j].clone(),
            d.skewness.unwrap_or(f64::NAN),
            d.kurtosis.unwrap_or(f64::NAN),
        ));
        let wj: Vec<f64> = w.row(j).iter().copied().collect();
        let dw = describe_values(&m.names[j], &wj)?;
        let (s, ku) = match (dw.skewness, dw.kurtosis) {
            (Some(s), Some(ku)) => (s, ku),
            _ => return Err(Error::Degenerate(format!("zero residual variance in `{}`", m.names[j]))),
        };
        let jb = jb_statistic(t, s, ku);
        total += jb;
        eqs.push(TestVerdict {
            test: format!("jarque_bera[{}]", m.names[j]),
            statistic: jb,
            p_value: chi2_sf(jb, 2.0),
            null_description: "normality".into(),
            df: Df::One(2),
        });
    }
    Ok(VarNormality {
        raw_moments: raw,
        equations: eqs,
        joint: TestVerdict {
            test: "jarque_bera[joint]".into(),
            statistic: total,
            p_value: chi2_sf(total, 2.0 * k as f64),
            null_description: "joint normality".into(),
            df: Df::One(2 * k),
        },
    })
}
