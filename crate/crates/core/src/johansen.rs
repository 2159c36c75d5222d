//! Johansen reduced-rank regression: trace test and VECM estimation.
//!
//! `lag` is the lag order of the levels VAR, so the error-correction form
//! carries `lag - 1` lagged differences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::critical::{trace_critical_5pct, JohansenDet};
use crate::error::{Error, Result};
use crate::regression::lstsq;
use crate::series::{AnnualSeries, Window};
use crate::var::System;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JohansenResult {
    pub det_spec: JohansenDet,
    pub lag_order: usize,
    pub n_obs: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Descending, one per variable.
    pub eigenvalues: Vec<f64>,
    /// Trace statistic for hypothesized rank `r = 0..K-1`.
    pub trace_stats: Vec<f64>,
    /// Log-likelihood for rank `r = 0..=K`.
    pub log_likelihoods: Vec<f64>,
    pub critical_5pct: Vec<f64>,
    pub selected_rank: usize,
}

/// Moment matrices of the concentrated problem.
struct Moments {
    k: usize,
    t: usize,
    first_year: i32,
    r1: DMatrix<f64>,
    s00: DMatrix<f64>,
    s01: DMatrix<f64>,
    s11: DMatrix<f64>,
    /// Raw regressors, kept for the second-stage VECM regression.
    z0: DMatrix<f64>,
    z1: DMatrix<f64>,
    z2: DMatrix<f64>,
}

fn residualize(z2: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z2.ncols() == 0 {
        return Ok(z.clone());
    }
    let mut out = DMatrix::zeros(z.nrows(), z.ncols());
    for j in 0..z.ncols() {
        let col = z.column(j).into_owned();
        out.column_mut(j).copy_from(&lstsq(z2, &col)?.residuals);
    }
    Ok(out)
}

fn moments(ys: &[&AnnualSeries], p: usize, det: JohansenDet, window: Window) -> Result<Moments> {
    if ys.len() < 2 {
        return Err(Error::InvalidArgument("Johansen analysis needs at least two series".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("levels lag order must be >= 1".into()));
    }
    let sys = System::build(ys, &[])?;
    let k = sys.k();
    let (lo, hi) = sys.sample_range(p, window)?;
    let t = hi - lo + 1;
    let restricted = det == JohansenDet::RConstant;
    let k1 = k + usize::from(restricted);
    let k2 = k * (p - 1) + usize::from(det == JohansenDet::Constant);
    if t <= k1 + k2 + 1 {
        return Err(Error::InsufficientData(format!(
            "{t} observations for {} regressors in the error-correction form",
            k1 + k2
        )));
    }
    let y = |j: usize, row: usize| sys.y[j][row];
    let z0 = DMatrix::from_fn(t, k, |i, j| y(j, lo + i) - y(j, lo + i - 1));
    let z1 = DMatrix::from_fn(t, k1, |i, j| if j < k { y(j, lo + i - 1) } else { 1.0 });
    let z2 = DMatrix::from_fn(t, k2, |i, c| {
        if c < k * (p - 1) {
            let lag = c / k + 1;
            let j = c % k;
            let row = lo + i - lag;
            y(j, row) - y(j, row - 1)
        } else {
            1.0
        }
    });
    let r0 = residualize(&z2, &z0)?;
    let r1 = residualize(&z2, &z1)?;
    let tf = t as f64;
    let s00 = r0.transpose() * &r0 / tf;
    let s01 = r0.transpose() * &r1 / tf;
    let s11 = r1.transpose() * &r1 / tf;
    Ok(Moments {
        k,
        t,
        first_year: sys.start_year + lo as i32,
        r1,
        s00,
        s01,
        s11,
        z0,
        z1,
        z2,
    })
}

/// Eigenvalues (descending) and matching `S11`-orthonormal eigenvectors of
/// `S10 S00^{-1} S01 v = λ S11 v`.
fn eigen(m: &Moments) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = m
        .s11
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("lagged-level moment matrix is singular".into()))?;
    let l = chol.l();
    let s00_inv = m
        .s00
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("difference moment matrix is singular".into()))?
        .inverse();
    let s10 = m.s01.transpose();
    let inner = &s10 * &s00_inv * &m.s01;
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .ok_or_else(|| Error::Numerical("triangular inverse failed".into()))?;
    let c = &l_inv * inner * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].clamp(0.0, 1.0 - 1e-15)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let n = eig.eigenvectors.nrows();
    let v = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let vecs = l_inv.transpose() * v;
    Ok((vals, vecs))
}

fn log_likelihood(m: &Moments, eig: &[f64], r: usize) -> f64 {
    let tf = m.t as f64;
    let ld = m.s00.determinant().ln();
    let sum: f64 = eig[..r].iter().map(|l| (1.0 - l).ln()).sum();
    -0.5 * tf * (m.k as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln()) + ld + sum)
}

/// Trace statistics for every rank and sequential selection at 5%.
pub fn johansen_trace(ys: &[&AnnualSeries], p: usize, det: JohansenDet, window: Window) -> Result<JohansenResult> {
    let m = moments(ys, p, det, window)?;
    let (all, _) = eigen(&m)?;
    let k = m.k;
    let eigenvalues: Vec<f64> = all[..k].to_vec();
    let tf = m.t as f64;
    let trace_stats: Vec<f64> = (0..k)
        .map(|r| -tf * eigenvalues[r..].iter().map(|l| (1.0 - l).ln()).sum::<f64>())
        .collect();
    let critical_5pct = (0..k).map(|r| trace_critical_5pct(det, k - r)).collect::<Result<Vec<_>>>()?;
    let selected_rank = (0..k).find(|&r| trace_stats[r] < critical_5pct[r]).unwrap_or(k);
    Ok(JohansenResult {
        det_spec: det,
        lag_order: p,
        n_obs: m.t,
        first_year: m.first_year,
        last_year: m.first_year + m.t as i32 - 1,
        log_likelihoods: (0..=k).map(|r| log_likelihood(&m, &eigenvalues, r)).collect(),
        eigenvalues,
        trace_stats,
        critical_5pct,
        selected_rank,
    })
}

/// One cointegrating relation solved for its normalized variable:
/// `target = Σ slope_i · other_i + intercept`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpliedRelation {
    pub target: String,
    /// `(variable, slope, standard error)`
    pub slopes: Vec<(String, f64, Option<f64>)>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct VecmModel {
    pub names: Vec<String>,
    pub det_spec: JohansenDet,
    pub lag_order: usize,
    pub rank: usize,
    pub n_obs: usize,
    pub first_year: i32,
    /// `K x r` (plus a constant row under `rconstant`), identity on the
    /// first `r` rows.
    pub beta: DMatrix<f64>,
    /// Same shape as `beta`; zero on the normalized block.
    pub beta_std_errors: DMatrix<f64>,
    /// Constant of each cointegrating relation, when one is identified.
    pub beta_constant: Option<DVector<f64>>,
    pub alpha: DMatrix<f64>,
    /// `Γ_1..Γ_{p-1}`, each `K x K`.
    pub gamma: Vec<DMatrix<f64>>,
    /// Unrestricted constant in each difference equation (`constant` only).
    pub intercept: Option<DVector<f64>>,
    /// ML error covariance.
    pub omega: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
    pub rmse: Vec<f64>,
    pub log_likelihood: f64,
}

impl VecmModel {
    pub fn implied_relations(&self) -> Vec<ImpliedRelation> {
        let k = self.names.len();
        (0..self.rank)
            .map(|j| ImpliedRelation {
                target: self.names[j].clone(),
                slopes: (self.rank..k)
                    .map(|i| {
                        (
                            self.names[i].clone(),
                            -self.beta[(i, j)],
                            Some(self.beta_std_errors[(i, j)]),
                        )
                    })
                    .collect(),
                intercept: match self.det_spec {
                    JohansenDet::RConstant => Some(-self.beta[(k, j)]),
                    _ => self.beta_constant.as_ref().map(|c| -c[j]),
                },
            })
            .collect()
    }
}

pub fn vecm_estimate(
    ys: &[&AnnualSeries],
    p: usize,
    rank: usize,
    det: JohansenDet,
    window: Window,
) -> Result<VecmModel> {
    let k = ys.len();
    if rank == 0 || rank >= k {
        return Err(Error::InvalidArgument(format!("rank must be in 1..={}, got {rank}", k.saturating_sub(1))));
    }
    let m = moments(ys, p, det, window)?;
    let (eig, vecs) = eigen(&m)?;
    let k1 = m.z1.ncols();
    let raw = vecs.columns(0, rank).into_owned();
    let head = raw.view((0, 0), (rank, rank)).into_owned();
    let head_inv = head
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("leading block of the cointegrating vectors is singular".into()))?;
    let beta = &raw * head_inv;
    let s10 = m.s01.transpose();
    let bsb = beta.transpose() * &m.s11 * &beta;
    let bsb_inv = bsb
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("β'S11β is singular".into()))?;
    let alpha = &m.s01 * &beta * bsb_inv;
    let omega = &m.s00 - &alpha * beta.transpose() * &s10;

    // Standard errors of the free rows given alpha.
    let omega_inv = omega
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("error covariance is singular".into()))?;
    let a = (alpha.transpose() * &omega_inv * &alpha)
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("α'Ω⁻¹α is singular".into()))?;
    let free = k1 - rank;
    let r1_free = m.r1.columns(rank, free).into_owned();
    let b = (r1_free.transpose() * &r1_free)
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("free lagged-level block is singular".into()))?;
    let mut beta_se = DMatrix::zeros(k1, rank);
    for j in 0..rank {
        for i in 0..free {
            beta_se[(rank + i, j)] = (a[(j, j)] * b[(i, i)]).sqrt();
        }
    }

    // Short-run dynamics: OLS of ΔY on [β'Y_{t-1}, lagged differences, constant].
    let ect = &m.z1 * &beta;
    let nreg = rank + m.z2.ncols();
    let x = DMatrix::from_fn(m.t, nreg, |i, c| if c < rank { ect[(i, c)] } else { m.z2[(i, c - rank)] });
    let mut coef = DMatrix::zeros(k, nreg);
    let mut resid = DMatrix::zeros(m.t, k);
    let mut rmse = Vec::with_capacity(k);
    for e in 0..k {
        let sol = lstsq(&x, &m.z0.column(e).into_owned())?;
        coef.row_mut(e).copy_from(&sol.coefficients.transpose());
        resid.column_mut(e).copy_from(&sol.residuals);
        rmse.push((sol.ssr / (m.t - nreg) as f64).sqrt());
    }
    let gamma = (0..p - 1)
        .map(|l| coef.view((0, rank + l * k), (k, k)).into_owned())
        .collect();
    let intercept = (det == JohansenDet::Constant).then(|| coef.column(nreg - 1).into_owned());
    let beta_constant = match (&intercept, det) {
        (Some(mu), JohansenDet::Constant) => {
            let ata = (alpha.transpose() * &alpha)
                .try_inverse()
                .ok_or_else(|| Error::Degenerate("α'α is singular".into()))?;
            Some(ata * alpha.transpose() * mu)
        }
        _ => None,
    };
    Ok(VecmModel {
        names: ys.iter().map(|s| s.name.clone()).collect(),
        det_spec: det,
        lag_order: p,
        rank,
        n_obs: m.t,
        first_year: m.first_year,
        beta,
        beta_std_errors: beta_se,
        beta_constant,
        alpha,
        gamma,
        intercept,
        log_likelihood: log_likelihood(&m, &eig, rank),
        omega,
        residuals: resid,
        rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Units;
    use crate::var::var_estimate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn pair(seed: u64, n: usize) -> (AnnualSeries, AnnualSeries) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut acc = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = StandardNormal.sample(&mut rng);
            acc += e;
            x.push(acc);
            y.push(2.0 * acc + 0.5 * u + 1.0);
        }
        (
            AnnualSeries::new("y", 1800, y, Units::Level).unwrap(),
            AnnualSeries::new("x", 1800, x, Units::Level).unwrap(),
        )
    }

    #[test]
    fn full_rank_loglik_matches_var() {
        let (y, x) = pair(3, 80);
        for (det, intercept) in [(JohansenDet::Constant, true), (JohansenDet::None, false), (JohansenDet::RConstant, true)] {
            for p in 1..=3 {
                let j = johansen_trace(&[&y, &x], p, det, Window::all()).unwrap();
                let v = var_estimate(&[&y, &x], p, &[], intercept, Window::all()).unwrap();
                let ll = *j.log_likelihoods.last().unwrap();
                assert!(((ll - v.log_likelihood) / ll).abs() < 1e-6, "{det:?} p={p}: {ll} vs {}", v.log_likelihood);
            }
        }
    }

    #[test]
    fn trace_monotone_and_eigenvalues_in_range() {
        let (y, x) = pair(5, 60);
        let j = johansen_trace(&[&y, &x], 2, JohansenDet::Constant, Window::all()).unwrap();
        assert!(j.eigenvalues.iter().all(|l| (0.0..1.0).contains(l)));
        assert!(j.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(j.trace_stats.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(j.selected_rank, 1);
    }

    #[test]
    fn vecm_recovers_triangular_vector() {
        let (y, x) = pair(11, 200);
        let m = vecm_estimate(&[&y, &x], 2, 1, JohansenDet::Constant, Window::all()).unwrap();
        assert_eq!(m.beta[(0, 0)], 1.0);
        let rel = &m.implied_relations()[0];
        let (_, slope, se) = &rel.slopes[0];
        assert!((slope - 2.0).abs() < 3.0 * se.unwrap(), "slope {slope} se {se:?}");
        assert!((rel.intercept.unwrap() - 1.0).abs() < 0.5);
        let r = vecm_estimate(&[&y, &x], 2, 1, JohansenDet::RConstant, Window::all()).unwrap();
        assert!((r.implied_relations()[0].intercept.unwrap() - 1.0).abs() < 0.5);
    }

    #[test]
    fn rank_bounds() {
        let (y, x) = pair(1, 50);
        assert!(vecm_estimate(&[&y, &x], 2, 2, JohansenDet::Constant, Window::all()).is_err());
        assert!(vecm_estimate(&[&y, &x], 2, 0, JohansenDet::Constant, Window::all()).is_err());
        assert!(johansen_trace(&[&y], 2, JohansenDet::Constant, Window::all()).is_err());
    }
}
