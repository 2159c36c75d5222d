//! Integral approach: fit relationship coefficients on cumulative curves and
//! compare dynamic against cumulative goodness of fit.
//!
//! Cumulative curves are inclusive partial sums anchored at the first common
//! year, so the first cumulative value equals the first annual value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engle_granger::PredictorCoeffs;
use crate::error::{Error, Result};
use crate::series::{align, AnnualSeries, Units, Window};

pub fn rmsd(a: &AnnualSeries, b: &AnnualSeries) -> Result<f64> {
    same_span(a, b)?;
    Ok(rmsd_values(&a.values, &b.values))
}

fn rmsd_values(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

fn same_span(a: &AnnualSeries, b: &AnnualSeries) -> Result<()> {
    if a.start_year != b.start_year || a.len() != b.len() {
        return Err(Error::SpanMismatch(format!(
            "`{}` {}-{} vs `{}` {}-{}",
            a.name,
            a.start_year,
            a.end_year(),
            b.name,
            b.start_year,
            b.end_year()
        )));
    }
    Ok(())
}

/// RMSE of the simple regression of `measured` on `predicted`, slope and
/// intercept free.
pub fn sterr(measured: &AnnualSeries, predicted: &AnnualSeries) -> Result<f64> {
    same_span(measured, predicted)?;
    sterr_values(&measured.values, &predicted.values)
}

fn sterr_values(y: &[f64], x: &[f64]) -> Result<f64> {
    let n = y.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} points for a regression line")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let scale = x.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if sxx <= (1e-14 * scale).powi(2) * nf {
        return Err(Error::Degenerate("predictor has zero variance".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - my - slope * (a - mx);
            e * e
        })
        .sum();
    Ok((ssr / (nf - 2.0)).sqrt())
}

fn sterr_if_defined(y: &[f64], x: &[f64]) -> Result<Option<f64>> {
    match sterr_values(y, x) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn cumsum(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Target and lagged inputs on their common span.
#[derive(Debug, Clone)]
struct Inputs {
    start_year: i32,
    y: Vec<f64>,
    ue: Option<Vec<f64>>,
    rate: Vec<f64>,
}

impl Inputs {
    fn new(target: &AnnualSeries, ue: Option<&AnnualSeries>, lf: &AnnualSeries, t0: u32, t1: u32, window: Window) -> Result<Self> {
        let rate = match lf.units {
            Units::Level => lf.change_rate()?,
            Units::Rate => lf.clone(),
        }
        .lag(t1);
        let target = target.window(window.start, window.end)?;
        let uel = ue.map(|u| u.lag(t0));
        let mut cols: Vec<&AnnualSeries> = vec![&target, &rate];
        if let Some(u) = &uel {
            cols.push(u);
        }
        let al = align(&cols)?;
        if al.len() < 3 {
            return Err(Error::InsufficientData(format!("{} common years", al.len())));
        }
        let mut c = al.columns.into_iter();
        let y = c.next().unwrap();
        let rate = c.next().unwrap();
        Ok(Self { start_year: al.start_year, y, ue: c.next(), rate })
    }

    fn predict(&self, a: [f64; 3]) -> Vec<f64> {
        (0..self.y.len())
            .map(|i| a[0] * self.ue.as_ref().map_or(0.0, |u| u[i]) + a[1] * self.rate[i] + a[2])
            .collect()
    }
}

/// Free interval or pinned value for one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Range(f64, f64),
    Fixed(f64),
}

impl Bound {
    fn is_free(&self) -> bool {
        matches!(self, Bound::Range(..))
    }

    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            Bound::Range(lo, hi) if !(lo.is_finite() && hi.is_finite() && lo < hi) => Err(
                Error::InvalidArgument(format!("search range for {name} must be finite with lo < hi, got [{lo}, {hi}]")),
            ),
            Bound::Fixed(v) if !v.is_finite() => Err(Error::InvalidArgument(format!("{name} pinned to {v}"))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub a0: Bound,
    pub a1: Bound,
    pub a2: Bound,
}

impl Default for SearchBox {
    fn default() -> Self {
        Self {
            a0: Bound::Range(-3.0, 0.0),
            a1: Bound::Range(0.0, 30.0),
            a2: Bound::Range(-0.2, 0.2),
        }
    }
}

impl SearchBox {
    pub fn with_a0(mut self, b: Bound) -> Self {
        self.a0 = b;
        self
    }

    pub fn with_a1(mut self, b: Bound) -> Self {
        self.a1 = b;
        self
    }

    fn bounds(&self) -> [Bound; 3] {
        [self.a0, self.a1, self.a2]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CumulativeFitResult {
    pub coefficients: PredictorCoeffs,
    pub first_year: i32,
    pub last_year: i32,
    pub n: usize,
    /// `None` when the predictor is constant, so no regression line exists.
    pub dynamic_sterr: Option<f64>,
    pub dynamic_rmsd: f64,
    pub cumulative_sterr: Option<f64>,
    pub cumulative_rmsd: f64,
    /// Minimized cumulative RMSD.
    pub objective: f64,
}

pub const GRID_POINTS: usize = 21;
pub const GRID_REFINEMENTS: usize = 2;
pub const POLISH_TOL: f64 = 1e-8;

/// Minimize the RMSD between cumulative target and cumulative predictor.
/// Without `ue`, A0 is fixed at zero.
pub fn cumulative_fit(
    target: &AnnualSeries,
    ue: Option<&AnnualSeries>,
    lf: &AnnualSeries,
    t0: u32,
    t1: u32,
    search: SearchBox,
    window: Window,
) -> Result<CumulativeFitResult> {
    let search = if ue.is_none() { search.with_a0(Bound::Fixed(0.0)) } else { search };
    for (b, n) in search.bounds().iter().zip(["A0", "A1", "A2"]) {
        b.validate(n)?;
    }
    let inp = Inputs::new(target, ue, lf, t0, t1, window)?;
    let cy = cumsum(&inp.y);
    let objective = |a: [f64; 3]| rmsd_values(&cy, &cumsum(&inp.predict(a)));

    let bounds = search.bounds();
    let free: Vec<usize> = (0..3).filter(|&i| bounds[i].is_free()).collect();
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for i in 0..3 {
        (lo[i], hi[i]) = match bounds[i] {
            Bound::Range(a, b) => (a, b),
            Bound::Fixed(v) => (v, v),
        };
    }
    let (glo, ghi) = (lo, hi);
    let mut best = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let mut step = [0.0; 3];
    for _ in 0..=GRID_REFINEMENTS {
        for &i in &free {
            step[i] = (hi[i] - lo[i]) / (GRID_POINTS - 1) as f64;
        }
        best = grid_search(&free, lo, step, best, &objective);
        for &i in &free {
            lo[i] = (best[i] - step[i]).max(glo[i]);
            hi[i] = (best[i] + step[i]).min(ghi[i]);
        }
    }
    if !free.is_empty() {
        best = nelder_mead(&free, best, step, glo, ghi, &objective);
    }
    let pred = inp.predict(best);
    let cp = cumsum(&pred);
    let obj = objective(best);
    Ok(CumulativeFitResult {
        coefficients: PredictorCoeffs { a0: best[0], a1: best[1], a2: best[2], t0, t1 },
        first_year: inp.start_year,
        last_year: inp.start_year + inp.y.len() as i32 - 1,
        n: inp.y.len(),
        dynamic_sterr: sterr_if_defined(&inp.y, &pred)?,
        dynamic_rmsd: rmsd_values(&inp.y, &pred),
        cumulative_sterr: sterr_if_defined(&cy, &cp)?,
        cumulative_rmsd: obj,
        objective: obj,
    })
}

fn by_value_then_coeffs(x: &(f64, [f64; 3]), y: &(f64, [f64; 3])) -> std::cmp::Ordering {
    x.0.total_cmp(&y.0)
        .then(x.1[0].total_cmp(&y.1[0]))
        .then(x.1[1].total_cmp(&y.1[1]))
        .then(x.1[2].total_cmp(&y.1[2]))
}

/// Full grid over the free axes; ties go to the lexicographically smallest
/// coefficient tuple so the result does not depend on evaluation order.
fn grid_search<F>(free: &[usize], lo: [f64; 3], step: [f64; 3], base: [f64; 3], f: &F) -> [f64; 3]
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    let total = GRID_POINTS.pow(free.len() as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut a = base;
            for &i in free.iter().rev() {
                let k = idx % GRID_POINTS;
                idx /= GRID_POINTS;
                a[i] = lo[i] + k as f64 * step[i];
            }
            (f(a), a)
        })
        .min_by(by_value_then_coeffs)
        .map(|(_, a)| a)
        .unwrap_or(base)
}

fn clamp(a: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    [a[0].clamp(lo[0], hi[0]), a[1].clamp(lo[1], hi[1]), a[2].clamp(lo[2], hi[2])]
}

/// Nelder-Mead on the free coordinates with points projected into the box.
fn nelder_mead<F>(free: &[usize], start: [f64; 3], step: [f64; 3], lo: [f64; 3], hi: [f64; 3], f: &F) -> [f64; 3]
where
    F: Fn([f64; 3]) -> f64,
{
    let d = free.len();
    let to_full = |x: &[f64]| {
        let mut a = start;
        for (j, &i) in free.iter().enumerate() {
            a[i] = x[j];
        }
        clamp(a, lo, hi)
    };
    let eval = |x: &[f64]| f(to_full(x));
    let x0: Vec<f64> = free.iter().map(|&i| start[i]).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), eval(&x0))];
    for (j, &i) in free.iter().enumerate() {
        let mut x = x0.clone();
        let h = if step[i] > 0.0 { step[i] } else { 1e-3 * (hi[i] - lo[i]).max(1e-3) };
        x[j] += if x[j] + h <= hi[i] { h } else { -h };
        let v = eval(&x);
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)))
    };
    for _ in 0..20_000 {
        order(&mut simplex);
        let fspread = simplex[d].1 - simplex[0].1;
        let xspread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fspread <= POLISH_TOL * POLISH_TOL && xspread <= POLISH_TOL {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64).collect();
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (worst.0[j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = (0..d).map(|j| best[j] + 0.5 * (p.0[j] - best[j])).collect();
                    p.1 = eval(&x);
                    p.0 = x;
                }
            }
        }
    }
    order(&mut simplex);
    to_full(&simplex[0].0)
}

/// Dynamic and cumulative StErr and RMSD of one coefficient set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table8Row {
    pub label: String,
    pub coefficients: Option<PredictorCoeffs>,
    pub dynamic_sterr: Option<f64>,
    pub dynamic_rmsd: Option<f64>,
    pub cumulative_sterr: Option<f64>,
    pub cumulative_rmsd: Option<f64>,
}

impl Table8Row {
    pub fn unavailable(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            coefficients: None,
            dynamic_sterr: None,
            dynamic_rmsd: None,
            cumulative_sterr: None,
            cumulative_rmsd: None,
        }
    }
}

/// Evaluate every coefficient set on the same span; `None` entries become
/// rows marked unavailable.
pub fn table8_compare(
    target: &AnnualSeries,
    ue: Option<&AnnualSeries>,
    lf: &AnnualSeries,
    sets: &[(String, Option<PredictorCoeffs>)],
    window: Window,
) -> Result<Vec<Table8Row>> {
    sets.iter()
        .map(|(label, c)| {
            let Some(c) = c else {
                return Ok(Table8Row::unavailable(label.clone()));
            };
            let inp = Inputs::new(target, if c.a0 != 0.0 { ue } else { None }, lf, c.t0, c.t1, window)?;
            let pred = inp.predict([c.a0, c.a1, c.a2]);
            let (cy, cp) = (cumsum(&inp.y), cumsum(&pred));
            Ok(Table8Row {
                label: label.clone(),
                coefficients: Some(*c),
                dynamic_sterr: sterr_if_defined(&inp.y, &pred)?,
                dynamic_rmsd: Some(rmsd_values(&inp.y, &pred)),
                cumulative_sterr: sterr_if_defined(&cy, &cp)?,
                cumulative_rmsd: Some(rmsd_values(&cy, &cp)),
            })
        })
        .collect()
}

/// Measured and predicted curves, dynamic and cumulative, on the common span.
pub fn curves(
    target: &AnnualSeries,
    ue: Option<&AnnualSeries>,
    lf: &AnnualSeries,
    c: &PredictorCoeffs,
    window: Window,
) -> Result<[AnnualSeries; 4]> {
    let inp = Inputs::new(target, if c.a0 != 0.0 { ue } else { None }, lf, c.t0, c.t1, window)?;
    let pred = inp.predict([c.a0, c.a1, c.a2]);
    let mk = |name: String, v: Vec<f64>, u| AnnualSeries::new(name, inp.start_year, v, u);
    Ok([
        mk(target.name.clone(), inp.y.clone(), Units::Rate)?,
        mk("predicted".into(), pred.clone(), Units::Rate)?,
        mk(format!("cum({})", target.name), cumsum(&inp.y), Units::Level)?,
        mk("cum(predicted)".into(), cumsum(&pred), Units::Level)?,
    ])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub dynamic: AnnualSeries,
    pub cumulative: AnnualSeries,
    /// Mean squared cumulative residual over the second half divided by the
    /// first half. Partial sums of iid errors give about 3.
    pub growth_ratio: Option<f64>,
}

pub fn cumulative_error_decomposition(target: &AnnualSeries, predictor: &AnnualSeries) -> Result<ErrorDecomposition> {
    let dynamic = target.sub(predictor)?.renamed("dynamic residual");
    let cumulative = dynamic.cumsum().renamed("cumulative residual");
    let v = &cumulative.values;
    let h = v.len() / 2;
    let ms = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
    let growth_ratio = if h >= 1 {
        let first = ms(&v[..h]);
        (first > 0.0).then(|| ms(&v[v.len() - h..]) / first)
    } else {
        None
    };
    Ok(ErrorDecomposition { dynamic, cumulative, growth_ratio })
}
