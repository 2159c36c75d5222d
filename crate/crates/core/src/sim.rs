//! Seeded synthetic processes, a normal-equations OLS oracle and size/power
//! calibration.
//!
//! Generator: ChaCha8 (`rand_chacha`), seeded with `seed_from_u64(seed)`.
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat).
//! Replicate `i` of a calibration run uses the master seed with
//! `set_stream(i)`, so every replicate has its own independent stream and the
//! aggregate does not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{critical_value, Deterministic, JohansenDet, Level, UnitRootTest};
use crate::error::{Error, Result};
use crate::johansen::johansen_trace;
use crate::regression::{arch_lm_values, breusch_godfrey, jarque_bera_values, ols};
use crate::series::{AnnualSeries, Units, Window};
use crate::unit_root::{adf_statistic, gls_detrend};

/// First calendar year assigned to simulated series.
pub const SIM_START_YEAR: i32 = 1000;

/// Draws discarded before a VAR(p) path is recorded.
pub const VAR_BURN_IN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum Process {
    WhiteNoise { sd: f64 },
    RandomWalk { sd: f64 },
    /// Stationary start: `y_0 = sd·e_0 / sqrt(1 - φ²)`.
    Ar1 { phi: f64, sd: f64 },
    Arch1 { omega: f64, alpha: f64 },
    TrendPlusNoise { slope: f64, sd: f64 },
    /// `x` a unit-sd random walk, `y = beta·x + noise_sd·u`. Output `[y, x]`.
    TriangularCointegrated { beta: f64, noise_sd: f64 },
    IndependentRandomWalks { k: usize, sd: f64 },
    /// `y_t = Σ A_i y_{t-i} + chol(cov)·e_t` from a zero start.
    VarP { coefs: Vec<Vec<Vec<f64>>>, cov: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(flatten)]
    pub process: Process,
    pub length: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(process: Process, length: usize, seed: u64) -> Self {
        Self { process, length, seed }
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_sd(sd: f64, what: &str) -> Result<()> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} must be positive, got {sd}")));
    }
    Ok(())
}

pub fn simulate(spec: &SimSpec) -> Result<Vec<AnnualSeries>> {
    simulate_with(&spec.process, spec.length, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

pub fn simulate_with(process: &Process, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<AnnualSeries>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("length must be >= 2, got {n}")));
    }
    let one = |name: &str, v: Vec<f64>| -> Result<Vec<AnnualSeries>> {
        Ok(vec![AnnualSeries::new(name, SIM_START_YEAR, v, Units::Level)?])
    };
    match *process {
        Process::WhiteNoise { sd } => {
            check_sd(sd, "sd")?;
            one("wn", (0..n).map(|_| sd * normal(rng)).collect())
        }
        Process::RandomWalk { sd } => {
            check_sd(sd, "sd")?;
            let mut acc = 0.0;
            one("rw", (0..n).map(|_| {
                acc += sd * normal(rng);
                acc
            }).collect())
        }
        Process::Ar1 { phi, sd } => {
            check_sd(sd, "sd")?;
            // Negated so that NaN is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(phi.abs() < 1.0) {
                return Err(Error::InvalidArgument(format!("stationary AR(1) needs |phi| < 1, got {phi}")));
            }
            let mut v = Vec::with_capacity(n);
            v.push(sd * normal(rng) / (1.0 - phi * phi).sqrt());
            for t in 1..n {
                let e = sd * normal(rng);
                v.push(phi * v[t - 1] + e);
            }
            one("ar1", v)
        }
        Process::Arch1 { omega, alpha } => {
            check_sd(omega, "omega")?;
            if !(0.0..1.0).contains(&alpha) {
                return Err(Error::InvalidArgument(format!("ARCH(1) needs 0 <= alpha < 1, got {alpha}")));
            }
            let mut v = Vec::with_capacity(n);
            v.push(normal(rng) * (omega / (1.0 - alpha)).sqrt());
            for t in 1..n {
                let h = omega + alpha * v[t - 1] * v[t - 1];
                v.push(normal(rng) * h.sqrt());
            }
            one("arch1", v)
        }
        Process::TrendPlusNoise { slope, sd } => {
            check_sd(sd, "sd")?;
            one("trend", (0..n).map(|t| slope * t as f64 + sd * normal(rng)).collect())
        }
        Process::TriangularCointegrated { beta, noise_sd } => {
            check_sd(noise_sd, "noise_sd")?;
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            let mut acc = 0.0;
            for _ in 0..n {
                acc += normal(rng);
                let u = normal(rng);
                x.push(acc);
                y.push(beta * acc + noise_sd * u);
            }
            Ok(vec![
                AnnualSeries::new("y", SIM_START_YEAR, y, Units::Level)?,
                AnnualSeries::new("x", SIM_START_YEAR, x, Units::Level)?,
            ])
        }
        Process::IndependentRandomWalks { k, sd } => {
            check_sd(sd, "sd")?;
            if k == 0 {
                return Err(Error::InvalidArgument("k must be >= 1".into()));
            }
            let mut cols = vec![Vec::with_capacity(n); k];
            let mut acc = vec![0.0; k];
            for _ in 0..n {
                for j in 0..k {
                    acc[j] += sd * normal(rng);
                    cols[j].push(acc[j]);
                }
            }
            cols.into_iter()
                .enumerate()
                .map(|(j, v)| AnnualSeries::new(format!("rw{}", j + 1), SIM_START_YEAR, v, Units::Level))
                .collect()
        }
        Process::VarP { ref coefs, ref cov } => simulate_var(coefs, cov, n, rng),
    }
}

fn simulate_var(coefs: &[Vec<Vec<f64>>], cov: &[Vec<f64>], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<AnnualSeries>> {
    let k = cov.len();
    if k == 0 || cov.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument("noise covariance must be square and nonempty".into()));
    }
    if coefs.iter().any(|a| a.len() != k || a.iter().any(|r| r.len() != k)) {
        return Err(Error::InvalidArgument("coefficient matrices must be K x K".into()));
    }
    let l = DMatrix::from_fn(k, k, |i, j| cov[i][j])
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("noise covariance is not positive definite".into()))?
        .l();
    let total = n + VAR_BURN_IN;
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(total);
    for t in 0..total {
        let e: Vec<f64> = (0..k).map(|_| normal(rng)).collect();
        let mut row: Vec<f64> = (0..k).map(|i| (0..=i).map(|j| l[(i, j)] * e[j]).sum()).collect();
        for (lag, a) in coefs.iter().enumerate() {
            if t > lag {
                let prev = &y[t - lag - 1];
                for i in 0..k {
                    row[i] += (0..k).map(|j| a[i][j] * prev[j]).sum::<f64>();
                }
            }
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("simulated VAR path diverged".into()));
        }
        y.push(row);
    }
    (0..k)
        .map(|j| {
            AnnualSeries::new(
                format!("y{}", j + 1),
                SIM_START_YEAR,
                y[VAR_BURN_IN..].iter().map(|r| r[j]).collect(),
                Units::Level,
            )
        })
        .collect()
}

/// Solves `X'X b = X'y` by Gaussian elimination with partial pivoting,
/// independently of the QR path. `x` is row-major.
pub fn normal_equations_oracle(y: &[f64], x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = y.len();
    if x.len() != n || n == 0 {
        return Err(Error::InvalidArgument("design and response lengths differ".into()));
    }
    let k = x[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * yi;
        }
    }
    let scale = (0..k).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[piv][col].abs() <= 1e-13 * scale {
            return Err(Error::RankDeficient("normal equations are singular".into()));
        }
        a.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut b = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i][j] * b[j]).sum();
        b[i] = (a[i][k] - s) / a[i][i];
    }
    Ok(b)
}

/// Tests that the calibration suite can run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum CalibTest {
    Adf { det: Deterministic, lags: usize },
    DfGls { det: Deterministic, lags: usize },
    /// "Rejection" means the trace test selects rank >= 1.
    Johansen { det: JohansenDet, lag: usize },
    /// ADF (constant) on first-stage residuals of the first series on the rest.
    EngleGranger { lags: usize },
    /// BG on the residuals of the first series regressed on a constant.
    BreuschGodfrey { lags: usize },
    JarqueBera,
    ArchLm { lags: usize },
}

impl std::str::FromStr for CalibTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "adf" => CalibTest::Adf { det: Deterministic::Constant, lags: 0 },
            "adf-trend" => CalibTest::Adf { det: Deterministic::Trend, lags: 0 },
            "dfgls" => CalibTest::DfGls { det: Deterministic::Constant, lags: 1 },
            "dfgls-trend" => CalibTest::DfGls { det: Deterministic::Trend, lags: 1 },
            // Simulated walks have no drift, so the constant belongs in the
            // cointegrating space; an unrestricted one over-rejects.
            "johansen" => CalibTest::Johansen { det: JohansenDet::RConstant, lag: 2 },
            "engle-granger" => CalibTest::EngleGranger { lags: 0 },
            "breusch-godfrey" => CalibTest::BreuschGodfrey { lags: 1 },
            "jarque-bera" => CalibTest::JarqueBera,
            "arch-lm" => CalibTest::ArchLm { lags: 1 },
            other => return Err(Error::InvalidArgument(format!("unknown test `{other}`"))),
        })
    }
}

fn level_of(alpha: f64) -> Result<Level> {
    Level::ALL
        .into_iter()
        .find(|l| (l.alpha() - alpha).abs() < 1e-12)
        .ok_or_else(|| Error::Unsupported(format!("unit-root critical values exist at 1%, 5%, 10%, not {alpha}")))
}

/// Whether one replicate rejects its null at `alpha`.
pub fn rejects(test: &CalibTest, series: &[AnnualSeries], alpha: f64) -> Result<bool> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidArgument("no simulated series".into()))?;
    match *test {
        CalibTest::Adf { det, lags } => {
            let (t, n) = adf_statistic(&first.values, lags, det)?;
            Ok(t < critical_value(UnitRootTest::Adf, det, level_of(alpha)?, n)?)
        }
        CalibTest::DfGls { det, lags } => {
            let d = gls_detrend(&first.values, det)?;
            let (t, n) = adf_statistic(&d, lags, Deterministic::None)?;
            Ok(t < critical_value(UnitRootTest::DfGls, det, level_of(alpha)?, n)?)
        }
        CalibTest::Johansen { det, lag } => {
            if (alpha - 0.05).abs() > 1e-12 {
                return Err(Error::Unsupported("trace critical values are embedded at 5% only".into()));
            }
            let refs: Vec<&AnnualSeries> = series.iter().collect();
            Ok(johansen_trace(&refs, lag, det, Window::all())?.selected_rank >= 1)
        }
        CalibTest::EngleGranger { lags } => {
            if series.len() < 2 {
                return Err(Error::InvalidArgument("Engle-Granger needs at least two series".into()));
            }
            let xs: Vec<&AnnualSeries> = series[1..].iter().collect();
            let fit = ols(first, &xs, true)?;
            let (t, n) = adf_statistic(&fit.residuals.values, lags, Deterministic::Constant)?;
            Ok(t < critical_value(UnitRootTest::Adf, Deterministic::Constant, level_of(alpha)?, n)?)
        }
        CalibTest::BreuschGodfrey { lags } => {
            let c = AnnualSeries::new("c", first.start_year, vec![1.0; first.len()], Units::Level)?;
            // Constant-only regression: intercept is the supplied column.
            let fit = ols(first, &[&c], false)?;
            Ok(breusch_godfrey(&fit, lags)?.rejects(alpha))
        }
        CalibTest::JarqueBera => Ok(jarque_bera_values(&first.name, &first.values)?.rejects(alpha)),
        CalibTest::ArchLm { lags } => {
            let m = first.values.iter().sum::<f64>() / first.len() as f64;
            let e: Vec<f64> = first.values.iter().map(|v| v - m).collect();
            Ok(arch_lm_values(&e, lags)?.rejects(alpha))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub test: CalibTest,
    pub spec: SimSpec,
    pub nominal_level: f64,
    pub n_reps: usize,
    pub rejections: usize,
    /// Replicates whose test could not be computed.
    pub failures: usize,
    pub rate: f64,
    /// 95% Wilson interval for the rejection rate.
    pub band: (f64, f64),
    pub nominal_in_band: bool,
}

pub const MIN_REPS: usize = 500;

pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Runs `test` on `n_reps` replicates of `spec`; replicate `i` draws from
/// stream `i` of `spec.seed`.
pub fn calibration_suite(test: CalibTest, spec: &SimSpec, nominal_level: f64, n_reps: usize) -> Result<CalibrationReport> {
    if n_reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_REPS} replicates, got {n_reps}")));
    }
    if !(0.0 < nominal_level && nominal_level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {nominal_level} outside (0, 1)")));
    }
    // Surface configuration errors once instead of per replicate.
    let probe = simulate_with(&spec.process, spec.length, &mut rng_for(spec.seed, 0))?;
    if let Err(e @ (Error::Unsupported(_) | Error::InvalidArgument(_))) = rejects(&test, &probe, nominal_level) {
        return Err(e);
    }
    let outcomes: Vec<Option<bool>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            let s = simulate_with(&spec.process, spec.length, &mut rng_for(spec.seed, i)).ok()?;
            rejects(&test, &s, nominal_level).ok()
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let rejections = outcomes.iter().filter(|o| **o == Some(true)).count();
    let done = n_reps - failures;
    let rate = if done > 0 { rejections as f64 / done as f64 } else { f64::NAN };
    let band = wilson_interval(rejections, done);
    Ok(CalibrationReport {
        test,
        spec: spec.clone(),
        nominal_level,
        n_reps,
        rejections,
        failures,
        rate,
        band,
        nominal_in_band: band.0 <= nominal_level && nominal_level <= band.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vals(p: Process, n: usize, seed: u64) -> Vec<Vec<f64>> {
        simulate(&SimSpec::new(p, n, seed)).unwrap().into_iter().map(|s| s.values).collect()
    }

    #[test]
    fn ar1_zero_is_white_noise() {
        assert_eq!(vals(Process::Ar1 { phi: 0.0, sd: 1.0 }, 50, 9), vals(Process::WhiteNoise { sd: 1.0 }, 50, 9));
    }

    #[test]
    fn random_walk_increments_are_white_noise() {
        let rw = &vals(Process::RandomWalk { sd: 1.0 }, 40, 4)[0];
        let wn = &vals(Process::WhiteNoise { sd: 1.0 }, 40, 4)[0];
        assert_eq!(rw[0], wn[0]);
        for t in 1..40 {
            assert!((rw[t] - rw[t - 1] - wn[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let p = Process::VarP { coefs: vec![vec![vec![0.5, 0.1], vec![0.0, 0.3]]], cov: vec![vec![1.0, 0.2], vec![0.2, 1.0]] };
        assert_eq!(vals(p.clone(), 30, 1), vals(p, 30, 1));
        let t = Process::TriangularCointegrated { beta: 2.0, noise_sd: 0.5 };
        assert_eq!(vals(t.clone(), 30, 2), vals(t, 30, 2));
    }

    #[test]
    fn invalid_parameters() {
        assert!(simulate(&SimSpec::new(Process::Ar1 { phi: 1.0, sd: 1.0 }, 10, 0)).is_err());
        assert!(simulate(&SimSpec::new(Process::WhiteNoise { sd: 1.0 }, 1, 0)).is_err());
        assert!(simulate(&SimSpec::new(Process::TriangularCointegrated { beta: 1.0, noise_sd: 0.0 }, 10, 0)).is_err());
        assert!(simulate(&SimSpec::new(Process::Arch1 { omega: 1.0, alpha: 1.0 }, 10, 0)).is_err());
    }

    #[test]
    fn oracle_basics() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 + 2.0 * i as f64).collect();
        let b = normal_equations_oracle(&y, &x).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
        // Orthogonal columns: each coefficient is its own projection.
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![1.0, if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        let y = vec![1.0, 2.0, 3.0, 6.0];
        let b = normal_equations_oracle(&y, &x).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12 && (b[1] + 1.0).abs() < 1e-12);
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(normal_equations_oracle(&[1.0; 5], &x).is_err());
    }

    #[test]
    fn wilson_contains_rate() {
        let (lo, hi) = wilson_interval(100, 2000);
        assert!(lo < 0.05 && hi > 0.05);
    }

    #[test]
    fn calibration_rejects_bad_requests() {
        let spec = SimSpec::new(Process::RandomWalk { sd: 1.0 }, 100, 1);
        assert!(calibration_suite(CalibTest::Adf { det: Deterministic::Constant, lags: 0 }, &spec, 0.05, 10).is_err());
        assert!(calibration_suite(CalibTest::Adf { det: Deterministic::Constant, lags: 0 }, &spec, 0.02, 500).is_err());
        assert!("nope".parse::<CalibTest>().is_err());
    }
}
