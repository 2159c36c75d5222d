//! Property tests for the invariants of the series algebra, the regression
//! core, the unit-root and Johansen statistics and dataset ingest.

use proptest::prelude::*;

use cointkit::critical::{Deterministic, JohansenDet};
use cointkit::dataset::{parse, to_csv_string, Dataset, Schema};
use cointkit::integral::{cumulative_fit, rmsd, SearchBox};
use cointkit::johansen::{johansen_trace, vecm_estimate};
use cointkit::regression::{ols, specification_battery};
use cointkit::sim::{normal_equations_oracle, simulate, Process, SimSpec};
use cointkit::unit_root::{adf_test, dfgls_test, UnitRootSpec};
use cointkit::{AnnualSeries, Units, Window};

fn values(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0_f64, min..max)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn walk(seed: u64, n: usize) -> AnnualSeries {
    simulate(&SimSpec::new(Process::RandomWalk { sd: 1.0 }, n, seed)).unwrap().remove(0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cumsum_then_diff_recovers_tail(v in values(2, 60), start in 1900..2000i32) {
        let s = AnnualSeries::rate("x", start, v.clone()).unwrap();
        let d = s.cumsum().first_diff().unwrap();
        prop_assert_eq!(d.start_year, start + 1);
        for (a, b) in d.values.iter().zip(&v[1..]) {
            prop_assert!(close(*a, *b, 1e-9));
        }
    }

    #[test]
    fn lag_redates_without_changing_values(v in values(1, 40), k in 0u32..6) {
        let s = AnnualSeries::rate("x", 1950, v).unwrap();
        let l = s.lag(k);
        for year in s.years() {
            prop_assert_eq!(l.get(year + k as i32), s.get(year));
        }
    }

    #[test]
    fn trailing_ma_is_mean_of_window(v in values(5, 50), k in 1usize..5) {
        let s = AnnualSeries::rate("x", 1960, v.clone()).unwrap();
        let m = s.trailing_ma(k).unwrap();
        prop_assert_eq!(m.len(), v.len() + 1 - k);
        prop_assert_eq!(m.end_year(), s.end_year());
        for (i, x) in m.values.iter().enumerate() {
            let mean = v[i..i + k].iter().sum::<f64>() / k as f64;
            prop_assert!(close(*x, mean, 1e-12));
        }
    }

    #[test]
    fn window_keeps_requested_years(v in values(3, 50), a in 0usize..10, b in 0usize..10) {
        let s = AnnualSeries::rate("x", 1970, v.clone()).unwrap();
        let (lo, hi) = (1970 + a.min(v.len() - 1) as i32, s.end_year() - b.min(v.len() - 1) as i32);
        prop_assume!(lo <= hi);
        let w = s.window(Some(lo), Some(hi)).unwrap();
        prop_assert_eq!(w.start_year, lo);
        prop_assert_eq!(w.end_year(), hi);
        for year in w.years() {
            prop_assert_eq!(w.get(year), s.get(year));
        }
    }

    #[test]
    fn rmsd_is_symmetric_and_zero_on_self(a in values(2, 40), shift in -5.0..5.0_f64) {
        let x = AnnualSeries::rate("a", 1980, a.clone()).unwrap();
        let y = x.affine(1.0, shift);
        prop_assert!(close(rmsd(&x, &y).unwrap(), rmsd(&y, &x).unwrap(), 1e-12));
        prop_assert!(close(rmsd(&x, &y).unwrap(), shift.abs(), 1e-9));
        prop_assert_eq!(rmsd(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn ols_matches_normal_equations(seed in 0u64..10_000, n in 15usize..60) {
        let xs = simulate(&SimSpec::new(Process::WhiteNoise { sd: 1.0 }, n, seed)).unwrap();
        let x2 = simulate(&SimSpec::new(Process::WhiteNoise { sd: 2.0 }, n, seed + 1)).unwrap();
        let e = simulate(&SimSpec::new(Process::WhiteNoise { sd: 0.5 }, n, seed + 2)).unwrap();
        let (x1, x2, e) = (&xs[0], &x2[0], &e[0]);
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * x1.values[i] - x2.values[i] + e.values[i]).collect();
        let ys = AnnualSeries::rate("y", x1.start_year, y.clone()).unwrap();
        let fit = ols(&ys, &[x1, x2], true).unwrap();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, x1.values[i], x2.values[i]]).collect();
        let oracle = normal_equations_oracle(&y, &rows).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            prop_assert!(close(*a, *b, 1e-9));
        }
        let mean_resid = fit.residuals.values.iter().sum::<f64>() / n as f64;
        prop_assert!(mean_resid.abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        prop_assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        let b = specification_battery(&fit).unwrap();
        for v in [&b.breusch_pagan, &b.ramsey_reset, &b.arch_lm, &b.breusch_godfrey, &b.jarque_bera] {
            prop_assert!(v.statistic.is_finite() && (0.0..=1.0).contains(&v.p_value), "{}", v.test);
        }
    }

    #[test]
    fn moments_satisfy_pearson_inequality(v in values(4, 60)) {
        let d = AnnualSeries::rate("x", 1950, v).unwrap().describe().unwrap();
        prop_assert!(d.stdev >= 0.0);
        if let (Some(s), Some(k)) = (d.skewness, d.kurtosis) {
            prop_assert!(k >= 1.0 + s * s - 1e-9);
        }
    }

    #[test]
    fn unit_root_verdict_matches_critical_values(seed in 0u64..10_000, n in 30usize..120, lags in 0usize..4) {
        let s = walk(seed, n);
        for det in [Deterministic::Constant, Deterministic::Trend] {
            for r in [adf_test(&s, UnitRootSpec::new(det, lags)).unwrap(), dfgls_test(&s, UnitRootSpec::new(det, lags + 1)).unwrap()] {
                let cv = r.critical_values;
                prop_assert!(cv[0] < cv[1] && cv[1] < cv[2]);
                let expected = cointkit::critical::Level::ALL.into_iter().zip(cv).find(|(_, c)| r.statistic < *c).map(|(l, _)| l);
                prop_assert_eq!(r.reject_at, expected);
            }
        }
    }

    #[test]
    fn johansen_sequence_is_consistent(seed in 0u64..10_000, p in 1usize..4) {
        let ys = simulate(&SimSpec::new(Process::IndependentRandomWalks { k: 3, sd: 1.0 }, 100, seed)).unwrap();
        let refs: Vec<&AnnualSeries> = ys.iter().collect();
        for det in JohansenDet::ALL {
            let j = johansen_trace(&refs, p, det, Window::all()).unwrap();
            prop_assert!(j.eigenvalues.iter().all(|l| (0.0..1.0).contains(l)));
            prop_assert!(j.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(j.trace_stats.windows(2).all(|w| w[0] >= w[1]));
            let first = j.trace_stats.iter().zip(&j.critical_5pct).position(|(t, c)| t < c).unwrap_or(3);
            prop_assert_eq!(j.selected_rank, first);
            for r in 1..3 {
                let m = vecm_estimate(&refs, p, r, det, Window::all()).unwrap();
                for i in 0..r {
                    for c in 0..r {
                        let want = if i == c { 1.0 } else { 0.0 };
                        prop_assert!((m.beta[(i, c)] - want).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn cumulative_objective_is_reported_rmsd(seed in 0u64..10_000) {
        let lf = simulate(&SimSpec::new(Process::RandomWalk { sd: 5.0 }, 40, seed)).unwrap().remove(0).affine(1.0, 1000.0);
        let lf = AnnualSeries::new("LF", 1960, lf.values, Units::Level).unwrap();
        let noise = simulate(&SimSpec::new(Process::WhiteNoise { sd: 0.01 }, 40, seed + 7)).unwrap().remove(0);
        let y = AnnualSeries::rate("y", 1960, noise.values.iter().map(|e| 0.02 + e).collect()).unwrap();
        let f = cumulative_fit(&y, None, &lf, 0, 1, SearchBox::default(), Window::all()).unwrap();
        prop_assert!(f.dynamic_rmsd >= 0.0 && f.cumulative_rmsd >= 0.0);
        prop_assert!(f.dynamic_sterr.is_none_or(|v| v >= 0.0) && f.cumulative_sterr.is_none_or(|v| v >= 0.0));
        prop_assert!((f.objective - f.cumulative_rmsd).abs() <= 1e-12 * (1.0 + f.objective));
    }

    #[test]
    fn simulation_is_determined_by_seed(seed in any::<u64>(), n in 2usize..50) {
        let spec = SimSpec::new(Process::TriangularCointegrated { beta: 1.5, noise_sd: 1.0 }, n, seed);
        prop_assert_eq!(simulate(&spec).unwrap(), simulate(&spec).unwrap());
    }

    #[test]
    fn adf_statistic_is_affine_invariant(seed in 0u64..10_000, a in 0.1..50.0_f64, b in -100.0..100.0_f64, lags in 0usize..3) {
        let s = walk(seed, 60);
        let t = s.affine(a, b);
        for det in [Deterministic::Constant, Deterministic::Trend] {
            let spec = UnitRootSpec::new(det, lags);
            prop_assert!(close(adf_test(&s, spec).unwrap().statistic, adf_test(&t, spec).unwrap().statistic, 1e-6));
        }
        let spec = UnitRootSpec::new(Deterministic::Constant, lags + 1);
        prop_assert!(close(dfgls_test(&s, spec).unwrap().statistic, dfgls_test(&t, spec).unwrap().statistic, 1e-6));
    }

    #[test]
    fn johansen_is_scale_invariant(seed in 0u64..10_000, a in 0.1..20.0_f64, b in 0.1..20.0_f64) {
        let ys = simulate(&SimSpec::new(Process::IndependentRandomWalks { k: 2, sd: 1.0 }, 80, seed)).unwrap();
        for det in JohansenDet::ALL {
            // Without a deterministic term only rescaling leaves the fit unchanged.
            let shift = if det == JohansenDet::None { 0.0 } else { 3.0 };
            let scaled = [ys[0].affine(a, shift), ys[1].affine(b, -shift)];
            let j0 = johansen_trace(&[&ys[0], &ys[1]], 2, det, Window::all()).unwrap();
            let j1 = johansen_trace(&[&scaled[0], &scaled[1]], 2, det, Window::all()).unwrap();
            for (x, y) in j0.eigenvalues.iter().zip(&j1.eigenvalues) {
                prop_assert!((x - y).abs() < 1e-8);
            }
            prop_assert_eq!(j0.selected_rank, j1.selected_rank);
        }
    }

    #[test]
    fn dataset_round_trips(
        cols in prop::collection::vec(prop::collection::vec(-1.0..1.0_f64, 3..25), 1..4),
        offsets in prop::collection::vec(0i32..5, 4),
    ) {
        let series: Vec<AnnualSeries> = cols
            .into_iter()
            .enumerate()
            .map(|(j, v)| AnnualSeries::new(format!("S{j}"), 1960 + offsets[j], v, Units::Rate).unwrap())
            .collect();
        let ds = Dataset { series, provenance: "synthetic".into() };
        let text = to_csv_string(&ds).unwrap();
        let back = parse(&text, &Schema::default()).unwrap();
        prop_assert_eq!(back, ds);
    }
}
