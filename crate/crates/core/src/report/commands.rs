//! One function per CLI subcommand. Each returns a [`ReportBundle`] whose
//! tables record the operation and parameters behind every cell.

use std::ops::RangeInclusive;

use serde_json::{json, Value};

use super::config::{sha256_hex, Config, RelationConfig};
use super::reference;
use super::{Cell, Figure, ReportBundle, Table};
use crate::critical::{Deterministic, JohansenDet, Level, UnitRootTest};
use crate::dataset::{self, Dataset, Schema, TABLE1_SERIES};
use crate::engle_granger::{build_predictor, engle_granger, residual_series, PredictorCoeffs, EG_CAVEAT};
use crate::error::{Error, Result};
use crate::integral::{
    cumulative_error_decomposition, cumulative_fit, curves, table8_compare, Bound, CumulativeFitResult,
};
use crate::johansen::{johansen_trace, vecm_estimate};
use crate::regression::{ols, Df, TestVerdict};
use crate::series::{AnnualSeries, Window};
use crate::sim::{calibration_suite, CalibTest, Process, SimSpec};
use crate::unit_root::{run_test, UnitRootResult, UnitRootSpec};
use crate::var::{is_stable, lag_order_select, var_estimate, var_jarque_bera, var_lm_autocorr, var_stability};

pub const BUNDLED_FRANCE: &str = include_str!("../../data/france.csv");

pub const LAG_NOTE: &str = "lag k means the value observed k years earlier: predictor(t) uses UE(t-t0) and dLF/LF(t-t1)";
pub const TREND_ON_DIFFERENCE: &str = "trend term on a differenced series";
const VECM_DET: JohansenDet = JohansenDet::Constant;

#[derive(Debug, Clone)]
pub struct DataSource {
    pub label: String,
    pub sha256: String,
}

/// Derived dataset, resolved configuration and seed shared by all commands.
#[derive(Debug, Clone)]
pub struct Context {
    pub dataset: Dataset,
    pub config: Config,
    pub seed: u64,
    pub source: DataSource,
}

impl Context {
    pub fn from_text(text: &str, label: impl Into<String>, schema: &Schema, config: Config, seed: Option<u64>) -> Result<Self> {
        let raw = dataset::parse(text, schema)?;
        if raw.series.is_empty() {
            return Err(Error::InvalidArgument("dataset has no series".into()));
        }
        let seed = seed.unwrap_or(config.seed);
        Ok(Self {
            dataset: dataset::derive(&raw)?,
            config,
            seed,
            source: DataSource { label: label.into(), sha256: sha256_hex(text.as_bytes()) },
        })
    }

    /// The bundled France reconstruction with the bundled presets.
    pub fn bundled() -> Result<Self> {
        Self::from_text(BUNDLED_FRANCE, "bundled:france.csv", &Schema::default(), Config::bundled(), None)
    }

    pub fn relation(&self, name: &str) -> Result<Relation<'_>> {
        let cfg = self.config.relation(name)?.clone();
        let target = self.dataset.require(&cfg.target)?;
        let rate = self.dataset.require("dLF/LF")?;
        let ue = if cfg.uses_ue() { Some(self.dataset.require("UE")?) } else { None };
        Ok(Relation { name: name.to_string(), cfg, target, ue, rate })
    }
}

/// A configured relation bound to the dataset series it reads.
#[derive(Debug, Clone)]
pub struct Relation<'a> {
    pub name: String,
    pub cfg: RelationConfig,
    pub target: &'a AnnualSeries,
    pub ue: Option<&'a AnnualSeries>,
    pub rate: &'a AnnualSeries,
}

impl Relation<'_> {
    /// Lagged right-hand-side inputs: `UE(t-t0)` when used, then `dLF/LF(t-t1)`.
    pub fn inputs(&self) -> Vec<AnnualSeries> {
        let mut v = Vec::with_capacity(2);
        if let Some(ue) = self.ue {
            v.push(ue.lag(self.cfg.t0));
        }
        v.push(self.rate.lag(self.cfg.t1));
        v
    }

    pub fn predictor(&self) -> Result<AnnualSeries> {
        build_predictor(self.rate, self.ue, &self.cfg.coeffs())
    }

    /// Systems for the rank test: the target with its raw inputs, with the
    /// preset prediction, and with its 2- and 3-year moving averages.
    pub fn systems(&self) -> Result<Vec<(String, Vec<AnnualSeries>)>> {
        let pred = self.predictor()?;
        let ma = |k: usize| -> Result<AnnualSeries> { Ok(pred.trailing_ma(k)?.renamed(format!("MA{k}(predicted)"))) };
        let mut inputs = vec![self.target.clone()];
        inputs.extend(self.inputs());
        Ok(vec![
            ("inputs".into(), inputs),
            ("predicted".into(), vec![self.target.clone(), pred.clone()]),
            ("MA(2)".into(), vec![self.target.clone(), ma(2)?]),
            ("MA(3)".into(), vec![self.target.clone(), ma(3)?]),
        ])
    }

    fn params(&self) -> Value {
        json!({ "relation": self.name, "config": self.cfg })
    }
}

fn level_text(l: Option<Level>) -> Cell {
    match l {
        Some(Level::One) => "1%".into(),
        Some(Level::Five) => "5%".into(),
        Some(Level::Ten) => "10%".into(),
        None => Cell::Empty,
    }
}

fn det_text(d: Deterministic) -> &'static str {
    match d {
        Deterministic::None => "none",
        Deterministic::Constant => "constant",
        Deterministic::Trend => "trend",
    }
}

fn test_text(t: UnitRootTest) -> &'static str {
    match t {
        UnitRootTest::Adf => "ADF",
        UnitRootTest::DfGls => "DF-GLS",
    }
}

fn df_text(df: Df) -> String {
    match df {
        Df::One(a) => a.to_string(),
        Df::Pair(a, b) => format!("{a},{b}"),
    }
}

fn figure(name: String, title: impl Into<String>, s: &AnnualSeries) -> Figure {
    Figure::new(name, title, s.clone())
}

fn with_window(s: &AnnualSeries, w: Window) -> Result<AnnualSeries> {
    s.window(w.start, w.end)
}

/// Series built by differencing another dataset series.
fn is_difference(ds: &Dataset, name: &str) -> bool {
    let Some(rest) = name.strip_prefix('d') else { return false };
    let base = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(rest);
    ds.get(base).is_some()
}

// ---------------------------------------------------------------- descstats

pub fn descstats(ctx: &Context) -> Result<ReportBundle> {
    let ds = &ctx.dataset;
    let mut names: Vec<&str> = TABLE1_SERIES.iter().copied().filter(|n| ds.get(n).is_some()).collect();
    if names.is_empty() {
        names = ds.names();
    }
    if names.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut cols = vec!["statistic"];
    cols.extend(names.iter().copied());
    let mut t = Table::new(
        "table1_descriptive",
        "Descriptive statistics of the series and their first differences",
        &cols,
        "describe",
        json!({ "series": names, "moments": "divisor N" }),
    );
    let stats = names
        .iter()
        .map(|n| ds.require(n).and_then(|s| Ok((s, s.describe()?))))
        .collect::<Result<Vec<_>>>()?;
    type Stat<'a> = (&'a AnnualSeries, crate::series::DescriptiveStats);
    type Row = Box<dyn Fn(&Stat) -> Cell>;
    let rows: [(&str, Row); 7] = [
        ("first_year", Box::new(|(s, _)| s.start_year.into())),
        ("last_year", Box::new(|(s, _)| s.end_year().into())),
        ("n", Box::new(|(_, d)| d.n.into())),
        ("mean", Box::new(|(_, d)| d.mean.into())),
        ("stdev", Box::new(|(_, d)| d.stdev.into())),
        ("skewness", Box::new(|(_, d)| Cell::opt(d.skewness))),
        ("kurtosis", Box::new(|(_, d)| Cell::opt(d.kurtosis))),
    ];
    for (label, f) in rows.iter() {
        let mut row = vec![Cell::from(*label)];
        row.extend(stats.iter().map(f));
        t.push(row);
    }
    let mut b = ReportBundle::default();
    b.tables.push(t);
    for (s, _) in &stats {
        let panel = if is_difference(ds, &s.name) { "fig01b" } else { "fig01a" };
        b.figures.push(figure(
            format!("{panel}_{}", s.name),
            if panel == "fig01a" { "series in levels" } else { "first differences" },
            s,
        ));
    }
    Ok(b)
}

// ---------------------------------------------------------------- unitroot

const UR_COLUMNS: [&str; 13] = [
    "series", "deterministic", "test", "lag", "first_year", "last_year", "n_obs", "statistic", "cv_1pct", "cv_5pct",
    "cv_10pct", "reject_at", "note",
];

fn ur_row(series: &AnnualSeries, test: UnitRootTest, spec: UnitRootSpec, flag: Option<&str>) -> (Vec<Cell>, Option<String>) {
    let head = vec![
        Cell::from(series.name.as_str()),
        det_text(spec.deterministic).into(),
        test_text(test).into(),
        spec.lags.into(),
        series.start_year.into(),
        series.end_year().into(),
    ];
    match run_test(test, series, spec) {
        Ok(r) => (ur_result_cells(head, &r, flag), None),
        Err(e) => {
            let msg = format!("{} {} lag {} on `{}`: {e}", test_text(test), det_text(spec.deterministic), spec.lags, series.name);
            let mut row = head;
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::text(e.to_string())]);
            (row, Some(msg))
        }
    }
}

fn ur_result_cells(mut head: Vec<Cell>, r: &UnitRootResult, flag: Option<&str>) -> Vec<Cell> {
    let mut notes: Vec<&str> = r.notes.iter().map(String::as_str).collect();
    notes.extend(flag);
    head.extend([
        r.n_obs.into(),
        r.statistic.into(),
        r.critical_values[0].into(),
        r.critical_values[1].into(),
        r.critical_values[2].into(),
        level_text(r.reject_at),
        if notes.is_empty() { Cell::Empty } else { Cell::text(notes.join("; ")) },
    ]);
    head
}

/// `(test, deterministic, lags)` grid rows.
type UrGrid = Vec<(UnitRootTest, Deterministic, RangeInclusive<usize>)>;

fn ur_table(ctx: &Context, name: &str, title: &str, series: &[&AnnualSeries], grid: &UrGrid, b: &mut ReportBundle) -> Table {
    let params: Vec<Value> = grid
        .iter()
        .map(|(t, d, l)| json!({ "test": test_text(*t), "deterministic": det_text(*d), "lags": [l.start(), l.end()] }))
        .collect();
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    let mut t = Table::new(name, title, &UR_COLUMNS, "unit_root::run_test", json!({ "series": names, "grid": params }));
    for s in series {
        for (test, det, lags) in grid {
            let flag = (*det == Deterministic::Trend && is_difference(&ctx.dataset, &s.name)).then_some(TREND_ON_DIFFERENCE);
            for p in lags.clone() {
                let (row, err) = ur_row(s, *test, UnitRootSpec::new(*det, p), flag);
                if let Some(e) = err {
                    b.diagnose(e);
                }
                t.push(row);
            }
        }
    }
    t
}

/// Levels and differences grids, or the full grid for named series.
pub fn unitroot(ctx: &Context, series: &[String]) -> Result<ReportBundle> {
    let ds = &ctx.dataset;
    let mut b = ReportBundle::default();
    if !series.is_empty() {
        let ss = series.iter().map(|n| ds.require(n)).collect::<Result<Vec<_>>>()?;
        let grid: UrGrid = vec![
            (UnitRootTest::Adf, Deterministic::Constant, 0..=3),
            (UnitRootTest::Adf, Deterministic::Trend, 0..=3),
            (UnitRootTest::DfGls, Deterministic::Constant, 1..=4),
            (UnitRootTest::DfGls, Deterministic::Trend, 1..=4),
        ];
        let t = ur_table(ctx, "unitroot", "Unit-root tests", &ss, &grid, &mut b);
        b.tables.push(t);
        return Ok(b);
    }
    let levels: Vec<&AnnualSeries> = ["GDPD", "CPI", "UE", "dLF/LF"].iter().filter_map(|n| ds.get(n)).collect();
    let diffs: Vec<&AnnualSeries> = ["dGDPD", "dCPI", "dUE", "d(dLF/LF)"].iter().filter_map(|n| ds.get(n)).collect();
    if levels.is_empty() && diffs.is_empty() {
        return Err(Error::InvalidArgument(
            "no GDPD, CPI, UE or LF series; name the series to test explicitly".into(),
        ));
    }
    let grid2: UrGrid = vec![
        (UnitRootTest::Adf, Deterministic::Constant, 0..=1),
        (UnitRootTest::DfGls, Deterministic::Trend, 1..=2),
    ];
    let t2 = ur_table(ctx, "table2_unitroot_levels", "Unit-root tests on the series in levels", &levels, &grid2, &mut b);
    let grid3: UrGrid = vec![
        (UnitRootTest::Adf, Deterministic::Trend, 0..=3),
        (UnitRootTest::Adf, Deterministic::Constant, 0..=3),
        (UnitRootTest::DfGls, Deterministic::Trend, 1..=4),
        (UnitRootTest::DfGls, Deterministic::Constant, 1..=4),
    ];
    let t3 = ur_table(ctx, "table3_unitroot_differences", "Unit-root tests on first differences", &diffs, &grid3, &mut b);
    b.tables.extend([t2, t3]);
    Ok(b)
}

// ------------------------------------------------------------ engle-granger

/// `diff1..diff4`: the measured series minus the k-year moving average of
/// the preset prediction, over the relation's Engle-Granger window.
pub fn residual_battery_spans(ctx: &Context, relation: &str) -> Result<Vec<AnnualSeries>> {
    let rel = ctx.relation(relation)?;
    let w = rel.cfg.eg_window();
    let target = with_window(rel.target, w)?;
    let pred = rel.predictor()?;
    (1..=4).map(|k| residual_series(&target, &pred, k)).collect()
}

pub fn engle_granger_cmd(ctx: &Context, relation: &str) -> Result<ReportBundle> {
    let rel = ctx.relation(relation)?;
    let name = &rel.name;
    let w = rel.cfg.eg_window();
    let target = with_window(rel.target, w)?;
    let pred = rel.predictor()?;
    let mut b = ReportBundle::default();
    b.note(EG_CAVEAT);
    b.note(LAG_NOTE);
    let params = json!({ "relation": name, "config": rel.cfg, "window": [w.start, w.end] });

    let diffs = residual_battery_spans(ctx, relation)?;
    let refs: Vec<&AnnualSeries> = diffs.iter().collect();
    let grid: UrGrid = vec![
        (UnitRootTest::Adf, Deterministic::Constant, 0..=3),
        (UnitRootTest::DfGls, Deterministic::Constant, 1..=4),
    ];
    let mut t4 = ur_table(
        ctx,
        &format!("table4_{name}_residuals"),
        "Unit-root tests on measured minus moving-average predicted",
        &refs,
        &grid,
        &mut b,
    );
    t4.operation = "engle_granger::residual_series + unit_root::run_test".into();
    t4.parameters = json!({ "relation": params, "grid": t4.parameters["grid"].clone(), "ma_windows": [1, 2, 3, 4] });
    b.tables.push(t4);

    let ma2 = pred.trailing_ma(2)?.renamed("MA2(predicted)");
    let ma3 = pred.trailing_ma(3)?.renamed("MA3(predicted)");
    let inputs = rel.inputs();
    let sets: Vec<(&str, Vec<&AnnualSeries>)> = vec![
        ("inputs", inputs.iter().collect()),
        ("predicted", vec![&pred]),
        ("MA(2)", vec![&ma2]),
        ("MA(3)", vec![&ma3]),
    ];
    let ur_specs = [
        (UnitRootTest::Adf, UnitRootSpec::new(Deterministic::Constant, 0)),
        (UnitRootTest::Adf, UnitRootSpec::new(Deterministic::Constant, 1)),
        (UnitRootTest::DfGls, UnitRootSpec::new(Deterministic::Constant, 1)),
    ];
    let mut reg = Table::new(
        format!("table5_{name}_regression"),
        "First-stage regressions of the measured series",
        &[
            "predictor", "term", "coefficient", "std_error", "t_stat", "p_value", "r_squared", "rmse", "n_obs",
            "first_year", "last_year", "note",
        ],
        "regression::ols",
        params.clone(),
    );
    let mut diag = Table::new(
        format!("table5_{name}_diagnostics"),
        "Specification tests on the first-stage residuals",
        &["predictor", "test", "statistic", "p_value", "df", "null"],
        "regression::specification_battery",
        json!({ "relation": params, "reset_powers": 3, "arch_lags": 1, "bg_lags": 1 }),
    );
    let mut res = Table::new(
        format!("table5_{name}_residual_tests"),
        "Unit-root tests on the first-stage residuals",
        &["predictor", "test", "deterministic", "lag", "statistic", "cv_5pct", "reject_at", "cointegrated_at"],
        "engle_granger::engle_granger",
        params.clone(),
    );
    for (label, xs) in &sets {
        match engle_granger(&target, xs, &ur_specs) {
            Ok(eg) => {
                let f = &eg.first_stage;
                let last = f.residuals.end_year();
                for i in 0..f.coefficients.len() {
                    reg.push(vec![
                        (*label).into(),
                        f.names[i].as_str().into(),
                        f.coefficients[i].into(),
                        f.std_errors[i].into(),
                        f.t_stats[i].into(),
                        f.p_values[i].into(),
                        f.r_squared.into(),
                        f.rmse.into(),
                        f.n.into(),
                        f.residuals.start_year.into(),
                        last.into(),
                        Cell::Empty,
                    ]);
                }
                let d = &eg.diagnostics;
                for v in [&d.breusch_pagan, &d.ramsey_reset, &d.arch_lm, &d.breusch_godfrey, &d.jarque_bera] {
                    diag.push(verdict_row(label, v));
                }
                diag.push(vec![
                    (*label).into(),
                    "Durbin-Watson".into(),
                    d.durbin_watson.into(),
                    Cell::Empty,
                    Cell::Empty,
                    "no first-order autocorrelation".into(),
                ]);
                for ((test, spec), r) in ur_specs.iter().zip(&eg.residual_tests) {
                    res.push(vec![
                        (*label).into(),
                        test_text(*test).into(),
                        det_text(spec.deterministic).into(),
                        spec.lags.into(),
                        r.statistic.into(),
                        r.critical_values[1].into(),
                        level_text(r.reject_at),
                        level_text(eg.cointegrated_at),
                    ]);
                }
            }
            Err(e @ (Error::Degenerate(_) | Error::RankDeficient(_) | Error::InsufficientData(_))) => {
                b.diagnose(format!("relation `{name}`, predictor {label}: {e}"));
                let mut row = vec![Cell::from(*label), "degenerate".into()];
                row.extend(std::iter::repeat_n(Cell::Empty, 9));
                row.push(Cell::text(e.to_string()));
                reg.push(row);
            }
            Err(e) => return Err(e),
        }
    }
    b.tables.extend([reg, diag, res]);

    let fig = |suffix: &str, title: &str, s: &AnnualSeries| -> Result<Figure> {
        Ok(figure(format!("{name}_{suffix}"), title, &with_window(s, w)?.renamed(suffix)))
    };
    b.figures.push(fig("measured", "measured series", &target)?);
    b.figures.push(fig("predicted", "predicted series", &pred)?);
    b.figures.push(fig("ma3_predicted", "3-year moving average of the prediction", &ma3)?);
    b.figures.push(fig("diff1", "measured minus predicted", &diffs[0])?);
    b.figures.push(fig("diff3", "measured minus MA(3) predicted", &diffs[2])?);
    Ok(b)
}

fn verdict_row(label: &str, v: &TestVerdict) -> Vec<Cell> {
    vec![
        label.into(),
        v.test.as_str().into(),
        v.statistic.into(),
        v.p_value.into(),
        df_text(v.df).into(),
        v.null_description.as_str().into(),
    ]
}

// ----------------------------------------------------------------- johansen

pub fn johansen_cmd(ctx: &Context, relation: &str, dets: &[JohansenDet], lags: RangeInclusive<usize>) -> Result<ReportBundle> {
    let rel = ctx.relation(relation)?;
    let name = &rel.name;
    let w = rel.cfg.window();
    let mut b = ReportBundle::default();
    b.note(LAG_NOTE);
    let det_labels: Vec<&str> = dets.iter().map(|d| d.label()).collect();
    let params = json!({
        "relation": rel.params(), "window": [w.start, w.end], "deterministic": det_labels,
        "lags": [lags.start(), lags.end()], "critical_values": "Osterwald-Lenum 5%",
    });
    let mut rank = Table::new(
        format!("table6_{name}_rank"),
        "Johansen trace test: selected rank",
        &[
            "system", "variables", "deterministic", "lag", "n_obs", "first_year", "last_year", "selected_rank",
            "log_likelihood", "eigenvalue", "trace", "cv_5pct", "note",
        ],
        "johansen::johansen_trace",
        params.clone(),
    );
    let mut seq = Table::new(
        format!("table6_{name}_trace"),
        "Johansen trace test: full sequence",
        &["system", "deterministic", "lag", "r", "log_likelihood", "eigenvalue", "trace", "cv_5pct", "selected"],
        "johansen::johansen_trace",
        params,
    );
    for (sys, ys) in rel.systems()? {
        let refs: Vec<&AnnualSeries> = ys.iter().collect();
        let vars = ys.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(" ");
        for &det in dets {
            for p in lags.clone() {
                let head = vec![Cell::from(sys.as_str()), vars.as_str().into(), det.label().into(), p.into()];
                match johansen_trace(&refs, p, det, w) {
                    Ok(j) => {
                        let k = j.eigenvalues.len();
                        let r = j.selected_rank;
                        let mut row = head;
                        row.extend([
                            j.n_obs.into(),
                            j.first_year.into(),
                            j.last_year.into(),
                            r.into(),
                            j.log_likelihoods[r].into(),
                            if r >= 1 { j.eigenvalues[r - 1].into() } else { Cell::Empty },
                            if r < k { j.trace_stats[r].into() } else { Cell::Empty },
                            if r < k { j.critical_5pct[r].into() } else { Cell::Empty },
                            Cell::Empty,
                        ]);
                        rank.push(row);
                        for i in 0..=k {
                            seq.push(vec![
                                sys.as_str().into(),
                                det.label().into(),
                                p.into(),
                                i.into(),
                                j.log_likelihoods[i].into(),
                                if i >= 1 { j.eigenvalues[i - 1].into() } else { Cell::Empty },
                                if i < k { j.trace_stats[i].into() } else { Cell::Empty },
                                if i < k { j.critical_5pct[i].into() } else { Cell::Empty },
                                if i == r { "*".into() } else { Cell::Empty },
                            ]);
                        }
                    }
                    Err(e) if e.exit_code() == 2 => {
                        b.diagnose(format!("relation `{name}`, system {sys}, {} lag {p}: {e}", det.label()));
                        let mut row = head;
                        row.extend(std::iter::repeat_n(Cell::Empty, 8));
                        row.push(Cell::text(e.to_string()));
                        rank.push(row);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    b.tables.extend([rank, seq]);
    Ok(b)
}

// --------------------------------------------------------------------- vecm

pub fn vecm_cmd(ctx: &Context, relation: &str, ranks: &[usize], lags: RangeInclusive<usize>) -> Result<ReportBundle> {
    let rel = ctx.relation(relation)?;
    let name = &rel.name;
    let w = rel.cfg.window();
    let mut ys = vec![rel.target.clone()];
    ys.extend(rel.inputs());
    let refs: Vec<&AnnualSeries> = ys.iter().collect();
    let k = ys.len();
    if let Some(&r) = ranks.iter().find(|&&r| r == 0 || r >= k) {
        return Err(Error::InvalidArgument(format!("rank {r} outside 1..={} for {k} variables", k - 1)));
    }
    let mut b = ReportBundle::default();
    b.note(LAG_NOTE);
    let params = json!({
        "relation": rel.params(), "window": [w.start, w.end], "deterministic": VECM_DET.label(),
        "ranks": ranks, "lags": [lags.start(), lags.end()],
        "normalization": "leading rank-by-rank block of beta is the identity",
    });
    let mut t = Table::new(
        format!("table7_{name}_vecm"),
        "Coefficients of the implied long-run relations",
        &[
            "rank", "lag", "n_obs", "first_year", "equation", "variable", "slope", "std_error", "intercept", "rmse",
            "log_likelihood",
        ],
        "johansen::vecm_estimate",
        params,
    );
    for &r in ranks {
        for p in lags.clone() {
            let m = match vecm_estimate(&refs, p, r, VECM_DET, w) {
                Ok(m) => m,
                Err(e) if e.exit_code() == 2 => {
                    b.diagnose(format!("relation `{name}`, VECM rank {r} lag {p}: {e}"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            for (j, rel_j) in m.implied_relations().iter().enumerate() {
                for (var, slope, se) in &rel_j.slopes {
                    t.push(vec![
                        r.into(),
                        p.into(),
                        m.n_obs.into(),
                        m.first_year.into(),
                        rel_j.target.as_str().into(),
                        var.as_str().into(),
                        (*slope).into(),
                        Cell::opt(*se),
                        Cell::opt(rel_j.intercept),
                        m.rmse[j].into(),
                        m.log_likelihood.into(),
                    ]);
                }
            }
        }
    }
    b.tables.push(t);
    var_tables(&rel, w, &mut b)?;
    Ok(b)
}

/// Pre- and post-estimation checks for the target as a VAR with the lagged
/// inputs exogenous.
fn var_tables(rel: &Relation<'_>, w: Window, b: &mut ReportBundle) -> Result<()> {
    const P_MAX: usize = 4;
    const P_FIT: usize = 2;
    let name = &rel.name;
    let inputs = rel.inputs();
    let exog: Vec<&AnnualSeries> = inputs.iter().collect();
    let ys = [rel.target];
    let params = json!({
        "relation": rel.params(), "window": [w.start, w.end], "endogenous": [rel.target.name],
        "exogenous": inputs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), "p_max": P_MAX, "p_fit": P_FIT,
    });
    let sel = match lag_order_select(&ys, P_MAX, &exog, w) {
        Ok(s) => s,
        Err(e) if e.exit_code() == 2 => {
            b.diagnose(format!("relation `{name}`, VAR lag selection: {e}"));
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let mut t = Table::new(
        format!("var_{name}_lag_selection"),
        "VAR lag-order selection on a common sample",
        &["lag", "log_likelihood", "lr", "df", "p_value", "fpe", "aic", "hqic", "sbic", "selected_by"],
        "var::lag_order_select",
        params.clone(),
    );
    for row in &sel.rows {
        let by: Vec<&str> = [("LR", sel.lr), ("FPE", sel.fpe), ("AIC", sel.aic), ("HQIC", sel.hqic), ("SBIC", sel.sbic)]
            .iter()
            .filter(|(_, l)| *l == row.lag)
            .map(|(n, _)| *n)
            .collect();
        t.push(vec![
            row.lag.into(),
            row.log_likelihood.into(),
            Cell::opt(row.lr),
            row.lr_df.into(),
            Cell::opt(row.lr_p_value),
            row.fpe.into(),
            row.aic.into(),
            row.hqic.into(),
            row.sbic.into(),
            by.join(" ").into(),
        ]);
    }
    b.tables.push(t);

    let m = match var_estimate(&ys, P_FIT, &exog, true, w) {
        Ok(m) => m,
        Err(e) if e.exit_code() == 2 => {
            b.diagnose(format!("relation `{name}`, VAR({P_FIT}): {e}"));
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let mut d = Table::new(
        format!("var_{name}_diagnostics"),
        "VAR residual diagnostics and stability",
        &["check", "statistic", "p_value", "df", "detail"],
        "var::var_lm_autocorr + var::var_jarque_bera + var::var_stability",
        params,
    );
    for v in var_lm_autocorr(&m, 4)? {
        d.push(vec![v.test.as_str().into(), v.statistic.into(), v.p_value.into(), df_text(v.df).into(), v.null_description.as_str().into()]);
    }
    let jb = var_jarque_bera(&m)?;
    for (eq, skew, kurt) in &jb.raw_moments {
        d.push(vec![format!("moments {eq}").into(), Cell::Empty, Cell::Empty, Cell::Empty, format!("skewness {} kurtosis {}", super::format_num(*skew), super::format_num(*kurt)).into()]);
    }
    for v in jb.equations.iter().chain(std::iter::once(&jb.joint)) {
        d.push(vec![v.test.as_str().into(), v.statistic.into(), v.p_value.into(), df_text(v.df).into(), v.null_description.as_str().into()]);
    }
    for (i, modulus) in var_stability(&m).iter().enumerate() {
        d.push(vec![format!("companion eigenvalue {}", i + 1).into(), (*modulus).into(), Cell::Empty, Cell::Empty, "modulus".into()]);
    }
    d.push(vec!["stable".into(), Cell::Empty, Cell::Empty, Cell::Empty, if is_stable(&m) { "yes" } else { "no" }.into()]);
    b.tables.push(d);
    Ok(())
}

// ------------------------------------------------------------------- cumfit

/// Coefficients of the target's implied relation from a rank-1 VECM.
fn vecm_coeffs(rel: &Relation<'_>, lag: usize, w: Window) -> Result<PredictorCoeffs> {
    let mut ys = vec![rel.target.clone()];
    ys.extend(rel.inputs());
    let refs: Vec<&AnnualSeries> = ys.iter().collect();
    let m = vecm_estimate(&refs, lag, 1, VECM_DET, w)?;
    let imp = &m.implied_relations()[0];
    let slope = |i: usize| imp.slopes[i].1;
    let (a0, a1) = if rel.ue.is_some() { (slope(0), slope(1)) } else { (0.0, slope(0)) };
    Ok(PredictorCoeffs { a0, a1, a2: imp.intercept.unwrap_or(0.0), t0: rel.cfg.t0, t1: rel.cfg.t1 })
}

fn regression_coeffs(rel: &Relation<'_>, w: Window) -> Result<PredictorCoeffs> {
    let y = with_window(rel.target, w)?;
    let inputs = rel.inputs();
    let xs: Vec<&AnnualSeries> = inputs.iter().collect();
    let f = ols(&y, &xs, true)?;
    let (a0, a1) = if rel.ue.is_some() { (f.coefficients[1], f.coefficients[2]) } else { (0.0, f.coefficients[1]) };
    Ok(PredictorCoeffs { a0, a1, a2: f.coefficients[0], t0: rel.cfg.t0, t1: rel.cfg.t1 })
}

/// Free cumulative fit, plus the pinned-A0 variant when configured.
pub fn cumulative_fits(ctx: &Context, rel: &Relation<'_>) -> Result<Vec<(String, CumulativeFitResult)>> {
    let w = rel.cfg.window();
    let search = ctx.config.search_for(&rel.cfg);
    let (t0, t1) = (rel.cfg.t0, rel.cfg.t1);
    let mut out = vec![("Cumulative".to_string(), cumulative_fit(rel.target, rel.ue, rel.rate, t0, t1, search, w)?)];
    if let (Some(v), Some(_)) = (rel.cfg.pin_a0, rel.ue) {
        let pinned = search.with_a0(Bound::Fixed(v));
        out.push((format!("Cumulative (A0={v})"), cumulative_fit(rel.target, rel.ue, rel.rate, t0, t1, pinned, w)?));
    }
    Ok(out)
}

pub fn cumfit_cmd(ctx: &Context, relation: &str) -> Result<ReportBundle> {
    let rel = ctx.relation(relation)?;
    let name = &rel.name;
    let w = rel.cfg.window();
    let mut b = ReportBundle::default();
    b.note(LAG_NOTE);
    let fits = cumulative_fits(ctx, &rel)?;
    let mut sets: Vec<(String, Option<PredictorCoeffs>)> =
        fits.iter().map(|(l, f)| (l.clone(), Some(f.coefficients))).collect();
    sets.push(("Preset".into(), Some(rel.cfg.coeffs())));
    let lr = regression_coeffs(&rel, w).map_err(|e| b.diagnose(format!("relation `{name}`, regression: {e}"))).ok();
    sets.push(("Linear regression".into(), lr));
    for lag in 1..=4 {
        let c = vecm_coeffs(&rel, lag, w).map_err(|e| b.diagnose(format!("relation `{name}`, VECM lag {lag}: {e}"))).ok();
        sets.push((format!("VECM lag {lag}"), c));
    }
    let rows = table8_compare(rel.target, rel.ue, rel.rate, &sets, w)?;
    let mut t = Table::new(
        format!("table8_{name}"),
        "Regression standard errors and RMS differences, dynamic and cumulative",
        &[
            "label", "a0", "a1", "a2", "t0", "t1", "dynamic_sterr", "dynamic_rmsd", "cumulative_sterr", "cumulative_rmsd",
            "note",
        ],
        "integral::table8_compare",
        json!({
            "relation": rel.params(), "window": [w.start, w.end],
            "search": rel.cfg.search.as_ref().unwrap_or(&ctx.config.search),
            "grid_points": crate::integral::GRID_POINTS, "grid_refinements": crate::integral::GRID_REFINEMENTS,
            "polish_tol": crate::integral::POLISH_TOL, "vecm": { "rank": 1, "deterministic": VECM_DET.label() },
        }),
    );
    for r in &rows {
        let c = r.coefficients;
        t.push(vec![
            r.label.as_str().into(),
            Cell::opt(c.map(|c| c.a0)),
            Cell::opt(c.map(|c| c.a1)),
            Cell::opt(c.map(|c| c.a2)),
            c.map_or(Cell::Empty, |c| (c.t0 as usize).into()),
            c.map_or(Cell::Empty, |c| (c.t1 as usize).into()),
            Cell::opt(r.dynamic_sterr),
            Cell::opt(r.dynamic_rmsd),
            Cell::opt(r.cumulative_sterr),
            Cell::opt(r.cumulative_rmsd),
            if c.is_none() { "unavailable".into() } else { Cell::Empty },
        ]);
    }
    b.tables.push(t);

    let free = rows[0].cumulative_rmsd.unwrap_or(f64::INFINITY);
    for r in rows.iter().filter(|r| !r.label.starts_with("Cumulative")) {
        if let Some(v) = r.cumulative_rmsd.filter(|v| *v < free - 1e-12) {
            b.diagnose(format!(
                "relation `{name}`: {} has cumulative RMSD {} below the cumulative fit's {}; its coefficients lie outside the search box",
                r.label,
                super::format_num(v),
                super::format_num(free)
            ));
        }
    }

    let mut measured_done = false;
    let mut growth = Table::new(
        format!("cumfit_{name}_error_growth"),
        "Growth of cumulative residuals",
        &["coefficients", "n", "growth_ratio", "iid_reference"],
        "integral::cumulative_error_decomposition",
        json!({ "relation": rel.params(), "window": [w.start, w.end], "statistic": "mean square of the second half over the first half" }),
    );
    for (label, c) in &sets {
        let keep = label == "Cumulative" || label == "Linear regression" || label == "VECM lag 4" || label == "Preset";
        let Some(c) = c.filter(|_| keep) else { continue };
        let [m, p, cm, cp] = curves(rel.target, rel.ue, rel.rate, &c, w)?;
        let stem = super::file_stem(&label.to_lowercase());
        if !measured_done {
            b.figures.push(figure(format!("{name}_dyn_measured"), "measured, dynamic", &m));
            b.figures.push(figure(format!("{name}_cum_measured"), "measured, cumulative", &cm));
            measured_done = true;
        }
        b.figures.push(figure(format!("{name}_dyn_{stem}"), format!("predicted with {label} coefficients"), &p));
        b.figures.push(figure(format!("{name}_cum_{stem}"), format!("cumulative prediction, {label} coefficients"), &cp));
        let dec = cumulative_error_decomposition(&m, &p)?;
        if label == "Cumulative" || label == "Linear regression" {
            b.figures.push(figure(format!("{name}_residual_dynamic_{stem}"), "dynamic residual", &dec.dynamic));
            b.figures.push(figure(format!("{name}_residual_cumulative_{stem}"), "cumulative residual", &dec.cumulative));
        }
        growth.push(vec![label.as_str().into(), dec.dynamic.len().into(), Cell::opt(dec.growth_ratio), 3.0.into()]);
    }
    b.tables.push(growth);
    Ok(b)
}

// ---------------------------------------------------------------- calibrate

/// Null process for size runs: random walks for unit-root and cointegration
/// tests, white noise for residual diagnostics.
pub fn default_process(test: &CalibTest) -> Process {
    match test {
        CalibTest::Adf { .. } | CalibTest::DfGls { .. } => Process::RandomWalk { sd: 1.0 },
        CalibTest::Johansen { .. } | CalibTest::EngleGranger { .. } => Process::IndependentRandomWalks { k: 2, sd: 1.0 },
        CalibTest::BreuschGodfrey { .. } | CalibTest::JarqueBera | CalibTest::ArchLm { .. } => Process::WhiteNoise { sd: 1.0 },
    }
}

pub fn parse_process(name: &str) -> Result<Process> {
    Ok(match name {
        "random-walk" => Process::RandomWalk { sd: 1.0 },
        "white-noise" => Process::WhiteNoise { sd: 1.0 },
        "ar1" => Process::Ar1 { phi: 0.5, sd: 1.0 },
        "arch1" => Process::Arch1 { omega: 1.0, alpha: 0.7 },
        "trend" => Process::TrendPlusNoise { slope: 0.1, sd: 1.0 },
        "triangular" => Process::TriangularCointegrated { beta: 2.0, noise_sd: 1.0 },
        "independent-walks" => Process::IndependentRandomWalks { k: 2, sd: 1.0 },
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown process `{other}`; expected random-walk, white-noise, ar1, arch1, trend, triangular or independent-walks"
            )))
        }
    })
}

pub const CALIBRATION_COLUMNS: [&str; 12] = [
    "test", "process", "length", "seed", "reps", "level", "rejections", "failures", "rate", "band_lo", "band_hi",
    "level_in_band",
];

pub fn calibrate_cmd(test: &str, process: Option<Process>, reps: usize, length: usize, level: f64, seed: u64) -> Result<ReportBundle> {
    let mut b = ReportBundle::default();
    let t = calibration_table(&[(test.to_string(), process)], reps, length, level, seed)?;
    b.tables.push(t);
    Ok(b)
}

fn calibration_table(runs: &[(String, Option<Process>)], reps: usize, length: usize, level: f64, seed: u64) -> Result<Table> {
    let mut t = Table::new(
        "calibration",
        "Monte Carlo rejection rates with 95% Wilson bands",
        &CALIBRATION_COLUMNS,
        "sim::calibration_suite",
        json!({ "runs": runs.iter().map(|(n, p)| json!({ "test": n, "process": p })).collect::<Vec<_>>(),
                "reps": reps, "length": length, "level": level, "seed": seed, "rng": "ChaCha8, stream i for replicate i" }),
    );
    for (name, process) in runs {
        let test: CalibTest = name.parse()?;
        let process = process.clone().unwrap_or_else(|| default_process(&test));
        let spec = SimSpec::new(process, length, seed);
        let r = calibration_suite(test, &spec, level, reps)?;
        let proc_json = serde_json::to_string(&spec.process).expect("process serializes");
        t.push(vec![
            name.as_str().into(),
            proc_json.into(),
            length.into(),
            Cell::Text(seed.to_string()),
            reps.into(),
            level.into(),
            r.rejections.into(),
            r.failures.into(),
            r.rate.into(),
            r.band.0.into(),
            r.band.1.into(),
            if r.nominal_in_band { "yes" } else { "no" }.into(),
        ]);
    }
    Ok(t)
}

// --------------------------------------------------------------- report-all

/// Every table and figure for every configured relation, the calibration
/// runs from the configuration and, for France-shaped data, the reference
/// checks.
pub fn report_all(ctx: &Context) -> Result<ReportBundle> {
    let mut b = descstats(ctx)?;
    b.extend(unitroot(ctx, &[])?);
    for name in ctx.config.relations.keys() {
        let rel = ctx.relation(name)?;
        let k = 1 + rel.inputs().len();
        let ranks: Vec<usize> = (1..k).collect();
        for step in [
            engle_granger_cmd(ctx, name),
            johansen_cmd(ctx, name, &JohansenDet::ALL, 1..=4),
            vecm_cmd(ctx, name, &ranks, 1..=4),
            cumfit_cmd(ctx, name),
        ] {
            match step {
                Ok(part) => b.extend(part),
                Err(e) if e.exit_code() == 2 => b.diagnose(format!("relation `{name}`: {e}")),
                Err(e) => return Err(e),
            }
        }
    }
    let cal = &ctx.config.calibration;
    if !cal.tests.is_empty() {
        let runs: Vec<(String, Option<Process>)> = cal.tests.iter().map(|t| (t.clone(), None)).collect();
        b.tables.push(calibration_table(&runs, cal.reps, cal.length, 0.05, ctx.seed)?);
    }
    if reference::applies(&ctx.dataset) {
        let checks = reference::france_checks(ctx);
        for c in checks.iter().filter(|c| !c.within()) {
            b.diagnose(c.diagnostic());
        }
        b.tables.push(reference::checks_table(&checks));
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Context {
        Context::bundled().unwrap()
    }

    #[test]
    fn descstats_layout() {
        let b = descstats(&ctx()).unwrap();
        let t = b.table("table1_descriptive").unwrap();
        assert_eq!(t.columns.len(), 9);
        assert_eq!(t.rows.len(), 7);
        assert!(b.figures.iter().any(|f| f.name == "fig01b_dUE"));
    }

    #[test]
    fn synthetic_descstats_and_empty() {
        let c = Context::from_text("year,A\n2000,0.1\n2001,0.2\n2002,0.15\n", "t", &Schema::default(), Config::bundled(), None)
            .unwrap();
        let t = descstats(&c).unwrap();
        assert_eq!(t.tables[0].columns, vec!["statistic", "A", "dA"]);
        assert!(Context::from_text("year\n", "t", &Schema::default(), Config::bundled(), None).is_err());
    }

    #[test]
    fn short_series_gives_partial_table() {
        let c = Context::from_text(
            "year,X\n2000,0.1\n2001,0.2\n2002,0.15\n2003,0.1\n2004,0.12\n2005,0.11\n2006,0.13\n2007,0.1\n2008,0.2\n2009,0.1\n2010,0.14\n2011,0.16\n2012,0.1\n",
            "t",
            &Schema::default(),
            Config::bundled(),
            None,
        )
        .unwrap();
        let b = unitroot(&c, &["X".into()]).unwrap();
        let t = &b.tables[0];
        let note = t.column("note").unwrap();
        assert!(t.rows.iter().any(|r| matches!(&r[note], Cell::Text(s) if s.contains("too short") || s.contains("insufficient"))));
        assert!(!b.diagnostics.is_empty());
    }

    #[test]
    fn trend_rows_on_differences_are_flagged() {
        let b = unitroot(&ctx(), &[]).unwrap();
        let t = b.table("table3_unitroot_differences").unwrap();
        let (det, note) = (t.column("deterministic").unwrap(), t.column("note").unwrap());
        for r in &t.rows {
            let flagged = matches!(&r[note], Cell::Text(s) if s.contains(TREND_ON_DIFFERENCE));
            assert_eq!(flagged, r[det] == Cell::text("trend"));
        }
    }

    #[test]
    fn vecm_rank_bounds() {
        assert!(vecm_cmd(&ctx(), "ue", &[2], 1..=1).is_err());
        assert!(vecm_cmd(&ctx(), "ue", &[0], 1..=1).is_err());
    }

    #[test]
    fn unknown_relation_is_an_input_error() {
        let e = cumfit_cmd(&ctx(), "nope").unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
