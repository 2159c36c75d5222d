//! Published France figures with revision tolerances. A miss does not fail a
//! run; it becomes a data-provenance diagnostic.

use serde::Serialize;
use serde_json::json;

use super::commands::Context;
use super::{Cell, Table};
use crate::critical::{Deterministic, JohansenDet};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::johansen::{johansen_trace, vecm_estimate};
use crate::regression::ols;
use crate::unit_root::{adf_test, UnitRootSpec};

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceCheck {
    pub item: String,
    pub reference: f64,
    pub tolerance: f64,
    pub observed: Option<f64>,
    pub error: Option<String>,
}

impl ReferenceCheck {
    fn new(item: impl Into<String>, reference: f64, tolerance: f64, observed: Result<f64>) -> Self {
        let (observed, error) = match observed {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self { item: item.into(), reference, tolerance, observed, error }
    }

    pub fn within(&self) -> bool {
        self.observed.is_some_and(|v| (v - self.reference).abs() <= self.tolerance + 1e-12)
    }

    pub fn diagnostic(&self) -> String {
        match (&self.observed, &self.error) {
            (Some(v), _) => format!(
                "data provenance: {} = {} against published {} \u{b1} {}; the bundled series are a reconstruction from revised sources",
                self.item,
                super::format_num(*v),
                super::format_num(self.reference),
                super::format_num(self.tolerance)
            ),
            (None, e) => format!("data provenance: {} could not be computed: {}", self.item, e.as_deref().unwrap_or("unknown")),
        }
    }
}

/// Datasets with the four France columns get the reference checks.
pub fn applies(ds: &Dataset) -> bool {
    ["GDPD", "CPI", "UE", "LF"].iter().all(|n| ds.get(n).is_some())
}

/// Published descriptive statistics: (series, [mean, stdev, skewness,
/// kurtosis]) as `(value, unit of the last printed digit)`.
pub const TABLE1: [(&str, [(f64, f64); 4]); 8] = [
    ("GDPD", [(5.3e-2, 1e-3), (4.2e-2, 1e-3), (4.6e-1, 1e-2), (1.6, 1e-1)]),
    ("CPI", [(5.3e-2, 1e-3), (4.0e-2, 1e-3), (9.9e-1, 1e-2), (2.8, 1e-1)]),
    ("dLF/LF", [(6.6e-3, 1e-4), (4.1e-3, 1e-4), (-1.8e-1, 1e-2), (2.8, 1e-1)]),
    ("UE", [(6.4e-2, 1e-3), (4.0e-2, 1e-3), (-1.2e-2, 1e-3), (1.4, 1e-1)]),
    ("dGDPD", [(-1.4e-3, 1e-4), (1.2e-2, 1e-3), (3.1e-1, 1e-2), (3.6, 1e-1)]),
    ("dCPI", [(4.9e-5, 1e-6), (2.7e-2, 1e-3), (1.2, 1e-1), (12.0, 1.0)]),
    ("d(dLF/LF)", [(-5.7e-5, 1e-6), (4.3e-3, 1e-4), (1.6e-1, 1e-2), (2.3, 1e-1)]),
    ("dUE", [(1.9e-3, 1e-4), (5.7e-3, 1e-4), (-9.7e-1, 1e-2), (5.1, 1e-1)]),
];

const STAT_NAMES: [&str; 4] = ["mean", "stdev", "skewness", "kurtosis"];

pub fn france_checks(ctx: &Context) -> Vec<ReferenceCheck> {
    let ds = &ctx.dataset;
    let mut out = Vec::new();
    for (name, stats) in TABLE1 {
        let d = ds.require(name).and_then(|s| s.describe());
        for (i, (value, unit)) in stats.iter().enumerate() {
            let obs = d.as_ref().map_err(clone_err).map(|d| match i {
                0 => d.mean,
                1 => d.stdev,
                2 => d.skewness.unwrap_or(f64::NAN),
                _ => d.kurtosis.unwrap_or(f64::NAN),
            });
            out.push(ReferenceCheck::new(format!("descriptive {} {name}", STAT_NAMES[i]), *value, 2.0 * unit, obs));
        }
    }

    let rel3 = ctx.relation("trivariate").and_then(|rel| {
        let w = rel.cfg.window();
        let y = rel.target.window(w.start, w.end)?;
        ols(&y, &[&rel.predictor()?], true)
    });
    out.push(ReferenceCheck::new(
        "trivariate regression R-squared",
        0.88,
        0.05,
        rel3.as_ref().map(|f| f.r_squared).map_err(clone_err),
    ));
    out.push(ReferenceCheck::new(
        "trivariate regression residual stdev",
        0.014,
        0.003,
        rel3.as_ref().map(|f| f.rmse).map_err(clone_err),
    ));

    out.push(ReferenceCheck::new(
        "ADF constant lag 0 on dLF/LF",
        -4.09,
        0.3,
        ds.require("dLF/LF")
            .and_then(|s| adf_test(s, UnitRootSpec::new(Deterministic::Constant, 0)))
            .map(|r| r.statistic),
    ));

    let rank = ctx.relation("trivariate").and_then(|rel| {
        let mut ys = vec![rel.target.clone()];
        ys.extend(rel.inputs());
        let refs: Vec<_> = ys.iter().collect();
        johansen_trace(&refs, 2, JohansenDet::Constant, rel.cfg.window()).map(|j| j.selected_rank as f64)
    });
    out.push(ReferenceCheck::new("trivariate Johansen rank, constant, lag 2", 1.0, 0.0, rank));

    let ue = ctx.relation("ue").and_then(|rel| {
        let ys = [rel.target.clone(), rel.rate.clone()];
        let refs: Vec<_> = ys.iter().collect();
        let m = vecm_estimate(&refs, 2, 1, JohansenDet::Constant, rel.cfg.window())?;
        let imp = m.implied_relations().remove(0);
        Ok((imp.slopes[0].1, imp.intercept.unwrap_or(f64::NAN)))
    });
    out.push(ReferenceCheck::new("UE on dLF/LF VECM lag 2 slope", -11.97, 1.5, ue.as_ref().map(|v| v.0).map_err(clone_err)));
    out.push(ReferenceCheck::new("UE on dLF/LF VECM lag 2 intercept", 0.157, 0.01, ue.as_ref().map(|v| v.1).map_err(clone_err)));
    out
}

fn clone_err(e: &crate::Error) -> crate::Error {
    crate::Error::InvalidArgument(e.to_string())
}

pub fn checks_table(checks: &[ReferenceCheck]) -> Table {
    let mut t = Table::new(
        "reference_checks",
        "Bundled data against published values",
        &["item", "published", "tolerance", "observed", "within"],
        "report::reference::france_checks",
        json!({ "descriptive_tolerance": "2 units of the last published digit" }),
    );
    for c in checks {
        t.push(vec![
            c.item.as_str().into(),
            c.reference.into(),
            c.tolerance.into(),
            Cell::opt(c.observed),
            if c.within() { "yes" } else { "no" }.into(),
        ]);
    }
    t
}
