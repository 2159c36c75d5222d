//! Tail probabilities for the reference distributions used by the tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, StudentsT};

/// `P(X > x)` for `X ~ chi2(df)`.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if !x.is_finite() {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    if x <= 0.0 {
        return 1.0;
    }
    clamp01(ChiSquared::new(df).expect("chi2 df > 0").sf(x))
}

/// `P(X > x)` for `X ~ F(d1, d2)`.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    if !x.is_finite() {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    if x <= 0.0 {
        return 1.0;
    }
    clamp01(FisherSnedecor::new(d1, d2).expect("F df > 0").sf(x))
}

/// Two-sided p-value of a t statistic.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let d = StudentsT::new(0.0, 1.0, df).expect("t df > 0");
    clamp01(2.0 * d.sf(t.abs()))
}

fn clamp01(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // chi2(1) 95% quantile 3.841458820694124; chi2(2) sf(x) = exp(-x/2).
        assert!((chi2_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-10);
        for x in [0.1, 1.0, 5.0, 20.0] {
            assert!((chi2_sf(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-12);
        }
        // F(1, d) = t(d)^2.
        let t = 2.3;
        assert!((f_sf(t * t, 1.0, 17.0) - t_two_sided(t, 17.0)).abs() < 1e-10);
        assert_eq!(chi2_sf(0.0, 3.0), 1.0);
        assert_eq!(chi2_sf(f64::INFINITY, 3.0), 0.0);
    }
}
