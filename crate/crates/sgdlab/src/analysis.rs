//! Turn risk curves into verdicts: log-log rate slopes, bound-dominance
//! reports and linear-regime transition detection.

use crate::bounds::Theorem;
use crate::curve::{RiskCurve, Series};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 3 positive checkpoints in the window, found {0}")]
    InsufficientPoints(usize),
    #[error("nonpositive value {0} inside the fit window at t = {1}")]
    NonPositiveValue(f64, u64),
    #[error("curves have different checkpoint grids")]
    GridMismatch,
    #[error("curve series {0:?} is not a theorem bound")]
    NotABound(Series),
    #[error("fit window is empty: t_lo {0} >= t_hi {1}")]
    EmptyWindow(u64, u64),
}

/// Ordinary least-squares fit of `ln(value)` on `ln(t)`.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard OLS slope standard error.
    pub stderr: f64,
    pub window: (u64, u64),
    pub n_points: usize,
}

/// OLS slope of `ln(value)` against `ln(t)` over checkpoints in
/// `[t_lo, t_hi]`. Nonpositive values inside the window are an error.
pub fn fit_loglog_slope(
    curve: &RiskCurve,
    t_lo: u64,
    t_hi: u64,
) -> Result<SlopeFit, AnalysisError> {
    if t_lo >= t_hi {
        return Err(AnalysisError::EmptyWindow(t_lo, t_hi));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in curve.checkpoints.iter().zip(&curve.values) {
        if t < t_lo || t > t_hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(AnalysisError::NonPositiveValue(v, t));
        }
        xs.push((t as f64).ln());
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(AnalysisError::InsufficientPoints(n));
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|&x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(&x, &y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit { slope, intercept, stderr, window: (t_lo, t_hi), n_points: n })
}

/// Outcome of checking a theorem bound curve against an observed risk curve.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    #[serde(skip)]
    pub theorem: Theorem,
    pub gamma: f64,
    pub certified: bool,
    /// Minimum over checkpoints of `bound − risk`.
    pub min_margin: f64,
    /// First checkpoint where the bound is violated, if any.
    pub violating_t: Option<u64>,
}

/// Compare risk against a theorem bound on the same checkpoint grid.
pub fn dominance_report(
    risk_curve: &RiskCurve,
    bound_curve: &RiskCurve,
    gamma: f64,
    certified: bool,
) -> Result<BoundReport, AnalysisError> {
    let theorem = match bound_curve.series {
        Series::BoundThm1 => Theorem::Thm1,
        Series::BoundThm2 => Theorem::Thm2,
        Series::BoundThm3 => Theorem::Thm3,
        other => return Err(AnalysisError::NotABound(other)),
    };
    if risk_curve.checkpoints != bound_curve.checkpoints {
        return Err(AnalysisError::GridMismatch);
    }
    let mut min_margin = f64::INFINITY;
    let mut violating_t = None;
    for ((&t, &r), &b) in risk_curve
        .checkpoints
        .iter()
        .zip(&risk_curve.values)
        .zip(&bound_curve.values)
    {
        let margin = b - r;
        if margin < min_margin {
            min_margin = margin;
        }
        if margin < 0.0 && violating_t.is_none() {
            violating_t = Some(t);
        }
    }
    Ok(BoundReport { theorem, gamma, certified, min_margin, violating_t })
}

/// Predicted and (optionally) detected time scale of the transition from
/// polynomial decay to the finite-dimensional linear regime.
///
/// The prediction is `τ = 1/(γ λ_min)`. Detection slides a log-log slope
/// over dyadic windows and fires at the first window whose local slope
/// falls below the global power-law slope minus 1.0; it is attempted only
/// when the curve extends past `5τ`. Detection is an order-of-magnitude
/// heuristic and never gates the acceptance checks.
pub fn linear_regime_transition(
    curve: &RiskCurve,
    gamma: f64,
    lambda_min: f64,
) -> (f64, Option<f64>) {
    let tau_predicted = 1.0 / (gamma * lambda_min);
    let t_end = match curve.checkpoints.last() {
        Some(&t) => t,
        None => return (tau_predicted, None),
    };
    if (t_end as f64) < 5.0 * tau_predicted {
        return (tau_predicted, None);
    }
    // Power-law slope from the pre-transition window [10, τ]. Fitting over
    // the whole curve instead would mix in the post-transition collapse and
    // drag the reference slope far below the polynomial rate.
    let power_law_end = (tau_predicted as u64).max(11).min(t_end);
    let global = match fit_loglog_slope(curve, 10, power_law_end)
        .or_else(|_| fit_loglog_slope(curve, 10, t_end))
    {
        Ok(fit) => fit.slope,
        Err(_) => return (tau_predicted, None),
    };
    let threshold = global - 1.0;
    // Dyadic windows [2^j, 2^{j+2}]: two octaves so log-spaced grids keep
    // enough points per window.
    let mut lo = 8_u64;
    while lo * 4 <= t_end {
        let hi = lo * 4;
        if let Ok(fit) = fit_loglog_slope(curve, lo, hi) {
            if fit.slope < threshold {
                let mid = ((lo as f64) * (hi as f64)).sqrt();
                return (tau_predicted, Some(mid));
            }
        }
        lo *= 2;
    }
    (tau_predicted, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{log_checkpoints, RiskCurve, Series};

    fn power_curve(p: f64, t_max: u64) -> RiskCurve {
        let cps = log_checkpoints(t_max, 64);
        let values = cps.iter().map(|&t| 2.5 * (t as f64).powf(-p)).collect();
        RiskCurve::new(Series::Exact, cps, values, None, 0).unwrap()
    }

    #[test]
    fn slope_recovers_exact_power_laws() {
        for p in [1.0, 1.75] {
            let curve = power_curve(p, 100_000);
            let fit = fit_loglog_slope(&curve, 1, 100_000).unwrap();
            assert!((fit.slope + p).abs() < 1e-9, "slope {}", fit.slope);
            assert!(fit.stderr <= 1e-9);
        }
    }

    #[test]
    fn slope_needs_three_positive_points() {
        let curve = RiskCurve::new(
            Series::Exact,
            vec![1, 10, 100, 1000],
            vec![1.0, 0.1, 0.01, 0.001],
            None,
            0,
        )
        .unwrap();
        assert!(fit_loglog_slope(&curve, 1, 5).is_err());
        assert!(fit_loglog_slope(&curve, 500, 200).is_err());
    }

    #[test]
    fn slope_rejects_nonpositive_values_in_window() {
        let curve = RiskCurve::new(
            Series::Exact,
            vec![1, 10, 100, 1000],
            vec![1.0, 0.1, 0.0, 0.001],
            None,
            0,
        )
        .unwrap();
        assert!(matches!(
            fit_loglog_slope(&curve, 1, 1000),
            Err(AnalysisError::NonPositiveValue(_, 100))
        ));
    }

    #[test]
    fn dominance_zero_margin_when_equal() {
        let curve = power_curve(1.0, 1000);
        let bound = RiskCurve::new(
            Series::BoundThm1,
            curve.checkpoints.clone(),
            curve.values.clone(),
            None,
            0,
        )
        .unwrap();
        let report = dominance_report(&curve, &bound, 0.1, true).unwrap();
        assert_eq!(report.min_margin, 0.0);
        assert!(report.violating_t.is_none());
    }

    #[test]
    fn dominance_flags_first_violation() {
        let risk = RiskCurve::new(
            Series::Exact,
            vec![1, 2, 3],
            vec![1.0, 1.0, 1.0],
            None,
            0,
        )
        .unwrap();
        let bound = RiskCurve::new(
            Series::BoundThm2,
            vec![1, 2, 3],
            vec![2.0, 0.5, 0.25],
            None,
            0,
        )
        .unwrap();
        let report = dominance_report(&risk, &bound, 0.1, false).unwrap();
        assert_eq!(report.violating_t, Some(2));
        assert!((report.min_margin + 0.75).abs() < 1e-15);
        assert!(!report.certified);
    }

    #[test]
    fn dominance_antisymmetry() {
        let a = power_curve(1.0, 1000);
        let b = RiskCurve::new(
            Series::BoundThm3,
            a.checkpoints.clone(),
            a.values.iter().map(|v| v * 1.3).collect(),
            None,
            0,
        )
        .unwrap();
        let fwd = dominance_report(&a, &b, 0.1, true).unwrap();
        // Swapping roles: margin(a,b) = -max over checkpoints of (b - a)
        // violation magnitude of the reversed comparison.
        let a_as_bound = RiskCurve::new(
            Series::BoundThm3,
            a.checkpoints.clone(),
            a.values.clone(),
            None,
            0,
        )
        .unwrap();
        let b_as_risk = RiskCurve::new(
            Series::Exact,
            b.checkpoints.clone(),
            b.values.clone(),
            None,
            0,
        )
        .unwrap();
        let rev = dominance_report(&b_as_risk, &a_as_bound, 0.1, true).unwrap();
        let max_excess = b
            .values
            .iter()
            .zip(&a.values)
            .map(|(&bv, &av)| bv - av)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((rev.min_margin + max_excess).abs() < 1e-12);
        assert!(fwd.min_margin >= 0.0);
    }

    #[test]
    fn dominance_requires_matching_grids() {
        let a = power_curve(1.0, 1000);
        let bound = RiskCurve::new(Series::BoundThm1, vec![1, 2], vec![1.0, 1.0], None, 0)
            .unwrap();
        assert!(dominance_report(&a, &bound, 0.1, true).is_err());
    }

    #[test]
    fn tau_prediction_formula_and_scaling() {
        let curve = power_curve(1.0, 100);
        let (tau, _) = linear_regime_transition(&curve, 0.1, 0.01);
        assert!((tau - 1000.0).abs() < 1e-9);
        let (tau_scaled, _) = linear_regime_transition(&curve, 0.1 * 3.0, 0.01 / 3.0);
        assert!((tau_scaled - tau).abs() < 1e-9);
    }

    #[test]
    fn pure_power_law_has_no_detected_transition() {
        let curve = power_curve(1.0, 1_000_000);
        let (_, detected) = linear_regime_transition(&curve, 1.0, 1.0);
        assert!(detected.is_none());
    }

    #[test]
    fn geometric_tail_is_detected() {
        // Power law until tau = 1000, then geometric decay.
        let cps = log_checkpoints(100_000, 96);
        let values: Vec<f64> = cps
            .iter()
            .map(|&t| {
                let tf = t as f64;
                if tf <= 1000.0 {
                    1.0 / tf
                } else {
                    (1.0 / 1000.0) * (-(tf - 1000.0) / 1000.0).exp()
                }
            })
            .collect();
        let curve = RiskCurve::new(Series::Exact, cps, values, None, 0).unwrap();
        let (tau, detected) = linear_regime_transition(&curve, 1.0, 1e-3);
        assert!((tau - 1000.0).abs() < 1e-9);
        let detected = detected.expect("transition should be detected");
        assert!(detected >= tau / 10.0 && detected <= tau * 10.0, "{detected}");
    }
}
