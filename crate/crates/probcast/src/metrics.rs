//! Scoring rules and forecast-comparison tests.
//!
//! Quantile forecasts are scored with the pinball loss; central prediction
//! intervals with the pinball-interval score (PIPS), average coverage error
//! (ACE) and a tail balance statistic; full predictive distributions with a
//! discretized CRPS (mean pinball loss over the percentile grid). Two
//! methods' loss series are compared with a conditional predictive ability
//! test: a Wald statistic on instrumented one-step loss differentials,
//! asymptotically chi-squared.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::domain::{interval_from_curve, tau_at, DomainError, PredictionInterval, QuantileCurve, GRID_LEN};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("loss series differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("empty evaluation set")]
    Empty,
    #[error("non-finite loss at position {0}")]
    NonFiniteLoss(usize),
}

/// Pinball (quantile) loss of forecast `q_hat` at level `tau` against the
/// realized `p`. Always nonnegative; zero iff the forecast hits `p` exactly.
#[inline]
pub fn pinball(tau: f64, q_hat: f64, p: f64) -> f64 {
    let indicator = if p < q_hat { 1.0 } else { 0.0 };
    (indicator - tau) * (q_hat - p)
}

/// Pinball interval score of a central `1 - alpha` interval: the average of
/// the pinball losses of its two bounds at levels `alpha/2` and `1 - alpha/2`.
pub fn pips_from_interval(interval: &PredictionInterval, p: f64) -> f64 {
    let alpha = 1.0 - interval.nominal_level;
    0.5 * pinball(alpha / 2.0, interval.lower, p)
        + 0.5 * pinball(1.0 - alpha / 2.0, interval.upper, p)
}

/// [`pips_from_interval`] reading the interval off a quantile curve;
/// `alpha/2` must land on the percentile grid.
pub fn pips(curve: &QuantileCurve, alpha: f64, p: f64) -> Result<f64, MetricsError> {
    Ok(pips_from_interval(&interval_from_curve(curve, alpha)?, p))
}

/// True when `p` falls inside the interval, bounds inclusive.
#[inline]
pub fn covers(interval: &PredictionInterval, p: f64) -> bool {
    interval.lower <= p && p <= interval.upper
}

/// Average coverage error: empirical coverage minus the nominal level.
/// Positive means the intervals are conservative (too wide).
pub fn ace(intervals: &[PredictionInterval], observed: &[f64]) -> Result<f64, MetricsError> {
    if intervals.len() != observed.len() {
        return Err(MetricsError::LengthMismatch { a: intervals.len(), b: observed.len() });
    }
    if intervals.is_empty() {
        return Err(MetricsError::Empty);
    }
    let nominal = intervals[0].nominal_level;
    let hits = intervals.iter().zip(observed).filter(|(i, p)| covers(i, **p)).count();
    Ok(hits as f64 / intervals.len() as f64 - nominal)
}

/// Tail balance: (exceedances above - exceedances below) / total points.
/// Zero means misses are split evenly between the two tails.
pub fn tail_bias(intervals: &[PredictionInterval], observed: &[f64]) -> Result<f64, MetricsError> {
    if intervals.len() != observed.len() {
        return Err(MetricsError::LengthMismatch { a: intervals.len(), b: observed.len() });
    }
    if intervals.is_empty() {
        return Err(MetricsError::Empty);
    }
    let above = intervals.iter().zip(observed).filter(|(i, p)| **p > i.upper).count() as f64;
    let below = intervals.iter().zip(observed).filter(|(i, p)| **p < i.lower).count() as f64;
    Ok((above - below) / intervals.len() as f64)
}

/// Discretized continuous ranked probability score: the mean pinball loss of
/// the 99 grid quantiles. Proportional to the exact CRPS of the piecewise
/// distribution up to the grid discretization.
pub fn crps(curve: &QuantileCurve, p: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..GRID_LEN {
        total += pinball(tau_at(i), curve.value_at(i), p);
    }
    total / GRID_LEN as f64
}

/// Outcome of the conditional predictive ability comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpaResult {
    /// Wald statistic of the instrumented loss differentials.
    pub statistic: f64,
    /// Asymptotic p-value from the chi-squared reference distribution.
    pub p_value: f64,
    /// Degrees of freedom (number of instruments).
    pub dof: usize,
}

/// Conditional predictive ability test between two aligned loss series.
///
/// With loss differentials `d_t = loss_a_t - loss_b_t`, the test regresses the
/// one-step-ahead differential on the instruments `h_t = (1, d_t)` and rejects
/// equal conditional predictive ability when the instrumented means
/// `Z_t = h_t * d_{t+1}` are jointly far from zero:
///
/// ```text
///   statistic = n * Zbar' * Omega^-1 * Zbar,   Omega = (1/n) sum Z_t Z_t',
/// ```
///
/// asymptotically chi-squared with 2 degrees of freedom under the null. A
/// singular `Omega` (for instance identical series) yields statistic 0 and
/// p-value 1: no evidence of a difference.
pub fn cpa_test(loss_a: &[f64], loss_b: &[f64]) -> Result<CpaResult, MetricsError> {
    if loss_a.len() != loss_b.len() {
        return Err(MetricsError::LengthMismatch { a: loss_a.len(), b: loss_b.len() });
    }
    if loss_a.len() < 2 {
        return Err(MetricsError::TooShort { need: 2, got: loss_a.len() });
    }
    for (i, (a, b)) in loss_a.iter().zip(loss_b).enumerate() {
        if !(a.is_finite() && b.is_finite()) {
            return Err(MetricsError::NonFiniteLoss(i));
        }
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let n = d.len() - 1;
    let (mut z0, mut z1) = (0.0, 0.0);
    let (mut o00, mut o01, mut o11) = (0.0, 0.0, 0.0);
    for t in 0..n {
        let a = d[t + 1]; // instrument 1 * next differential
        let b = d[t] * d[t + 1]; // instrument d_t * next differential
        z0 += a;
        z1 += b;
        o00 += a * a;
        o01 += a * b;
        o11 += b * b;
    }
    let nf = n as f64;
    z0 /= nf;
    z1 /= nf;
    o00 /= nf;
    o01 /= nf;
    o11 /= nf;
    let det = o00 * o11 - o01 * o01;
    let scale = o00.max(o11).max(1e-300);
    let degenerate = det <= 1e-12 * scale * scale;
    let (statistic, p_value) = if degenerate {
        (0.0, 1.0)
    } else {
        // Quadratic form with the explicit 2x2 inverse.
        let q = (o11 * z0 * z0 - 2.0 * o01 * z0 * z1 + o00 * z1 * z1) / det;
        let statistic = (nf * q).max(0.0);
        let chi2 = ChiSquared::new(2.0).expect("valid dof");
        (statistic, 1.0 - chi2.cdf(statistic))
    };
    Ok(CpaResult { statistic, p_value, dof: 2 })
}

/// Interval diagnostics at one nominal level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScores {
    pub nominal_level: f64,
    pub ace: f64,
    pub tail_bias: f64,
    pub mean_pips: f64,
    /// p-value of [`cpa_test`] on the PIPS series against the reference
    /// method; absent when the method is the reference or no reference ran.
    pub cpa_p_value: Option<f64>,
}

/// Yearly CRPS breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearCrps {
    pub year: i32,
    pub points: usize,
    pub mean_crps: f64,
    pub cpa_p_value: Option<f64>,
}

/// Full evaluation of one method over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub method: String,
    /// Reference method for the CPA columns, when one applies.
    pub reference: Option<String>,
    /// Number of (day, hour) points evaluated.
    pub points: usize,
    pub levels: Vec<LevelScores>,
    pub mean_crps: f64,
    pub crps_cpa_p_value: Option<f64>,
    pub per_year: Vec<YearCrps>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::sort_fix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_curve() -> QuantileCurve {
        // curve(tau) = 100 tau, i.e. values 1..=99.
        let raw: Vec<f64> = (1..=99).map(f64::from).collect();
        sort_fix(&raw).unwrap()
    }

    #[test]
    fn pinball_basic_values() {
        // Under-prediction at a low level is cheap...
        assert!((pinball(0.05, 10.0, 12.0) - 0.1).abs() < 1e-12);
        // ...the same miss at a high level is expensive.
        assert!((pinball(0.95, 10.0, 12.0) - 1.9).abs() < 1e-12);
        // Over-prediction mirrors the weights.
        assert!((pinball(0.05, 12.0, 10.0) - 1.9).abs() < 1e-12);
        assert_eq!(pinball(0.37, 8.0, 8.0), 0.0);
    }

    #[test]
    fn pinball_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let tau = rng.gen_range(0.001..0.999);
            let q = rng.gen_range(-100.0..100.0);
            let p = rng.gen_range(-100.0..100.0);
            assert!(pinball(tau, q, p) >= 0.0);
        }
    }

    #[test]
    fn pips_on_linear_curve() {
        // 98% interval is [1, 99]; both bounds miss p = 50 by 49 at weight 0.01.
        let got = pips(&linear_curve(), 0.02, 50.0).unwrap();
        assert!((got - 0.49).abs() < 1e-12);
    }

    #[test]
    fn pips_penalizes_an_outside_point_asymmetrically() {
        // p above the upper bound: the upper bound's pinball term dominates.
        let curve = linear_curve();
        let inside = pips(&curve, 0.10, 50.0).unwrap();
        let outside = pips(&curve, 0.10, 150.0).unwrap();
        assert!(outside > inside);
    }

    #[test]
    fn ace_counts_inclusive_bounds() {
        let pi = PredictionInterval { nominal_level: 0.8, lower: -1.0, upper: 1.0 };
        let intervals = vec![pi; 5];
        // Boundary points count as covered.
        let observed = [-1.0, 1.0, 0.0, 2.0, -3.0];
        let got = ace(&intervals, &observed).unwrap();
        assert!((got - (0.6 - 0.8)).abs() < 1e-12);
    }

    #[test]
    fn ace_stays_within_its_logical_bounds() {
        let pi = PredictionInterval { nominal_level: 0.9, lower: 0.0, upper: 1.0 };
        let all_in = ace(&[pi; 4], &[0.5; 4]).unwrap();
        assert!((all_in - 0.1).abs() < 1e-12); // at most alpha
        let all_out = ace(&[pi; 4], &[9.0; 4]).unwrap();
        assert!((all_out + 0.9).abs() < 1e-12); // at least -(1 - alpha)
    }

    #[test]
    fn tail_bias_signs_and_balance() {
        let pi = PredictionInterval { nominal_level: 0.5, lower: -1.0, upper: 1.0 };
        let intervals = vec![pi; 10];
        let observed = [5.0, 5.0, 5.0, -5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let got = tail_bias(&intervals, &observed).unwrap();
        assert!((got - 0.2).abs() < 1e-12);
        // Symmetric misses cancel.
        let observed = [5.0, -5.0, 5.0, -5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(tail_bias(&intervals, &observed).unwrap(), 0.0);
    }

    #[test]
    fn crps_zero_for_degenerate_curve_at_the_observation() {
        let curve = sort_fix(&[42.0; GRID_LEN]).unwrap();
        assert_eq!(crps(&curve, 42.0), 0.0);
        assert!(crps(&curve, 43.0) > 0.0);
    }

    #[test]
    fn crps_matches_direct_grid_sum() {
        let curve = linear_curve();
        let p = 50.0;
        // Independent accumulation of the defining sum.
        let mut expect = 0.0;
        for i in 1..=99u32 {
            let tau = f64::from(i) / 100.0;
            let q = f64::from(i);
            expect += if p < q { (1.0 - tau) * (q - p) } else { tau * (p - q) };
        }
        expect /= 99.0;
        assert!((crps(&curve, p) - expect).abs() < 1e-12);
    }

    #[test]
    fn crps_is_translation_invariant() {
        let curve = linear_curve();
        let shifted: Vec<f64> = curve.values().iter().map(|v| v + 17.5).collect();
        let shifted = sort_fix(&shifted).unwrap();
        for p in [-10.0, 3.0, 88.0] {
            assert!((crps(&curve, p) - crps(&shifted, p + 17.5)).abs() < 1e-10);
        }
    }

    #[test]
    fn cpa_identical_series_reports_no_difference() {
        let loss = vec![1.0, 2.0, 0.5, 3.0, 1.5];
        let r = cpa_test(&loss, &loss).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn cpa_is_symmetric_under_swapping_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(10..200);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let ab = cpa_test(&a, &b).unwrap();
            let ba = cpa_test(&b, &a).unwrap();
            // d -> -d flips Z but not the quadratic form.
            assert!((ab.statistic - ba.statistic).abs() < 1e-9 * (1.0 + ab.statistic));
            assert!((ab.p_value - ba.p_value).abs() < 1e-9);
        }
    }

    #[test]
    fn cpa_detects_a_clear_loss_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 500;
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        // a is consistently worse by ~2 with modest noise.
        let a: Vec<f64> = b.iter().map(|v| v + 2.0 + rng.gen_range(-0.5..0.5)).collect();
        let r = cpa_test(&a, &b).unwrap();
        assert!(r.p_value < 0.01, "p = {}", r.p_value);
    }

    #[test]
    fn cpa_constant_differential_is_singular() {
        // A constant d makes the two instruments collinear: no test possible.
        let a = vec![2.0; 50];
        let b = vec![1.0; 50];
        let r = cpa_test(&a, &b).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn cpa_input_validation() {
        assert!(matches!(
            cpa_test(&[1.0, 2.0], &[1.0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(cpa_test(&[1.0], &[1.0]), Err(MetricsError::TooShort { .. })));
        assert!(matches!(
            cpa_test(&[1.0, f64::NAN], &[1.0, 2.0]),
            Err(MetricsError::NonFiniteLoss(1))
        ));
    }

    #[test]
    fn series_metrics_validate_lengths() {
        let pi = PredictionInterval { nominal_level: 0.9, lower: 0.0, upper: 1.0 };
        assert!(matches!(
            ace(&[pi], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(ace(&[], &[]), Err(MetricsError::Empty)));
        assert!(matches!(tail_bias(&[], &[]), Err(MetricsError::Empty)));
    }
}
