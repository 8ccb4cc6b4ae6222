//! Conformal prediction and historical simulation.
//!
//! Both methods forecast `center + error quantile`, where the center is a
//! statistic of the target ensemble (mean by default) and the error sample
//! comes from applying the same statistic to every window record:
//!
//! * conformal prediction (CP) uses quantiles of the absolute errors and
//!   mirrors them around the center, giving exactly symmetric bands;
//! * historical simulation (HS) uses quantiles of the signed errors, so the
//!   band follows any asymmetry in the error distribution.
//!
//! Empirical quantiles use the conformal rank rule `ceil(p * (T + 1))`
//! clamped to `[1, T]`, which yields finite-sample coverage guarantees for
//! exchangeable errors.

use crate::domain::{CalibrationWindow, ForecastRecord, QuantileCurve, tau_at, GRID_LEN};
use super::{Centering, MethodError};

/// Order statistic at probability `p` of an ascending sample under the
/// conformal rank rule. The tiny shift before `ceil` guards against float
/// dust pushing an exactly-integer rank up by one.
fn rank_quantile(sorted: &[f64], p: f64) -> f64 {
    let t = sorted.len();
    let rank = (p * (t + 1) as f64 - 1e-9).ceil() as isize;
    let rank = rank.clamp(1, t as isize) as usize;
    sorted[rank - 1]
}

fn window_errors(window: &CalibrationWindow, centering: Centering) -> Vec<f64> {
    window.records().iter().map(|r| r.observed() - centering.of(r)).collect()
}

/// Conformal prediction: symmetric bands `center ± q_{2 tau - 1}(|e|)` for
/// levels above one half, mirrored below; the median is the center itself.
pub fn fit_predict_cp(
    window: &CalibrationWindow,
    target: &ForecastRecord,
    centering: Centering,
) -> Result<QuantileCurve, MethodError> {
    let center = centering.of(target);
    let mut abs_errors: Vec<f64> =
        window_errors(window, centering).iter().map(|e| e.abs()).collect();
    abs_errors.sort_by(f64::total_cmp);
    let mut values = [0.0; GRID_LEN];
    values[GRID_LEN / 2] = center; // tau = 0.50
    for i in GRID_LEN / 2 + 1..GRID_LEN {
        let radius = rank_quantile(&abs_errors, 2.0 * tau_at(i) - 1.0);
        values[i] = center + radius;
        values[GRID_LEN - 1 - i] = center - radius;
    }
    Ok(QuantileCurve::new(values)?)
}

/// Historical simulation: `center + q_tau(e)` with signed errors.
pub fn fit_predict_hs(
    window: &CalibrationWindow,
    target: &ForecastRecord,
    centering: Centering,
) -> Result<QuantileCurve, MethodError> {
    let center = centering.of(target);
    let mut errors = window_errors(window, centering);
    errors.sort_by(f64::total_cmp);
    let mut values = [0.0; GRID_LEN];
    for (i, v) in values.iter_mut().enumerate() {
        *v = center + rank_quantile(&errors, tau_at(i));
    }
    Ok(QuantileCurve::new(values)?)
}
