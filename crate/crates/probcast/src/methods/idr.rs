//! Isotonic distributional regression with per-member linear pooling.
//!
//! For each ensemble member, the conditional CDF `F(z | x)` is estimated at
//! every distinct observed price z by an antitonic least-squares fit of the
//! indicators `1{p_t <= z}` against the member's forecasts x_t: higher
//! forecasts may only shift probability mass upward, i.e. `F(z | x)` is
//! nonincreasing in x. Evaluating each member's CDF at its own target-day
//! forecast and averaging the M step functions gives the pooled predictive
//! distribution; quantiles are read off with the generalized inverse
//! `Q(tau) = min{ z : F(z) >= tau }`.

use crate::domain::{CalibrationWindow, ForecastRecord, QuantileCurve, tau_at, GRID_LEN};
use crate::pava::antitonic_ls;
use super::MethodError;

/// A right-continuous step CDF: `F(z) = probabilities[j]` for the largest
/// `thresholds[j] <= z`, and 0 below the first threshold. The last
/// probability is always exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    thresholds: Vec<f64>,
    probabilities: Vec<f64>,
}

/// Comparison slack for probability levels, so that exact-rational jump
/// heights (like pooled k/M fractions) match grid levels robustly.
const PROB_EPS: f64 = 1e-9;

impl StepCdf {
    /// Validates strictly increasing thresholds and nondecreasing
    /// probabilities ending at 1. Probability dust within [`PROB_EPS`] of the
    /// valid range is clamped rather than rejected.
    pub fn new(thresholds: Vec<f64>, probabilities: Vec<f64>) -> Result<Self, MethodError> {
        if thresholds.is_empty() || thresholds.len() != probabilities.len() {
            return Err(MethodError::BadStepCdf(format!(
                "{} thresholds vs {} probabilities",
                thresholds.len(),
                probabilities.len()
            )));
        }
        if thresholds.iter().any(|z| !z.is_finite()) {
            return Err(MethodError::BadStepCdf("non-finite threshold".into()));
        }
        if thresholds.windows(2).any(|p| p[0] >= p[1]) {
            return Err(MethodError::BadStepCdf("thresholds not strictly increasing".into()));
        }
        let mut probabilities = probabilities;
        let mut prev = 0.0;
        for p in probabilities.iter_mut() {
            if !p.is_finite() || *p < prev - PROB_EPS || *p > 1.0 + PROB_EPS {
                return Err(MethodError::BadStepCdf(format!(
                    "probability {p} out of order or range"
                )));
            }
            *p = p.clamp(prev, 1.0);
            prev = *p;
        }
        let last = *probabilities.last().expect("nonempty");
        if (last - 1.0).abs() > PROB_EPS {
            return Err(MethodError::BadStepCdf(format!("final probability {last} != 1")));
        }
        *probabilities.last_mut().expect("nonempty") = 1.0;
        Ok(Self { thresholds, probabilities })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// CDF value at `z`.
    pub fn cdf(&self, z: f64) -> f64 {
        match self.thresholds.partition_point(|t| *t <= z) {
            0 => 0.0,
            j => self.probabilities[j - 1],
        }
    }

    /// Generalized inverse `min{ z : F(z) >= tau }` for `tau` in (0, 1].
    pub fn quantile(&self, tau: f64) -> f64 {
        let j = self.probabilities.partition_point(|p| *p < tau - PROB_EPS);
        // The last probability is exactly 1, so j is always in range.
        self.thresholds[j.min(self.thresholds.len() - 1)]
    }

    /// Equal-weight mixture of step CDFs: the union of all jump points with
    /// averaged CDF values.
    pub fn pool(components: &[StepCdf]) -> Result<StepCdf, MethodError> {
        if components.is_empty() {
            return Err(MethodError::BadStepCdf("cannot pool zero components".into()));
        }
        let mut grid: Vec<f64> = components
            .iter()
            .flat_map(|c| c.thresholds.iter().copied())
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let share = 1.0 / components.len() as f64;
        let probabilities: Vec<f64> = grid
            .iter()
            .map(|&z| components.iter().map(|c| c.cdf(z)).sum::<f64>() * share)
            .collect();
        StepCdf::new(grid, probabilities)
    }
}

/// A fitted conditional CDF family for one ensemble member: per observed
/// price threshold, the antitonic fit over distinct member forecasts.
#[derive(Debug, Clone)]
pub struct IdrMemberFit {
    /// Distinct member forecasts, ascending (the covariate groups).
    covariates: Vec<f64>,
    /// Distinct observed prices, ascending.
    thresholds: Vec<f64>,
    /// `fitted[k][g]` = estimated `F(thresholds[k] | covariates[g])`.
    fitted: Vec<Vec<f64>>,
}

impl IdrMemberFit {
    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Fitted probabilities at one threshold, by covariate group.
    pub fn fitted_at(&self, threshold_index: usize) -> &[f64] {
        &self.fitted[threshold_index]
    }

    /// Conditional CDF at covariate `x`: the fitted value of the largest
    /// training covariate `<= x`, extended constant below the smallest.
    pub fn cdf_at(&self, x: f64) -> StepCdf {
        let g = match self.covariates.partition_point(|c| *c <= x) {
            0 => 0,
            j => j - 1,
        };
        let probabilities: Vec<f64> = self.fitted.iter().map(|row| row[g]).collect();
        StepCdf::new(self.thresholds.clone(), probabilities)
            .expect("antitonic fits of monotone indicators form a valid CDF")
    }
}

/// Fits the conditional CDF family for `member_index` on a window.
pub fn fit_idr_member(
    window: &CalibrationWindow,
    member_index: usize,
) -> Result<IdrMemberFit, MethodError> {
    let members = window.members();
    if member_index >= members {
        return Err(MethodError::BadMemberIndex { index: member_index, members });
    }
    // Pairs (forecast, observed) sorted by forecast; duplicates merge into
    // weighted groups so PAVA sees strictly increasing covariates.
    let mut pairs: Vec<(f64, f64)> = window
        .records()
        .iter()
        .map(|r| (r.ensemble()[member_index], r.observed()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut covariates: Vec<f64> = Vec::new();
    let mut group_of = Vec::with_capacity(pairs.len());
    for (x, _) in &pairs {
        if covariates.last().map_or(true, |c| c < x) {
            covariates.push(*x);
        }
        group_of.push(covariates.len() - 1);
    }
    let mut weights = vec![0.0; covariates.len()];
    for &g in &group_of {
        weights[g] += 1.0;
    }
    let mut thresholds: Vec<f64> = pairs.iter().map(|(_, p)| *p).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut fitted = Vec::with_capacity(thresholds.len());
    let mut targets = vec![0.0; covariates.len()];
    for &z in &thresholds {
        targets.iter_mut().for_each(|t| *t = 0.0);
        for (i, (_, p)) in pairs.iter().enumerate() {
            if *p <= z {
                targets[group_of[i]] += 1.0;
            }
        }
        for (t, w) in targets.iter_mut().zip(&weights) {
            *t /= w;
        }
        fitted.push(antitonic_ls(&targets, &weights)?);
    }
    Ok(IdrMemberFit { covariates, thresholds, fitted })
}

/// Full IDR prediction: each member's conditional CDF evaluated at its own
/// target-day forecast, pooled with equal weights, inverted on the grid.
pub fn fit_predict_idr(
    window: &CalibrationWindow,
    target: &ForecastRecord,
) -> Result<QuantileCurve, MethodError> {
    let members = window.members();
    let mut cdfs = Vec::with_capacity(members);
    for j in 0..members {
        let fit = fit_idr_member(window, j)?;
        cdfs.push(fit.cdf_at(target.ensemble()[j]));
    }
    let pooled = StepCdf::pool(&cdfs)?;
    let mut values = [0.0; GRID_LEN];
    for (i, v) in values.iter_mut().enumerate() {
        *v = pooled.quantile(tau_at(i));
    }
    Ok(QuantileCurve::new(values)?)
}
