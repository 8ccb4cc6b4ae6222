//! Core domain types shared by every postprocessing method: forecast records,
//! rolling calibration windows, percentile curves and the prediction intervals
//! read off them.
//!
//! Forecasts live on a fixed grid of 99 percentiles (tau = 0.01..0.99). Every
//! method produces a [`QuantileCurve`] per (day, hour); central prediction
//! intervals are pairs of symmetric grid quantiles, so only nominal levels
//! `1 - alpha` whose `alpha/2` lands on the grid are representable.

use chrono::NaiveDate;
use thiserror::Error;

/// Number of points on the percentile grid (tau = 0.01, 0.02, .., 0.99).
pub const GRID_LEN: usize = 99;

/// Probability level for 0-based grid index `index`.
#[inline]
pub fn tau_at(index: usize) -> f64 {
    debug_assert!(index < GRID_LEN);
    (index + 1) as f64 / 100.0
}

/// The full percentile grid tau_i = i/100, i = 1..=99.
pub fn percentile_grid() -> [f64; GRID_LEN] {
    let mut grid = [0.0; GRID_LEN];
    for (i, tau) in grid.iter_mut().enumerate() {
        *tau = tau_at(i);
    }
    grid
}

/// Errors from constructing or combining domain values.
#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("expected {GRID_LEN} quantile values, got {0}")]
    WrongGridLength(usize),
    #[error("non-finite quantile value {value} at probability index {index} (tau = {tau:.2})")]
    NonFiniteQuantile { index: usize, tau: f64, value: f64 },
    #[error("quantile values decrease from index {index} to {} ({prev} > {next})", index + 1)]
    DecreasingQuantiles { index: usize, prev: f64, next: f64 },
    #[error(
        "nominal level {level} is off-grid: alpha/2 must be a multiple of 0.01 in [0.01, 0.49]"
    )]
    OffGridLevel { level: f64 },
    #[error("delivery hour {0} outside 1..=24")]
    BadHour(u32),
    #[error("non-finite {what} in forecast record for {day} hour {hour}")]
    NonFiniteRecordValue { what: &'static str, day: NaiveDate, hour: u32 },
    #[error("forecast record for {day} hour {hour} has an empty ensemble")]
    EmptyEnsemble { day: NaiveDate, hour: u32 },
    #[error("calibration window is empty")]
    EmptyWindow,
    #[error("calibration window mixes hours {first} and {other}")]
    MixedHours { first: u32, other: u32 },
    #[error("calibration window mixes ensemble sizes {first} and {other}")]
    MixedEnsembleSizes { first: usize, other: usize },
    #[error("calibration window days not strictly increasing at {day}")]
    UnorderedWindow { day: NaiveDate },
    #[error("calibration window reaches {last}, not strictly before target day {target}")]
    WindowNotBeforeTarget { last: NaiveDate, target: NaiveDate },
    #[error(
        "window of {len} records is too short for {members} ensemble members; \
         need at least members + 2"
    )]
    WindowTooShort { len: usize, members: usize },
}

/// One (delivery day, delivery hour) row of a dataset: the realized price and
/// the point forecasts of the M ensemble members, stored sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    day: NaiveDate,
    hour: u32,
    observed: f64,
    ensemble: Vec<f64>,
}

impl ForecastRecord {
    /// Validates and normalizes a record. Hours run 1..=24 (hour h covers the
    /// interval h-1..h); ensemble members are sorted ascending so that member
    /// index k is the k-th order statistic of the original forecasts.
    pub fn new(
        day: NaiveDate,
        hour: u32,
        observed: f64,
        mut ensemble: Vec<f64>,
    ) -> Result<Self, DomainError> {
        if !(1..=24).contains(&hour) {
            return Err(DomainError::BadHour(hour));
        }
        if !observed.is_finite() {
            return Err(DomainError::NonFiniteRecordValue { what: "observed price", day, hour });
        }
        if ensemble.is_empty() {
            return Err(DomainError::EmptyEnsemble { day, hour });
        }
        if ensemble.iter().any(|m| !m.is_finite()) {
            return Err(DomainError::NonFiniteRecordValue { what: "ensemble member", day, hour });
        }
        ensemble.sort_by(f64::total_cmp);
        Ok(Self { day, hour, observed, ensemble })
    }

    pub fn day(&self) -> NaiveDate {
        self.day
    }

    pub fn hour(&self) -> u32 {
        self.hour
    }

    pub fn observed(&self) -> f64 {
        self.observed
    }

    /// Member forecasts sorted ascending.
    pub fn ensemble(&self) -> &[f64] {
        &self.ensemble
    }

    /// Arithmetic mean of the ensemble members.
    pub fn ensemble_mean(&self) -> f64 {
        self.ensemble.iter().sum::<f64>() / self.ensemble.len() as f64
    }

    /// Median of the (sorted) ensemble members.
    pub fn ensemble_median(&self) -> f64 {
        let m = self.ensemble.len();
        if m % 2 == 1 {
            self.ensemble[m / 2]
        } else {
            0.5 * (self.ensemble[m / 2 - 1] + self.ensemble[m / 2])
        }
    }
}

/// A calibration window: the T most recent records for one delivery hour,
/// strictly before the target day. All fitting happens on such windows, so the
/// no-look-ahead guarantee reduces to the `WindowNotBeforeTarget` check here.
#[derive(Debug, Clone)]
pub struct CalibrationWindow<'a> {
    records: &'a [ForecastRecord],
    target_day: NaiveDate,
}

impl<'a> CalibrationWindow<'a> {
    /// Validates window shape: uniform hour and ensemble size, strictly
    /// increasing days, everything before `target_day`, and the solver
    /// feasibility floor T >= M + 2.
    pub fn new(
        records: &'a [ForecastRecord],
        target_day: NaiveDate,
    ) -> Result<Self, DomainError> {
        let first = records.first().ok_or(DomainError::EmptyWindow)?;
        for pair in records.windows(2) {
            if pair[1].hour != first.hour {
                return Err(DomainError::MixedHours { first: first.hour, other: pair[1].hour });
            }
            if pair[1].ensemble.len() != first.ensemble.len() {
                return Err(DomainError::MixedEnsembleSizes {
                    first: first.ensemble.len(),
                    other: pair[1].ensemble.len(),
                });
            }
            if pair[1].day <= pair[0].day {
                return Err(DomainError::UnorderedWindow { day: pair[1].day });
            }
        }
        let last = records.last().expect("nonempty");
        if last.day >= target_day {
            return Err(DomainError::WindowNotBeforeTarget { last: last.day, target: target_day });
        }
        let members = first.ensemble.len();
        if records.len() < members + 2 {
            return Err(DomainError::WindowTooShort { len: records.len(), members });
        }
        Ok(Self { records, target_day })
    }

    /// Same as [`CalibrationWindow::new`] for data already validated upstream
    /// (e.g. slices of a loaded dataset); only checks in debug builds.
    pub(crate) fn new_unchecked(records: &'a [ForecastRecord], target_day: NaiveDate) -> Self {
        debug_assert!(Self::new(records, target_day).is_ok());
        Self { records, target_day }
    }

    pub fn records(&self) -> &'a [ForecastRecord] {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn target_day(&self) -> NaiveDate {
        self.target_day
    }

    pub fn hour(&self) -> u32 {
        self.records[0].hour
    }

    /// Ensemble size M.
    pub fn members(&self) -> usize {
        self.records[0].ensemble.len()
    }

    /// Realized prices of the window, in day order.
    pub fn observed(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.observed).collect()
    }
}

/// A predictive distribution as 99 nondecreasing finite quantiles on the
/// percentile grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurve {
    values: [f64; GRID_LEN],
}

impl QuantileCurve {
    /// Accepts only curves that already satisfy the invariant (finite,
    /// nondecreasing). Methods whose raw output can cross quantiles should go
    /// through [`sort_fix`] instead.
    pub fn new(values: [f64; GRID_LEN]) -> Result<Self, DomainError> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DomainError::NonFiniteQuantile { index: i, tau: tau_at(i), value: *v });
            }
        }
        for i in 0..GRID_LEN - 1 {
            if values[i] > values[i + 1] {
                return Err(DomainError::DecreasingQuantiles {
                    index: i,
                    prev: values[i],
                    next: values[i + 1],
                });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64; GRID_LEN] {
        &self.values
    }

    /// Quantile at 0-based grid index (tau = (index+1)/100).
    pub fn value_at(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// Repairs quantile crossing by sorting the 99 raw values ascending.
///
/// Sorting is the L2-optimal monotone rearrangement, leaves already-monotone
/// curves untouched and is idempotent. Non-finite input is rejected with the
/// offending probability index.
pub fn sort_fix(raw: &[f64]) -> Result<QuantileCurve, DomainError> {
    if raw.len() != GRID_LEN {
        return Err(DomainError::WrongGridLength(raw.len()));
    }
    let mut values = [0.0; GRID_LEN];
    for (i, v) in raw.iter().enumerate() {
        if !v.is_finite() {
            return Err(DomainError::NonFiniteQuantile { index: i, tau: tau_at(i), value: *v });
        }
        values[i] = *v;
    }
    values.sort_by(f64::total_cmp);
    Ok(QuantileCurve { values })
}

/// Central prediction interval at nominal coverage `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    pub nominal_level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Reads the central `1 - alpha` interval `[q(alpha/2), q(1 - alpha/2)]` off a
/// curve. `alpha/2` must land exactly on the percentile grid, i.e. alpha must
/// be an even multiple of 0.01 in [0.02, 0.98]; anything else is rejected
/// rather than interpolated.
pub fn interval_from_curve(
    curve: &QuantileCurve,
    alpha: f64,
) -> Result<PredictionInterval, DomainError> {
    if !alpha.is_finite() {
        return Err(DomainError::OffGridLevel { level: alpha });
    }
    let half_steps = alpha * 50.0; // alpha/2 in units of 0.01
    let k = half_steps.round();
    if (half_steps - k).abs() > 1e-9 || !(1.0..=49.0).contains(&k) {
        return Err(DomainError::OffGridLevel { level: alpha });
    }
    let k = k as usize;
    Ok(PredictionInterval {
        nominal_level: 1.0 - alpha,
        lower: curve.value_at(k - 1),
        upper: curve.value_at(GRID_LEN - k),
    })
}

/// Rolls a fixed-length calibration window over one hour's records.
///
/// `records` must be one delivery hour sorted by day. For each target index
/// past the first `window_len` records, yields the window of exactly the
/// `window_len` immediately preceding records plus the target record. Fewer
/// than `window_len + 1` records yield an empty stream. Calendar gaps are
/// tolerated — the window simply spans more than `window_len` calendar days —
/// but are surfaced once as a warning.
pub fn roll_windows<'a>(
    records: &'a [ForecastRecord],
    window_len: usize,
) -> Result<impl Iterator<Item = (CalibrationWindow<'a>, &'a ForecastRecord)>, DomainError> {
    if let Some(first) = records.first() {
        for pair in records.windows(2) {
            if pair[1].hour != first.hour {
                return Err(DomainError::MixedHours { first: first.hour, other: pair[1].hour });
            }
            if pair[1].ensemble.len() != first.ensemble.len() {
                return Err(DomainError::MixedEnsembleSizes {
                    first: first.ensemble.len(),
                    other: pair[1].ensemble.len(),
                });
            }
            if pair[1].day <= pair[0].day {
                return Err(DomainError::UnorderedWindow { day: pair[1].day });
            }
        }
        if records.len() > window_len {
            let members = first.ensemble.len();
            if window_len < members + 2 {
                return Err(DomainError::WindowTooShort { len: window_len, members });
            }
            let gaps = records
                .windows(2)
                .filter(|p| (p[1].day - p[0].day).num_days() > 1)
                .count();
            if gaps > 0 {
                log::warn!(
                    "hour {}: {gaps} calendar gap(s) in {} records; windows keep the most \
                     recent {window_len} records regardless",
                    first.hour,
                    records.len(),
                );
            }
        }
    }
    let n = records.len();
    let start = window_len.min(n); // empty range when too short
    Ok((start..n).filter(move |_| n > window_len).map(move |i| {
        let target = &records[i];
        (CalibrationWindow::new_unchecked(&records[i - window_len..i], target.day), target)
    }))
}
