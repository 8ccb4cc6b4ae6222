//! Rolling-origin backtest over a rectangular dataset.
//!
//! Every day after the initial calibration span becomes a target: each
//! method is fitted on the trailing window of that target's delivery hour
//! and predicts the target's quantile curve. Only records strictly before
//! the target day enter the fit, so forecasts never look ahead.
//!
//! Work is sharded into independent (method, hour, target) tasks executed on
//! a rayon pool. Tasks are generated in canonical order and collected
//! order-preservingly, so results are byte-identical for any worker count.

use chrono::NaiveDate;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{CalibrationWindow, DomainError, QuantileCurve};
use crate::ingest::Dataset;
use crate::methods::{fit_predict, MethodError, MethodKind, MethodSpec, TauCoefficients};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("no methods selected")]
    NoMethods,
    #[error("method {0} listed twice")]
    DuplicateMethod(MethodKind),
    #[error("dataset spans {days} days, need more than the {window_len}-day window")]
    DatasetTooShort { days: usize, window_len: usize },
    #[error("window length must be positive")]
    BadWindow,
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{method} on {day} hour {hour}: {source}")]
    Method {
        method: MethodKind,
        day: NaiveDate,
        hour: u32,
        #[source]
        source: MethodError,
    },
}

/// Backtest parameters.
#[derive(Debug, Clone)]
pub struct BacktestConfig {
    /// Methods to run; sorted canonically, duplicates rejected.
    pub methods: Vec<MethodSpec>,
    /// Trailing calibration window length in days.
    pub window_len: usize,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
}

/// One forecast curve with its target coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub day: NaiveDate,
    pub hour: u32,
    pub curve: QuantileCurve,
}

/// One fitted coefficient vector with its target coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub day: NaiveDate,
    pub hour: u32,
    pub coefficients: TauCoefficients,
}

/// All forecasts one method produced over the backtest.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodForecasts {
    pub kind: MethodKind,
    /// Sorted by (day, hour).
    pub curves: Vec<CurveRow>,
    /// Sorted by (day, hour, grid level); empty for methods without
    /// coefficient logs.
    pub coefficients: Vec<CoefficientRow>,
}

/// Runs the backtest and returns per-method forecasts in canonical method
/// order.
pub fn run(dataset: &Dataset, config: &BacktestConfig) -> Result<Vec<MethodForecasts>, BacktestError> {
    if config.window_len == 0 {
        return Err(BacktestError::BadWindow);
    }
    let mut methods = config.methods.clone();
    if methods.is_empty() {
        return Err(BacktestError::NoMethods);
    }
    methods.sort_by_key(|spec| spec.kind);
    for pair in methods.windows(2) {
        if pair[0].kind == pair[1].kind {
            return Err(BacktestError::DuplicateMethod(pair[0].kind));
        }
    }
    let days = dataset.days();
    if days.len() <= config.window_len {
        return Err(BacktestError::DatasetTooShort {
            days: days.len(),
            window_len: config.window_len,
        });
    }
    if days.windows(2).any(|p| (p[1] - p[0]).num_days() > 1) {
        log::warn!("dataset has calendar gaps; windows span more days than records");
    }

    // One task per (method, hour, target). Generation order is the output
    // order: methods canonical, hours ascending, targets chronological.
    let hours: Vec<u32> = dataset.hours().collect();
    let targets_per_hour = days.len() - config.window_len;
    let mut tasks = Vec::with_capacity(methods.len() * hours.len() * targets_per_hour);
    for (mi, _) in methods.iter().enumerate() {
        for &hour in &hours {
            for ti in 0..targets_per_hour {
                tasks.push((mi, hour, ti));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| BacktestError::Pool(e.to_string()))?;
    let outputs = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(mi, hour, ti)| {
                let spec = &methods[mi];
                let series = dataset.series(hour).expect("hour from this dataset");
                let target = &series[config.window_len + ti];
                let window =
                    CalibrationWindow::new(&series[ti..ti + config.window_len], target.day())?;
                fit_predict(spec, &window, target).map_err(|source| BacktestError::Method {
                    method: spec.kind,
                    day: target.day(),
                    hour,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Repack the flat task results per method. Within a method the rows
    // arrive hour-major; re-sort to day-major (day, hour) for output.
    let per_method = hours.len() * targets_per_hour;
    let mut results = Vec::with_capacity(methods.len());
    let mut outputs = outputs.into_iter();
    for spec in &methods {
        let mut curves = Vec::with_capacity(per_method);
        let mut coefficients = Vec::new();
        for &hour in &hours {
            for ti in 0..targets_per_hour {
                let output = outputs.next().expect("one output per task");
                let day = days[config.window_len + ti];
                curves.push(CurveRow { day, hour, curve: output.curve });
                if let Some(tau_coefficients) = output.coefficients {
                    coefficients.extend(tau_coefficients.into_iter().map(|c| CoefficientRow {
                        day,
                        hour,
                        coefficients: c,
                    }));
                }
            }
        }
        curves.sort_by_key(|row| (row.day, row.hour));
        coefficients.sort_by(|a, b| {
            (a.day, a.hour)
                .cmp(&(b.day, b.hour))
                .then(a.coefficients.tau.total_cmp(&b.coefficients.tau))
        });
        results.push(MethodForecasts { kind: spec.kind, curves, coefficients });
    }
    Ok(results)
}
