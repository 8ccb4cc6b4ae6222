//! The seven postprocessing methods that turn a calibration window plus a
//! target-day ensemble into a full quantile curve.
//!
//! * conformal prediction (`cp`) and historical simulation (`hs`) add error
//!   quantiles around an ensemble center ([`conformal`]),
//! * isotonic distributional regression (`idr`) pools per-member conditional
//!   CDFs ([`idr`]),
//! * the quantile regression averaging family (`qra`, `qrm`, `lqra`, `iqra`)
//!   fits one regression per percentile via the LP solver ([`qra`]).
//!
//! [`fit_predict`] is the uniform entry point used by the backtest engine;
//! regression methods also surface their per-level coefficient vectors for
//! the selection-frequency diagnostics ([`selection_frequency`]).

pub mod conformal;
pub mod idr;
pub mod qra;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CalibrationWindow, DomainError, ForecastRecord, QuantileCurve, GRID_LEN};
use crate::pava::PavaError;
use crate::solver::{SolverError, ZERO_THRESHOLD};

#[derive(Debug, Error, PartialEq)]
pub enum MethodError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Pava(#[from] PavaError),
    #[error("target record is for {target_day} hour {target_hour}, window expects {day} hour {hour}")]
    TargetMismatch { target_day: chrono::NaiveDate, target_hour: u32, day: chrono::NaiveDate, hour: u32 },
    #[error("target ensemble has {target} members, window has {window}")]
    EnsembleSizeMismatch { target: usize, window: usize },
    #[error("member index {index} out of range for {members} members")]
    BadMemberIndex { index: usize, members: usize },
    #[error("step CDF is malformed: {0}")]
    BadStepCdf(String),
    #[error("no coefficient records to aggregate")]
    NoCoefficients,
    #[error("coefficient record has {got} slopes, expected {expected}")]
    CoefficientShape { got: usize, expected: usize },
    #[error("coefficient record tau {0} is not on the percentile grid")]
    OffGridTau(f64),
}

/// The seven postprocessing methods. Ordering is the canonical output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Cp,
    Hs,
    Idr,
    Qra,
    Qrm,
    Lqra,
    Iqra,
}

impl MethodKind {
    pub const ALL: [MethodKind; 7] = [
        MethodKind::Cp,
        MethodKind::Hs,
        MethodKind::Idr,
        MethodKind::Qra,
        MethodKind::Qrm,
        MethodKind::Lqra,
        MethodKind::Iqra,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Cp => "cp",
            MethodKind::Hs => "hs",
            MethodKind::Idr => "idr",
            MethodKind::Qra => "qra",
            MethodKind::Qrm => "qrm",
            MethodKind::Lqra => "lqra",
            MethodKind::Iqra => "iqra",
        }
    }

    /// Whether this method logs per-level regression coefficients.
    pub fn logs_coefficients(&self) -> bool {
        matches!(self, MethodKind::Qra | MethodKind::Qrm | MethodKind::Lqra | MethodKind::Iqra)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodKind::ALL
            .iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .copied()
            .ok_or_else(|| format!("unknown method '{s}' (expected one of cp, hs, idr, qra, qrm, lqra, iqra)"))
    }
}

/// Statistic the conformal-family methods center their bands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Centering {
    EnsembleMean,
    EnsembleMedian,
}

impl Centering {
    pub fn of(&self, record: &ForecastRecord) -> f64 {
        match self {
            Centering::EnsembleMean => record.ensemble_mean(),
            Centering::EnsembleMedian => record.ensemble_median(),
        }
    }
}

impl fmt::Display for Centering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Centering::EnsembleMean => "mean",
            Centering::EnsembleMedian => "median",
        })
    }
}

impl FromStr for Centering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Centering::EnsembleMean),
            "median" => Ok(Centering::EnsembleMedian),
            _ => Err(format!("unknown centering '{s}' (expected mean or median)")),
        }
    }
}

/// How the regression family sweeps the percentile grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStrategy {
    /// One solver instance per level, each solved cold. Mirrors fitting 99
    /// independent models; used by the timing benchmark.
    PerTau,
    /// One solver instance swept across the grid with basis reuse. Same
    /// optima, far fewer pivots; the backtest default.
    WarmPath,
}

/// A fully configured method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    /// Center statistic for `cp` and `hs`.
    pub centering: Centering,
    /// Penalty grid for `lqra`.
    pub penalty_grid: Vec<f64>,
    /// Grid sweep strategy for the regression family.
    pub strategy: FitStrategy,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            centering: Centering::EnsembleMean,
            penalty_grid: crate::solver::default_penalty_grid(),
            strategy: FitStrategy::WarmPath,
        }
    }

    pub fn with_strategy(kind: MethodKind, strategy: FitStrategy) -> Self {
        Self { strategy, ..Self::new(kind) }
    }
}

/// One fitted regression: the coefficient vector behind a single grid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCoefficients {
    pub tau: f64,
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

/// Curve plus (for the regression family) the per-level coefficient log.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub curve: QuantileCurve,
    pub coefficients: Option<Vec<TauCoefficients>>,
}

/// Fits `spec` on `window` and predicts the quantile curve for `target`.
///
/// The target record must be the window's target day and hour with the same
/// ensemble size; its observed price is never read, so forecasts can be
/// produced before the target price exists.
pub fn fit_predict(
    spec: &MethodSpec,
    window: &CalibrationWindow,
    target: &ForecastRecord,
) -> Result<MethodOutput, MethodError> {
    if target.day() != window.target_day() || target.hour() != window.hour() {
        return Err(MethodError::TargetMismatch {
            target_day: target.day(),
            target_hour: target.hour(),
            day: window.target_day(),
            hour: window.hour(),
        });
    }
    if target.ensemble().len() != window.members() {
        return Err(MethodError::EnsembleSizeMismatch {
            target: target.ensemble().len(),
            window: window.members(),
        });
    }
    match spec.kind {
        MethodKind::Cp => {
            let curve = conformal::fit_predict_cp(window, target, spec.centering)?;
            Ok(MethodOutput { curve, coefficients: None })
        }
        MethodKind::Hs => {
            let curve = conformal::fit_predict_hs(window, target, spec.centering)?;
            Ok(MethodOutput { curve, coefficients: None })
        }
        MethodKind::Idr => {
            let curve = idr::fit_predict_idr(window, target)?;
            Ok(MethodOutput { curve, coefficients: None })
        }
        MethodKind::Qra => qra::fit_predict_qra(window, target, spec.strategy),
        MethodKind::Qrm => qra::fit_predict_qrm(window, target, spec.strategy),
        MethodKind::Iqra => qra::fit_predict_iqra(window, target, spec.strategy),
        MethodKind::Lqra => {
            qra::fit_predict_lqra(window, target, &spec.penalty_grid, spec.strategy)
        }
    }
}

/// Selection-frequency diagnostics for a set of fitted regression models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequency {
    /// `matrix[grid_index][member]`: percentage of models (0..=100) whose
    /// fitted slope for that member exceeds the zero threshold at that level.
    pub matrix: Vec<Vec<f64>>,
    /// Number of ensemble members M.
    pub members: usize,
    /// Models aggregated per grid level.
    pub models_per_level: usize,
    /// Mean of all matrix cells: the average percentage of selected members.
    pub aggregate: f64,
}

/// Aggregates coefficient logs into the 99 x M selection-frequency matrix.
/// Every grid level must appear equally often (one record per fitted model).
pub fn selection_frequency(
    entries: &[TauCoefficients],
    members: usize,
) -> Result<SelectionFrequency, MethodError> {
    if entries.is_empty() {
        return Err(MethodError::NoCoefficients);
    }
    let mut counts = vec![vec![0usize; members]; GRID_LEN];
    let mut per_level = vec![0usize; GRID_LEN];
    for e in entries {
        if e.slopes.len() != members {
            return Err(MethodError::CoefficientShape { got: e.slopes.len(), expected: members });
        }
        let scaled = e.tau * 100.0;
        let idx = scaled.round();
        if (scaled - idx).abs() > 1e-6 || !(1.0..=99.0).contains(&idx) {
            return Err(MethodError::OffGridTau(e.tau));
        }
        let idx = idx as usize - 1;
        per_level[idx] += 1;
        for (m, slope) in e.slopes.iter().enumerate() {
            if slope.abs() > ZERO_THRESHOLD {
                counts[idx][m] += 1;
            }
        }
    }
    let models = per_level[0];
    if models == 0 || per_level.iter().any(|&c| c != models) {
        return Err(MethodError::NoCoefficients);
    }
    let mut matrix = vec![vec![0.0; members]; GRID_LEN];
    let mut total = 0.0;
    for i in 0..GRID_LEN {
        for m in 0..members {
            let pct = 100.0 * counts[i][m] as f64 / models as f64;
            matrix[i][m] = pct;
            total += pct;
        }
    }
    let aggregate = if members == 0 { 0.0 } else { total / (GRID_LEN * members) as f64 };
    Ok(SelectionFrequency { matrix, members, models_per_level: models, aggregate })
}
