//! Probabilistic electricity price forecasting from point-forecast ensembles.
//!
//! The library turns a window of historical point forecasts (an "ensemble" of
//! M forecasters per delivery hour) plus realized prices into full predictive
//! distributions on a 99-percentile grid. Seven postprocessing methods are
//! provided, from simple conformal bands to quantile regression averaging with
//! shape or sparsity constraints:
//!
//! * `cp` — conformal prediction bands, symmetric around the ensemble center,
//! * `hs` — historical simulation using signed error quantiles,
//! * `idr` — isotonic distributional regression, linearly pooled per member,
//! * `qra` — quantile regression averaging over all members,
//! * `qrm` — quantile regression on the ensemble mean,
//! * `lqra` — L1-penalized QRA with a BIC-selected penalty,
//! * `iqra` — QRA with nonnegative slope constraints.
//!
//! Supporting infrastructure covers the shared quantile-curve domain types
//! ([`domain`]), a purpose-built LP solver for pinball-loss minimization
//! ([`solver`]), evaluation metrics and a conditional predictive ability test
//! ([`metrics`]), dataset I/O with variance-stabilizing transforms and a
//! synthetic data generator ([`ingest`], [`vst`], [`synth`]), a deterministic
//! rolling-window backtest engine ([`backtest`], [`report`], [`bench`]) and a
//! command-line interface ([`cli`]).

pub mod backtest;
pub mod bench;
pub mod cli;
pub mod domain;
pub mod ingest;
pub mod methods;
pub mod metrics;
pub mod pava;
pub mod report;
pub mod solver;
pub mod synth;
pub mod vst;

pub use domain::{
    interval_from_curve, percentile_grid, roll_windows, sort_fix, tau_at, CalibrationWindow,
    DomainError, ForecastRecord, PredictionInterval, QuantileCurve, GRID_LEN,
};
pub use solver::{
    solve, solve_lasso_path, solve_tau_path, standard_form_size, QrProblem, QrSolution, Regime,
    SolverError,
};
