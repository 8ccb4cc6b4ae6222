//! Quantile regression averaging in four variants.
//!
//! All four share the same skeleton: build a design matrix from the
//! calibration window, fit one quantile regression per grid level, predict
//! the target day from the fitted coefficients and re-sort the raw curve.
//! They differ only in the design and the regression regime:
//!
//! * `qra` — every sorted ensemble member is a regressor, unconstrained fit;
//! * `qrm` — the single regressor is the ensemble mean;
//! * `iqra` — member regressors with slopes constrained nonnegative;
//! * `lqra` — member regressors with an L1 penalty, selected per level by an
//!   information criterion over a penalty grid.

use crate::domain::{sort_fix, CalibrationWindow, ForecastRecord, tau_at, GRID_LEN};
use crate::solver::{
    lasso_tau_paths, solve, solve_lasso_path, solve_tau_path, DesignMatrix, QrProblem, QrSolution,
    Regime,
};
use super::{FitStrategy, MethodError, MethodOutput, TauCoefficients};

/// Design with one column per sorted ensemble member.
fn member_design(window: &CalibrationWindow) -> Result<DesignMatrix, MethodError> {
    let columns: Vec<Vec<f64>> = (0..window.members())
        .map(|j| window.records().iter().map(|r| r.ensemble()[j]).collect())
        .collect();
    Ok(DesignMatrix::from_columns(window.len(), &columns)?)
}

/// Design with a single column holding the ensemble mean.
fn mean_design(window: &CalibrationWindow) -> Result<DesignMatrix, MethodError> {
    let column: Vec<f64> = window.records().iter().map(|r| r.ensemble_mean()).collect();
    Ok(DesignMatrix::from_columns(window.len(), &[column])?)
}

/// Evaluates fitted per-level models on the target features and assembles the
/// final curve (sorted to repair any quantile crossings) plus the coefficient
/// log.
fn assemble(
    fits: Vec<QrSolution>,
    features: &[f64],
) -> Result<MethodOutput, MethodError> {
    debug_assert_eq!(fits.len(), GRID_LEN);
    let mut raw = [0.0; GRID_LEN];
    let mut coefficients = Vec::with_capacity(GRID_LEN);
    for (i, fit) in fits.iter().enumerate() {
        if fit.coefficients.len() != features.len() {
            return Err(MethodError::CoefficientShape {
                got: fit.coefficients.len(),
                expected: features.len(),
            });
        }
        raw[i] = fit.intercept
            + features
                .iter()
                .zip(&fit.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>();
        coefficients.push(TauCoefficients {
            tau: fit.tau,
            intercept: fit.intercept,
            slopes: fit.coefficients.clone(),
        });
    }
    Ok(MethodOutput {
        curve: sort_fix(&raw)?,
        coefficients: Some(coefficients),
    })
}

/// Fits one regression per grid level under `regime`, either independently
/// per level or by sweeping the level path on a shared basis.
fn fit_grid(
    design: &DesignMatrix,
    targets: &[f64],
    regime: Regime,
    strategy: FitStrategy,
) -> Result<Vec<QrSolution>, MethodError> {
    let taus: Vec<f64> = (0..GRID_LEN).map(tau_at).collect();
    let fits = match strategy {
        FitStrategy::WarmPath => solve_tau_path(design, targets, regime, &taus)?,
        FitStrategy::PerTau => {
            let mut fits = Vec::with_capacity(GRID_LEN);
            for &tau in &taus {
                let problem = QrProblem { design, targets, tau, regime };
                fits.push(solve(&problem)?);
            }
            fits
        }
    };
    Ok(fits)
}

/// Unconstrained quantile regression on all ensemble members.
pub fn fit_predict_qra(
    window: &CalibrationWindow,
    target: &ForecastRecord,
    strategy: FitStrategy,
) -> Result<MethodOutput, MethodError> {
    let design = member_design(window)?;
    let fits = fit_grid(&design, &window.observed(), Regime::Unconstrained, strategy)?;
    assemble(fits, target.ensemble())
}

/// Quantile regression on the ensemble mean alone.
pub fn fit_predict_qrm(
    window: &CalibrationWindow,
    target: &ForecastRecord,
    strategy: FitStrategy,
) -> Result<MethodOutput, MethodError> {
    let design = mean_design(window)?;
    let fits = fit_grid(&design, &window.observed(), Regime::Unconstrained, strategy)?;
    assemble(fits, &[target.ensemble_mean()])
}

/// Quantile regression on all members with nonnegative slope constraints.
pub fn fit_predict_iqra(
    window: &CalibrationWindow,
    target: &ForecastRecord,
    strategy: FitStrategy,
) -> Result<MethodOutput, MethodError> {
    let design = member_design(window)?;
    let fits = fit_grid(&design, &window.observed(), Regime::Isotonic, strategy)?;
    assemble(fits, target.ensemble())
}

/// L1-penalized quantile regression on all members, with the penalty chosen
/// per level by an information criterion over `penalty_grid`.
pub fn fit_predict_lqra(
    window: &CalibrationWindow,
    target: &ForecastRecord,
    penalty_grid: &[f64],
    strategy: FitStrategy,
) -> Result<MethodOutput, MethodError> {
    let design = member_design(window)?;
    let targets = window.observed();
    let fits: Vec<QrSolution> = match strategy {
        FitStrategy::WarmPath => {
            let taus: Vec<f64> = (0..GRID_LEN).map(tau_at).collect();
            lasso_tau_paths(&design, &targets, &taus, penalty_grid)?
                .into_iter()
                .map(|(fit, _penalty)| fit)
                .collect()
        }
        FitStrategy::PerTau => {
            let mut fits = Vec::with_capacity(GRID_LEN);
            for i in 0..GRID_LEN {
                let (fit, _penalty) =
                    solve_lasso_path(&design, &targets, tau_at(i), penalty_grid)?;
                fits.push(fit);
            }
            fits
        }
    };
    assemble(fits, target.ensemble())
}
