//! Linear-programming solver for pinball-loss regression.
//!
//! Fits `y_t ~ beta_0 + sum_j beta_j x_{t,j}` by minimizing the pinball
//! (quantile) loss at a probability level tau, in one of three regimes:
//!
//! * [`Regime::Unconstrained`] — plain quantile regression,
//! * [`Regime::Isotonic`] — slopes constrained nonnegative (the intercept
//!   stays free), obtained by simply dropping the negative split variables
//!   from the LP,
//! * [`Regime::LassoPenalized`] — an L1 penalty `lambda * sum_j |beta_j|` on
//!   the slopes (intercept unpenalized).
//!
//! All regimes share one purpose-built revised simplex (see [`simplex`]) that
//! exploits the LP's residual/coefficient block structure. On top of single
//! solves the module offers warm-started percentile sweeps
//! ([`solve_tau_path`]) and BIC-based penalty selection over a grid
//! ([`solve_lasso_path`]).

pub mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::pinball;
use simplex::Simplex;

/// Slope treatment for a quantile regression fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    /// Sign-free slopes.
    Unconstrained,
    /// Slopes constrained to be `>= 0`; intercept free.
    Isotonic,
    /// Sign-free slopes with L1 penalty weight `lambda >= 0` on the slopes.
    LassoPenalized(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("{t} observations cannot identify {m} slopes plus an intercept; need at least m + 2")]
    TooFewRows { t: usize, m: usize },
    #[error("targets length {targets} does not match design rows {rows}")]
    ShapeMismatch { targets: usize, rows: usize },
    #[error("design column {column} has {len} rows, expected {rows}")]
    RaggedColumn { column: usize, len: usize, rows: usize },
    #[error("probability level must lie strictly inside (0, 1), got {0}")]
    BadTau(f64),
    #[error("penalty weight must be finite and >= 0, got {0}")]
    BadPenalty(f64),
    #[error("penalty grid is empty")]
    EmptyPenaltyGrid,
    #[error("non-finite entry in {0}")]
    NonFiniteInput(&'static str),
    #[error("simplex hit the iteration limit after {0} steps; numerically degenerate input")]
    IterationLimit(u64),
    #[error("basis factorization became singular; numerically degenerate input")]
    SingularBasis,
    #[error("LP reported unbounded descent on a loss bounded below; formulation bug")]
    Unbounded,
}

/// Column-major regressor matrix. Columns are the ensemble members (or any
/// other regressors); rows are calibration observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>, // column j occupies data[j*rows .. (j+1)*rows]
}

impl DesignMatrix {
    /// Builds from column slices; every column must have `rows` finite values.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self, SolverError> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(SolverError::RaggedColumn { column: j, len: col.len(), rows });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFiniteInput("design matrix"));
            }
            data.extend_from_slice(col);
        }
        Ok(Self { rows, cols: columns.len(), data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Linear predictor `intercept + x_row . coefficients` for one row.
    pub fn predict_row(&self, row: usize, intercept: f64, coefficients: &[f64]) -> f64 {
        debug_assert_eq!(coefficients.len(), self.cols);
        let mut fit = intercept;
        for (j, b) in coefficients.iter().enumerate() {
            if *b != 0.0 {
                fit += b * self.column(j)[row];
            }
        }
        fit
    }
}

/// One quantile regression instance.
#[derive(Debug, Clone)]
pub struct QrProblem<'a> {
    pub design: &'a DesignMatrix,
    pub targets: &'a [f64],
    pub tau: f64,
    pub regime: Regime,
}

impl QrProblem<'_> {
    pub fn validate(&self) -> Result<(), SolverError> {
        let (t, m) = (self.design.rows(), self.design.cols());
        if self.targets.len() != t {
            return Err(SolverError::ShapeMismatch { targets: self.targets.len(), rows: t });
        }
        if t < m + 2 {
            return Err(SolverError::TooFewRows { t, m });
        }
        if self.targets.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteInput("targets"));
        }
        check_tau(self.tau)?;
        if let Regime::LassoPenalized(lambda) = self.regime {
            check_penalty(lambda)?;
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<(), SolverError> {
    if !(tau.is_finite() && 0.0 < tau && tau < 1.0) {
        return Err(SolverError::BadTau(tau));
    }
    Ok(())
}

fn check_penalty(lambda: f64) -> Result<(), SolverError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(SolverError::BadPenalty(lambda));
    }
    Ok(())
}

/// Slopes with magnitude above this count as selected in `nonzero_count`.
pub const ZERO_THRESHOLD: f64 = 1e-7;

/// A fitted quantile regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrSolution {
    pub tau: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Total pinball loss of the fit on the calibration data. For penalized
    /// regimes this excludes the penalty term.
    pub objective: f64,
    /// Number of slopes with `|beta_j| > ZERO_THRESHOLD`.
    pub nonzero_count: usize,
}

impl QrSolution {
    fn from_fit(
        design: &DesignMatrix,
        targets: &[f64],
        tau: f64,
        intercept: f64,
        coefficients: Vec<f64>,
    ) -> Self {
        let mut objective = 0.0;
        for (row, &y) in targets.iter().enumerate() {
            objective += pinball(tau, design.predict_row(row, intercept, &coefficients), y);
        }
        let nonzero_count =
            coefficients.iter().filter(|b| b.abs() > ZERO_THRESHOLD).count();
        Self { tau, intercept, coefficients, objective, nonzero_count }
    }
}

fn simplex_for<'a>(
    design: &'a DesignMatrix,
    targets: &'a [f64],
    tau: f64,
    regime: Regime,
) -> Result<Simplex<'a>, SolverError> {
    let (nonneg, penalty) = match regime {
        Regime::Unconstrained => (false, 0.0),
        Regime::Isotonic => (true, 0.0),
        Regime::LassoPenalized(lambda) => (false, lambda),
    };
    Simplex::new(design, targets, tau, nonneg, penalty)
}

/// Solves one quantile regression to optimality.
pub fn solve(problem: &QrProblem) -> Result<QrSolution, SolverError> {
    problem.validate()?;
    let mut sx = simplex_for(problem.design, problem.targets, problem.tau, problem.regime)?;
    sx.optimize()?;
    let (intercept, coefficients) = sx.extract();
    Ok(QrSolution::from_fit(problem.design, problem.targets, problem.tau, intercept, coefficients))
}

/// Solves the same instance at every level in `taus`, warm-starting each fit
/// from the previous optimal basis. Changing tau only moves objective
/// coefficients, so the basis stays feasible and successive levels typically
/// re-optimize in a handful of pivots — far cheaper than independent solves.
/// Results are identical to per-level [`solve`] up to degenerate ties.
pub fn solve_tau_path(
    design: &DesignMatrix,
    targets: &[f64],
    regime: Regime,
    taus: &[f64],
) -> Result<Vec<QrSolution>, SolverError> {
    let Some(&first) = taus.first() else {
        return Ok(Vec::new());
    };
    for &tau in taus {
        check_tau(tau)?;
    }
    QrProblem { design, targets, tau: first, regime }.validate()?;
    let mut sx = simplex_for(design, targets, first, regime)?;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        sx.set_tau(tau);
        sx.optimize()?;
        let (intercept, coefficients) = sx.extract();
        out.push(QrSolution::from_fit(design, targets, tau, intercept, coefficients));
    }
    Ok(out)
}

/// Default penalty grid: 20 values log-spaced over [1e-2, 1e1].
pub fn default_penalty_grid() -> Vec<f64> {
    let n = 20;
    (0..n)
        .map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Schwarz information criterion for a fitted penalty candidate: log mean
/// pinball loss plus `nonzero_count * ln(T) / (2 T)`. The loss enters
/// unpenalized; the penalty's role is only to produce the candidate fits.
pub fn bic(objective: f64, nonzero_count: usize, t: usize) -> f64 {
    let t = t as f64;
    (objective / t).ln() + nonzero_count as f64 * t.ln() / (2.0 * t)
}

/// Fits the penalized regime at every grid value (each solved independently)
/// and returns the fit minimizing [`bic`], together with the chosen penalty.
/// Ties prefer the larger penalty, i.e. the sparser model.
pub fn solve_lasso_path(
    design: &DesignMatrix,
    targets: &[f64],
    tau: f64,
    grid: &[f64],
) -> Result<(QrSolution, f64), SolverError> {
    if grid.is_empty() {
        return Err(SolverError::EmptyPenaltyGrid);
    }
    let mut lambdas = grid.to_vec();
    for &l in &lambdas {
        check_penalty(l)?;
    }
    lambdas.sort_by(f64::total_cmp);
    let mut best: Option<(f64, QrSolution, f64)> = None;
    for &lambda in &lambdas {
        let solution = solve(&QrProblem {
            design,
            targets,
            tau,
            regime: Regime::LassoPenalized(lambda),
        })?;
        let score = bic(solution.objective, solution.nonzero_count, targets.len());
        // `<=` so that later (larger) penalties win ties.
        if best.as_ref().map_or(true, |(b, _, _)| score <= *b) {
            best = Some((score, solution, lambda));
        }
    }
    let (_, solution, lambda) = best.expect("nonempty grid");
    Ok((solution, lambda))
}

/// Penalty selection for a whole percentile sweep: every grid penalty is fit
/// once across all of `taus` with a warm-started path, then the BIC choice of
/// [`solve_lasso_path`] is applied per level. One entry per tau.
pub fn lasso_tau_paths(
    design: &DesignMatrix,
    targets: &[f64],
    taus: &[f64],
    grid: &[f64],
) -> Result<Vec<(QrSolution, f64)>, SolverError> {
    if grid.is_empty() {
        return Err(SolverError::EmptyPenaltyGrid);
    }
    let mut lambdas = grid.to_vec();
    for &l in &lambdas {
        check_penalty(l)?;
    }
    lambdas.sort_by(f64::total_cmp);
    let mut per_lambda = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        per_lambda.push(solve_tau_path(
            design,
            targets,
            Regime::LassoPenalized(lambda),
            taus,
        )?);
    }
    let t = targets.len();
    let mut out = Vec::with_capacity(taus.len());
    for ti in 0..taus.len() {
        let mut best: Option<(f64, usize)> = None;
        for (li, fits) in per_lambda.iter().enumerate() {
            let s = &fits[ti];
            let score = bic(s.objective, s.nonzero_count, t);
            if best.map_or(true, |(b, _)| score <= b) {
                best = Some((score, li));
            }
        }
        let (_, li) = best.expect("nonempty grid");
        out.push((per_lambda[li][ti].clone(), lambdas[li]));
    }
    Ok(out)
}

/// Size `(variables, constraints)` of the standard-form LP for `members`
/// regressors over a window of `window_len` observations. The nonnegative
/// regime needs no negative slope splits, hence the smaller count.
pub fn standard_form_size(members: usize, window_len: usize, regime: Regime) -> (usize, usize) {
    let vars = match regime {
        Regime::Unconstrained | Regime::LassoPenalized(_) => 2 * (members + window_len + 1),
        Regime::Isotonic => members + 2 * (window_len + 1),
    };
    (vars, window_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty_design(rows: usize) -> DesignMatrix {
        DesignMatrix::from_columns(rows, &[]).unwrap()
    }

    #[test]
    fn intercept_only_median_hits_sample_median() {
        let design = empty_design(5);
        let targets = [1.0, 2.0, 3.0, 4.0, 5.0];
        let sol = solve(&QrProblem {
            design: &design,
            targets: &targets,
            tau: 0.5,
            regime: Regime::Unconstrained,
        })
        .unwrap();
        assert!((sol.intercept - 3.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert_eq!(sol.nonzero_count, 0);
        assert!(sol.coefficients.is_empty());
    }

    #[test]
    fn exact_linear_relation_gives_zero_loss() {
        let xs: Vec<f64> = (1..=8).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let design = DesignMatrix::from_columns(8, &[xs]).unwrap();
        for tau in [0.1, 0.5, 0.9] {
            let sol = solve(&QrProblem {
                design: &design,
                targets: &ys,
                tau,
                regime: Regime::Unconstrained,
            })
            .unwrap();
            assert!(sol.objective.abs() < 1e-10, "tau {tau}: {}", sol.objective);
            assert!((sol.intercept).abs() < 1e-9);
            assert!((sol.coefficients[0] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nonnegative_regime_pins_negative_relation_at_zero_slope() {
        // Targets strictly decreasing in the regressor: the best nonnegative
        // slope is 0 and the intercept falls back to the sample median.
        let xs: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = vec![-1.0, -2.0, -3.0, -4.0];
        let design = DesignMatrix::from_columns(4, &[xs]).unwrap();
        let free = solve(&QrProblem {
            design: &design,
            targets: &ys,
            tau: 0.5,
            regime: Regime::Unconstrained,
        })
        .unwrap();
        assert!(free.objective.abs() < 1e-10);
        let pinned = solve(&QrProblem {
            design: &design,
            targets: &ys,
            tau: 0.5,
            regime: Regime::Isotonic,
        })
        .unwrap();
        assert_eq!(pinned.coefficients[0], 0.0);
        assert!((-3.0..=-2.0).contains(&pinned.intercept), "median interval");
        assert!((pinned.objective - 2.0).abs() < 1e-10);
        assert!(pinned.objective > free.objective);
    }

    #[test]
    fn nonnegative_slopes_are_exactly_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let t = rng.gen_range(8..20);
            let m = rng.gen_range(1..4);
            let cols: Vec<Vec<f64>> =
                (0..m).map(|_| (0..t).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
            let ys: Vec<f64> = (0..t).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let design = DesignMatrix::from_columns(t, &cols).unwrap();
            let sol = solve(&QrProblem {
                design: &design,
                targets: &ys,
                tau: rng.gen_range(0.05..0.95),
                regime: Regime::Isotonic,
            })
            .unwrap();
            for b in &sol.coefficients {
                assert!(*b >= 0.0, "slope {b} must be exactly nonnegative");
            }
        }
    }

    #[test]
    fn translation_shifts_intercept_and_preserves_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let t = rng.gen_range(6..14);
            let m = rng.gen_range(0..3);
            let cols: Vec<Vec<f64>> =
                (0..m).map(|_| (0..t).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
            let ys: Vec<f64> = (0..t).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let shift = rng.gen_range(-20.0..20.0);
            let shifted: Vec<f64> = ys.iter().map(|y| y + shift).collect();
            let design = DesignMatrix::from_columns(t, &cols).unwrap();
            let tau = rng.gen_range(0.1..0.9);
            for regime in [Regime::Unconstrained, Regime::Isotonic] {
                let base =
                    solve(&QrProblem { design: &design, targets: &ys, tau, regime }).unwrap();
                let moved =
                    solve(&QrProblem { design: &design, targets: &shifted, tau, regime })
                        .unwrap();
                // The optimal objective is translation invariant, and the
                // translated base solution must attain it.
                assert!((moved.objective - base.objective).abs() < 1e-9);
                let mut translated_loss = 0.0;
                for (row, &y) in shifted.iter().enumerate() {
                    let fit =
                        design.predict_row(row, base.intercept + shift, &base.coefficients);
                    translated_loss += pinball(tau, fit, y);
                }
                assert!((translated_loss - moved.objective).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tau_path_matches_cold_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 40;
        let cols: Vec<Vec<f64>> =
            (0..3).map(|_| (0..t).map(|_| rng.gen_range(0.0..50.0)).collect()).collect();
        let ys: Vec<f64> = (0..t).map(|i| cols[0][i] + rng.gen_range(-4.0..4.0)).collect();
        let design = DesignMatrix::from_columns(t, &cols).unwrap();
        let taus: Vec<f64> = (1..=19).map(|i| i as f64 / 20.0).collect();
        for regime in [Regime::Unconstrained, Regime::Isotonic, Regime::LassoPenalized(0.3)] {
            let path = solve_tau_path(&design, &ys, regime, &taus).unwrap();
            assert_eq!(path.len(), taus.len());
            for (i, &tau) in taus.iter().enumerate() {
                let cold =
                    solve(&QrProblem { design: &design, targets: &ys, tau, regime }).unwrap();
                let warm = &path[i];
                // Optima agree; the argmin may differ only on degenerate ties.
                let scale = 1.0 + cold.objective.abs();
                assert!(
                    (warm.objective - cold.objective).abs() < 1e-8 * scale,
                    "tau {tau}: warm {} vs cold {}",
                    warm.objective,
                    cold.objective
                );
            }
        }
    }

    #[test]
    fn penalty_shrinks_toward_intercept_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t = 60;
        let cols: Vec<Vec<f64>> =
            (0..4).map(|_| (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<f64> =
            (0..t).map(|i| 1.5 * cols[1][i] + rng.gen_range(-0.5..0.5)).collect();
        let design = DesignMatrix::from_columns(t, &cols).unwrap();
        let huge = solve(&QrProblem {
            design: &design,
            targets: &ys,
            tau: 0.5,
            regime: Regime::LassoPenalized(1e6),
        })
        .unwrap();
        assert_eq!(huge.nonzero_count, 0, "a huge penalty must zero every slope");
        // With all slopes at zero the fit is the intercept-only median fit.
        let median_fit = solve(&QrProblem {
            design: &empty_design(t),
            targets: &ys,
            tau: 0.5,
            regime: Regime::Unconstrained,
        })
        .unwrap();
        assert!((huge.objective - median_fit.objective).abs() < 1e-9);
    }

    #[test]
    fn penalty_path_monotonicity() {
        // Growing the penalty can never improve the unpenalized pinball loss
        // and can never expand the coefficient L1 norm. (The support size is
        // deliberately not checked: nonzero counts may fluctuate along an L1
        // path even while the norm shrinks.)
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let t = 30;
            let m = rng.gen_range(1..4);
            let cols: Vec<Vec<f64>> =
                (0..m).map(|_| (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let ys: Vec<f64> =
                (0..t).map(|i| 0.8 * cols[0][i] + rng.gen_range(-1.0..1.0)).collect();
            let design = DesignMatrix::from_columns(t, &cols).unwrap();
            let grid = default_penalty_grid();
            let mut prev_obj = -f64::INFINITY;
            let mut prev_norm = f64::INFINITY;
            for &lambda in &grid {
                let sol = solve(&QrProblem {
                    design: &design,
                    targets: &ys,
                    tau: 0.5,
                    regime: Regime::LassoPenalized(lambda),
                })
                .unwrap();
                let norm: f64 = sol.coefficients.iter().map(|b| b.abs()).sum();
                assert!(
                    sol.objective >= prev_obj - 1e-9,
                    "pinball loss must not improve as the penalty grows"
                );
                assert!(
                    norm <= prev_norm + 1e-7,
                    "coefficient norm must not grow with the penalty ({norm} after {prev_norm})"
                );
                prev_obj = sol.objective;
                prev_norm = norm;
            }
        }
    }

    #[test]
    fn lasso_path_selection_is_consistent_between_apis() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let t = 50;
        let cols: Vec<Vec<f64>> =
            (0..5).map(|_| (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<f64> =
            (0..t).map(|i| 2.0 * cols[2][i] + rng.gen_range(-0.3..0.3)).collect();
        let design = DesignMatrix::from_columns(t, &cols).unwrap();
        let grid = default_penalty_grid();
        let taus = [0.25, 0.5, 0.75];
        let swept = lasso_tau_paths(&design, &ys, &taus, &grid).unwrap();
        for (i, &tau) in taus.iter().enumerate() {
            let (single, lambda) = solve_lasso_path(&design, &ys, tau, &grid).unwrap();
            assert_eq!(swept[i].1, lambda, "tau {tau}: same penalty chosen");
            assert!(
                (swept[i].0.objective - single.objective).abs() < 1e-8,
                "tau {tau}: same selected objective"
            );
        }
    }

    #[test]
    fn singleton_grid_reduces_to_plain_penalized_solve() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 0.5 * x).collect();
        let design = DesignMatrix::from_columns(12, &[xs]).unwrap();
        let (sol, lambda) = solve_lasso_path(&design, &ys, 0.5, &[0.07]).unwrap();
        assert_eq!(lambda, 0.07);
        let direct = solve(&QrProblem {
            design: &design,
            targets: &ys,
            tau: 0.5,
            regime: Regime::LassoPenalized(0.07),
        })
        .unwrap();
        assert!((sol.objective - direct.objective).abs() < 1e-12);
        assert_eq!(sol.nonzero_count, direct.nonzero_count);
    }

    #[test]
    fn pure_noise_regressors_are_rarely_selected() {
        // With targets independent of the regressors, BIC should overwhelmingly
        // choose the empty model on the default grid.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut zero_count = 0;
        let draws = 100;
        for _ in 0..draws {
            let t = 200;
            let cols: Vec<Vec<f64>> =
                (0..3).map(|_| (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let ys: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let design = DesignMatrix::from_columns(t, &cols).unwrap();
            let (sol, _) =
                solve_lasso_path(&design, &ys, 0.5, &default_penalty_grid()).unwrap();
            if sol.nonzero_count == 0 {
                zero_count += 1;
            }
        }
        assert!(zero_count > draws / 2, "median selected support must be empty: {zero_count}");
    }

    #[test]
    fn objective_matches_recomputed_pinball_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let t = rng.gen_range(10..30);
            let m = rng.gen_range(0..4);
            let cols: Vec<Vec<f64>> =
                (0..m).map(|_| (0..t).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
            let ys: Vec<f64> = (0..t).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let design = DesignMatrix::from_columns(t, &cols).unwrap();
            let tau = rng.gen_range(0.05..0.95);
            let sol = solve(&QrProblem {
                design: &design,
                targets: &ys,
                tau,
                regime: Regime::Unconstrained,
            })
            .unwrap();
            let mut loss = 0.0;
            for (row, &y) in ys.iter().enumerate() {
                loss += pinball(tau, design.predict_row(row, sol.intercept, &sol.coefficients), y);
            }
            assert!((loss - sol.objective).abs() <= 1e-8 * (1.0 + loss.abs()));
        }
    }

    #[test]
    fn standard_form_sizes() {
        assert_eq!(standard_form_size(25, 364, Regime::Unconstrained), (780, 364));
        assert_eq!(standard_form_size(25, 364, Regime::LassoPenalized(0.1)), (780, 364));
        assert_eq!(standard_form_size(25, 364, Regime::Isotonic), (755, 364));
        assert_eq!(standard_form_size(0, 4, Regime::Unconstrained), (10, 4));
        assert_eq!(standard_form_size(0, 4, Regime::Isotonic), (10, 4));
        assert_eq!(standard_form_size(1, 10, Regime::Unconstrained), (24, 10));
    }

    #[test]
    fn validation_rejects_malformed_problems() {
        let design = DesignMatrix::from_columns(4, &[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let ys = [1.0, 2.0, 3.0, 4.0];
        let ok = QrProblem { design: &design, targets: &ys, tau: 0.5, regime: Regime::Unconstrained };
        assert!(ok.validate().is_ok());
        let bad_tau = QrProblem { tau: 1.0, ..ok.clone() };
        assert_eq!(bad_tau.validate(), Err(SolverError::BadTau(1.0)));
        let bad_tau = QrProblem { tau: 0.0, ..ok.clone() };
        assert!(bad_tau.validate().is_err());
        let bad_pen = QrProblem { regime: Regime::LassoPenalized(-1.0), ..ok.clone() };
        assert_eq!(bad_pen.validate(), Err(SolverError::BadPenalty(-1.0)));
        let short = QrProblem { targets: &ys[..2], ..ok.clone() };
        assert!(matches!(short.validate(), Err(SolverError::ShapeMismatch { .. })));
        // T = M + 1 is too few even with matching shapes.
        let design3 = DesignMatrix::from_columns(2, &[vec![1.0, 2.0]]).unwrap();
        let ys3 = [1.0, 2.0];
        let narrow =
            QrProblem { design: &design3, targets: &ys3, tau: 0.5, regime: Regime::Unconstrained };
        assert_eq!(narrow.validate(), Err(SolverError::TooFewRows { t: 2, m: 1 }));
        assert!(matches!(
            DesignMatrix::from_columns(3, &[vec![1.0, 2.0]]),
            Err(SolverError::RaggedColumn { .. })
        ));
        assert!(matches!(
            DesignMatrix::from_columns(2, &[vec![1.0, f64::NAN]]),
            Err(SolverError::NonFiniteInput(_))
        ));
        assert_eq!(
            solve_lasso_path(&design, &ys, 0.5, &[]),
            Err(SolverError::EmptyPenaltyGrid)
        );
    }

    #[test]
    fn default_grid_shape() {
        let grid = default_penalty_grid();
        assert_eq!(grid.len(), 20);
        assert!((grid[0] - 0.01).abs() < 1e-12);
        assert!((grid[19] - 10.0).abs() < 1e-9);
        assert!(grid.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn bic_prefers_fit_until_complexity_dominates() {
        // Same T: halving the loss beats one extra coefficient only when the
        // loss drop outweighs ln(T)/(2T).
        let t = 364;
        let base = bic(100.0, 0, t);
        let better_fit = bic(90.0, 1, t);
        assert!(better_fit < base);
        let marginal = bic(99.9, 1, t);
        assert!(marginal > base);
        // Zero loss is the strongest possible candidate.
        assert_eq!(bic(0.0, 3, t), f64::NEG_INFINITY);
    }
}
