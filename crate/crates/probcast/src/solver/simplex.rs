//! Revised primal simplex specialized to pinball-loss LPs.
//!
//! The LP in standard form has one equality row per calibration observation,
//!
//! ```text
//!   beta_0 + sum_j beta_j x_{t,j} + u_t_plus - u_t_minus = y_t,   vars >= 0,
//! ```
//!
//! with split variables for the sign-free coefficients (a single nonnegative
//! variable per slope under the nonnegative-slope regime) and residual
//! variables priced `tau` / `1 - tau`. Any basis of the T-row constraint
//! matrix consists of r residual (signed unit) columns and k = T - r
//! coefficient columns, so after permuting rows and columns it looks like
//!
//! ```text
//!   B = [ D  F ]    D = diag(+-1) over residual-covered rows,
//!       [ 0  G ]    G = k x k coefficient block on the remaining rows,
//! ```
//!
//! and solves with B or B^T reduce to a k x k LU solve plus O(T k) scatter
//! work, with k <= M + 1 always. A pivot therefore costs O((M + k) T + k^3)
//! rather than the O(T^2) of a general basis update; this is what makes
//! per-percentile sweeps and penalty grids affordable at T = 364.
//!
//! Pivoting uses Dantzig pricing (most negative reduced cost, lowest variable
//! index on ties) and falls back to Bland's least-index rule after a run of
//! degenerate pivots, which restores the termination guarantee without paying
//! Bland's slow convergence on every step. The starting basis picks
//! `u_t_plus` or `u_t_minus` per row according to the sign of `y_t`, so no
//! phase-1 is ever needed.

use super::{DesignMatrix, SolverError};

const UNSET: usize = usize::MAX;
/// Reduced-cost threshold for entering candidates, relative to data scale.
const ENTER_REL_EPS: f64 = 1e-11;
/// Eligibility threshold for ratio-test pivots, relative to column scale.
const PIVOT_REL_EPS: f64 = 1e-9;
/// Basic values are recomputed from scratch this often to cap drift.
const REFRESH_EVERY: u64 = 128;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: u32 = 50;

/// What a variable's constraint column looks like.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    /// `sign` times the intercept column (`coef == 0`, all ones) or design
    /// column `coef - 1`.
    Coef { coef: usize, sign: f64 },
    /// `sign` times the unit vector for `row` (a residual variable).
    Unit { row: usize, sign: f64 },
}

/// Revised simplex state for one (design, targets) instance. The probability
/// level can be re-set between optimizations to sweep a percentile grid from
/// a warm basis.
pub struct Simplex<'a> {
    design: &'a DesignMatrix,
    targets: &'a [f64],
    t: usize,
    m: usize,
    tau: f64,
    penalty: f64,
    nonneg_slopes: bool,
    n_vars: usize,
    unit_base: usize,
    // Basis state.
    basis: Vec<usize>,  // position -> variable
    pos_of: Vec<usize>, // variable -> position, UNSET if nonbasic
    x_b: Vec<f64>,      // basic values by position
    // Block structure, rebuilt after every pivot.
    row_unit_pos: Vec<usize>, // row -> position of covering residual basic, or UNSET
    free_rows: Vec<usize>,    // rows owned by coefficient basics (G row order)
    dense_pos: Vec<usize>,    // positions of coefficient basics (G column order)
    lu: Lu,
    // Scratch buffers.
    z: Vec<f64>,     // duals
    w: Vec<f64>,     // B^-1 a_entering, by position
    acc: Vec<f64>,   // coefficient-basic combination, by row
    a_col: Vec<f64>, // entering column, by row
    small: Vec<f64>, // k-vector for LU solves
    // Tolerance scale and pivot accounting.
    data_scale: f64,
    pivots: u64,
    degen_run: u32,
    bland: bool,
}

impl<'a> Simplex<'a> {
    /// Builds the standard-form LP and the sign-of-target starting basis.
    /// Inputs are assumed validated (finite, consistent shapes, T >= M + 2).
    pub fn new(
        design: &'a DesignMatrix,
        targets: &'a [f64],
        tau: f64,
        nonneg_slopes: bool,
        penalty: f64,
    ) -> Result<Self, SolverError> {
        let t = targets.len();
        let m = design.cols();
        let unit_base = if nonneg_slopes { m + 2 } else { 2 * (m + 1) };
        let n_vars = unit_base + 2 * t;
        let mut data_scale: f64 = 1.0;
        for &y in targets {
            data_scale = data_scale.max(y.abs());
        }
        for j in 0..m {
            for &x in design.column(j) {
                data_scale = data_scale.max(x.abs());
            }
        }
        let mut sx = Self {
            design,
            targets,
            t,
            m,
            tau,
            penalty,
            nonneg_slopes,
            n_vars,
            unit_base,
            basis: Vec::with_capacity(t),
            pos_of: vec![UNSET; n_vars],
            x_b: vec![0.0; t],
            row_unit_pos: vec![UNSET; t],
            free_rows: Vec::new(),
            dense_pos: Vec::new(),
            lu: Lu::empty(),
            z: vec![0.0; t],
            w: vec![0.0; t],
            acc: vec![0.0; t],
            a_col: vec![0.0; t],
            small: Vec::new(),
            data_scale,
            pivots: 0,
            degen_run: 0,
            bland: false,
        };
        for row in 0..t {
            // u_plus for nonnegative targets, u_minus otherwise.
            let var = sx.unit_base + 2 * row + usize::from(targets[row] < 0.0);
            sx.pos_of[var] = row;
            sx.basis.push(var);
        }
        sx.refresh_structure()?;
        sx.refresh_values();
        Ok(sx)
    }

    /// Number of LP variables in standard form.
    pub fn num_vars(&self) -> usize {
        self.n_vars
    }

    /// Number of equality constraints (one per observation).
    pub fn num_constraints(&self) -> usize {
        self.t
    }

    pub fn pivot_count(&self) -> u64 {
        self.pivots
    }

    /// Swaps in a new probability level. Only objective coefficients change,
    /// so the current basis stays primal feasible and the next
    /// [`Simplex::optimize`] resumes from it.
    pub fn set_tau(&mut self, tau: f64) {
        self.tau = tau;
        self.degen_run = 0;
        self.bland = false;
    }

    fn column_of(&self, var: usize) -> Column {
        debug_assert!(var < self.n_vars);
        if var >= self.unit_base {
            let r = var - self.unit_base;
            Column::Unit { row: r / 2, sign: if r % 2 == 0 { 1.0 } else { -1.0 } }
        } else if self.nonneg_slopes {
            if var < 2 {
                Column::Coef { coef: 0, sign: if var == 0 { 1.0 } else { -1.0 } }
            } else {
                Column::Coef { coef: var - 1, sign: 1.0 }
            }
        } else {
            Column::Coef { coef: var / 2, sign: if var % 2 == 0 { 1.0 } else { -1.0 } }
        }
    }

    fn cost_of(&self, var: usize) -> f64 {
        match self.column_of(var) {
            Column::Unit { sign, .. } => {
                if sign > 0.0 {
                    self.tau
                } else {
                    1.0 - self.tau
                }
            }
            Column::Coef { coef: 0, .. } => 0.0,
            Column::Coef { .. } => self.penalty,
        }
    }

    /// Value of structural column `coef` (0 = intercept) at `row`.
    #[inline]
    fn structural(&self, coef: usize, row: usize) -> f64 {
        if coef == 0 {
            1.0
        } else {
            self.design.column(coef - 1)[row]
        }
    }

    /// Runs primal simplex to optimality from the current basis.
    pub fn optimize(&mut self) -> Result<(), SolverError> {
        let cap = 20_000 + 200 * (self.t + self.m + 2) as u64;
        let mut steps = 0u64;
        loop {
            steps += 1;
            if steps > cap {
                return Err(SolverError::IterationLimit(steps));
            }
            self.compute_duals();
            let Some(entering) = self.price() else {
                self.refresh_values();
                return Ok(());
            };
            let a_max = self.ftran(entering);
            let Some((p_out, theta)) = self.ratio_test(a_max) else {
                // A descent direction with no blocking variable cannot happen
                // for a loss bounded below; treat as a formulation bug.
                return Err(SolverError::Unbounded);
            };
            self.pivot(entering, p_out, theta)?;
        }
    }

    /// Duals z solving B^T z = c_B, exploiting the [D F; 0 G] structure:
    /// residual-covered rows are read off directly, the rest solve G^T.
    fn compute_duals(&mut self) {
        for row in 0..self.t {
            let p = self.row_unit_pos[row];
            self.z[row] = if p == UNSET {
                0.0 // free rows filled below; zero keeps full dots correct
            } else {
                match self.column_of(self.basis[p]) {
                    Column::Unit { sign, .. } => {
                        if sign > 0.0 {
                            self.tau
                        } else {
                            -(1.0 - self.tau)
                        }
                    }
                    Column::Coef { .. } => unreachable!("unit position holds unit column"),
                }
            };
        }
        let k = self.dense_pos.len();
        if k == 0 {
            return;
        }
        self.small.clear();
        for i in 0..k {
            let var = self.basis[self.dense_pos[i]];
            let Column::Coef { coef, sign } = self.column_of(var) else {
                unreachable!("dense position holds coefficient column")
            };
            // z is zero on free rows, so a full-length dot sums covered rows.
            let dot = if coef == 0 {
                self.z.iter().sum::<f64>()
            } else {
                dot(self.design.column(coef - 1), &self.z)
            };
            self.small.push(self.cost_of(var) - sign * dot);
        }
        self.lu.solve_transposed(&mut self.small);
        for (i, &row) in self.free_rows.iter().enumerate() {
            self.z[row] = self.small[i];
        }
    }

    /// Entering-variable selection. Returns `None` at optimality.
    fn price(&self) -> Option<usize> {
        let eps = ENTER_REL_EPS * self.data_scale;
        let mut best: Option<(f64, usize)> = None;
        let consider = |reduced: f64, var: usize, best: &mut Option<(f64, usize)>| -> bool {
            if reduced < -eps && best.map_or(true, |(d, _)| reduced < d) {
                *best = Some((reduced, var));
                return true;
            }
            false
        };
        // Coefficient splits first, then residuals: ascending variable index,
        // so equal reduced costs resolve to the lowest index in both modes.
        for coef in 0..=self.m {
            let (plus, minus) = if self.nonneg_slopes {
                if coef == 0 {
                    (0, Some(1))
                } else {
                    (coef + 1, None)
                }
            } else {
                (2 * coef, Some(2 * coef + 1))
            };
            let base_cost = if coef == 0 { 0.0 } else { self.penalty };
            let dot = if coef == 0 {
                self.z.iter().sum::<f64>()
            } else {
                dot(self.design.column(coef - 1), &self.z)
            };
            if self.pos_of[plus] == UNSET && consider(base_cost - dot, plus, &mut best) && self.bland
            {
                return Some(plus);
            }
            if let Some(minus) = minus {
                if self.pos_of[minus] == UNSET
                    && consider(base_cost + dot, minus, &mut best)
                    && self.bland
                {
                    return Some(minus);
                }
            }
        }
        for row in 0..self.t {
            let plus = self.unit_base + 2 * row;
            if self.pos_of[plus] == UNSET && consider(self.tau - self.z[row], plus, &mut best) {
                if self.bland {
                    return Some(plus);
                }
            }
            let minus = plus + 1;
            if self.pos_of[minus] == UNSET
                && consider(1.0 - self.tau + self.z[row], minus, &mut best)
            {
                if self.bland {
                    return Some(minus);
                }
            }
        }
        best.map(|(_, var)| var)
    }

    /// Computes w = B^-1 a for the entering column into `self.w` (indexed by
    /// basis position) and returns max |a| for pivot tolerances.
    fn ftran(&mut self, entering: usize) -> f64 {
        let mut a_max: f64 = 0.0;
        match self.column_of(entering) {
            Column::Unit { row, sign } => {
                self.a_col.fill(0.0);
                self.a_col[row] = sign;
                a_max = 1.0;
            }
            Column::Coef { coef, sign } => {
                for row in 0..self.t {
                    let v = sign * self.structural(coef, row);
                    self.a_col[row] = v;
                    a_max = a_max.max(v.abs());
                }
            }
        }
        let k = self.dense_pos.len();
        self.small.clear();
        for &row in &self.free_rows {
            self.small.push(self.a_col[row]);
        }
        self.lu.solve(&mut self.small);
        self.w.fill(0.0);
        self.acc.fill(0.0);
        for i in 0..k {
            let p = self.dense_pos[i];
            let u = self.small[i];
            self.w[p] = u;
            if u == 0.0 {
                continue;
            }
            let Column::Coef { coef, sign } = self.column_of(self.basis[p]) else {
                unreachable!()
            };
            let su = sign * u;
            if coef == 0 {
                for a in self.acc.iter_mut() {
                    *a += su;
                }
            } else {
                for (a, x) in self.acc.iter_mut().zip(self.design.column(coef - 1)) {
                    *a += su * x;
                }
            }
        }
        for row in 0..self.t {
            let p = self.row_unit_pos[row];
            if p != UNSET {
                let Column::Unit { sign, .. } = self.column_of(self.basis[p]) else {
                    unreachable!()
                };
                // D^-1 = D for a +-1 diagonal.
                self.w[p] = sign * (self.a_col[row] - self.acc[row]);
            }
        }
        a_max
    }

    /// Smallest-ratio leaving position. Among near-ties, Dantzig mode prefers
    /// the largest pivot element for stability; Bland mode the lowest basic
    /// variable index, as its termination proof requires.
    fn ratio_test(&self, a_max: f64) -> Option<(usize, f64)> {
        for eps in [PIVOT_REL_EPS * (1.0 + a_max), 1e-12] {
            let mut min_ratio = f64::INFINITY;
            for p in 0..self.t {
                if self.w[p] > eps {
                    min_ratio = min_ratio.min(self.x_b[p].max(0.0) / self.w[p]);
                }
            }
            if !min_ratio.is_finite() {
                continue; // no eligible pivot at this tolerance
            }
            let tie = min_ratio * 1e-9 + 1e-12 * self.data_scale;
            let mut chosen: Option<usize> = None;
            for p in 0..self.t {
                if self.w[p] > eps && self.x_b[p].max(0.0) / self.w[p] <= min_ratio + tie {
                    let better = match chosen {
                        None => true,
                        Some(c) => {
                            if self.bland {
                                self.basis[p] < self.basis[c]
                            } else {
                                self.w[p] > self.w[c]
                            }
                        }
                    };
                    if better {
                        chosen = Some(p);
                    }
                }
            }
            if let Some(p) = chosen {
                return Some((p, self.x_b[p].max(0.0) / self.w[p]));
            }
        }
        None
    }

    fn pivot(&mut self, entering: usize, p_out: usize, theta: f64) -> Result<(), SolverError> {
        if theta != 0.0 {
            for p in 0..self.t {
                if self.w[p] != 0.0 {
                    self.x_b[p] -= theta * self.w[p];
                    if self.x_b[p] < 0.0 {
                        // Subtraction dust; exact infeasibility is impossible
                        // for the blocking ratio.
                        self.x_b[p] = 0.0;
                    }
                }
            }
        }
        self.x_b[p_out] = theta;
        let leaving = self.basis[p_out];
        self.pos_of[leaving] = UNSET;
        self.basis[p_out] = entering;
        self.pos_of[entering] = p_out;
        self.pivots += 1;
        if theta <= 1e-10 * self.data_scale {
            self.degen_run += 1;
            if self.degen_run >= BLAND_TRIGGER {
                self.bland = true;
            }
        } else {
            self.degen_run = 0;
            self.bland = false;
        }
        self.refresh_structure()?;
        if self.pivots % REFRESH_EVERY == 0 {
            self.refresh_values();
        }
        Ok(())
    }

    /// Rebuilds the residual/coefficient split and refactorizes G.
    fn refresh_structure(&mut self) -> Result<(), SolverError> {
        self.row_unit_pos.fill(UNSET);
        self.dense_pos.clear();
        for p in 0..self.t {
            match self.column_of(self.basis[p]) {
                Column::Unit { row, .. } => {
                    debug_assert_eq!(self.row_unit_pos[row], UNSET, "two residuals on one row");
                    self.row_unit_pos[row] = p;
                }
                Column::Coef { .. } => self.dense_pos.push(p),
            }
        }
        self.free_rows.clear();
        for row in 0..self.t {
            if self.row_unit_pos[row] == UNSET {
                self.free_rows.push(row);
            }
        }
        let k = self.dense_pos.len();
        debug_assert_eq!(k, self.free_rows.len());
        let mut g = vec![0.0; k * k];
        for (i, &p) in self.dense_pos.iter().enumerate() {
            let Column::Coef { coef, sign } = self.column_of(self.basis[p]) else {
                unreachable!()
            };
            for (j, &row) in self.free_rows.iter().enumerate() {
                g[j * k + i] = sign * self.structural(coef, row);
            }
        }
        self.lu = Lu::factor(g, k).ok_or(SolverError::SingularBasis)?;
        Ok(())
    }

    /// Recomputes basic values exactly from B x_B = y, clearing incremental
    /// drift; called periodically and before every extraction.
    fn refresh_values(&mut self) {
        let k = self.dense_pos.len();
        self.small.clear();
        for &row in &self.free_rows {
            self.small.push(self.targets[row]);
        }
        self.lu.solve(&mut self.small);
        self.acc.fill(0.0);
        for i in 0..k {
            let p = self.dense_pos[i];
            let u = self.small[i];
            self.x_b[p] = u;
            if u == 0.0 {
                continue;
            }
            let Column::Coef { coef, sign } = self.column_of(self.basis[p]) else {
                unreachable!()
            };
            let su = sign * u;
            if coef == 0 {
                for a in self.acc.iter_mut() {
                    *a += su;
                }
            } else {
                for (a, x) in self.acc.iter_mut().zip(self.design.column(coef - 1)) {
                    *a += su * x;
                }
            }
        }
        for row in 0..self.t {
            let p = self.row_unit_pos[row];
            if p != UNSET {
                let Column::Unit { sign, .. } = self.column_of(self.basis[p]) else {
                    unreachable!()
                };
                let v = sign * (self.targets[row] - self.acc[row]);
                debug_assert!(
                    v > -1e-6 * self.data_scale,
                    "residual basic went infeasible: {v}"
                );
                self.x_b[p] = v.max(0.0);
            }
        }
        // Coefficient basics are sign-restricted too; clamp factorization dust
        // so extracted slopes under the nonnegative regime are exactly >= 0.
        for i in 0..k {
            let p = self.dense_pos[i];
            if self.x_b[p] < 0.0 {
                debug_assert!(
                    self.x_b[p] > -1e-6 * self.data_scale,
                    "coefficient basic went infeasible: {}",
                    self.x_b[p]
                );
                self.x_b[p] = 0.0;
            }
        }
    }

    /// Reads the coefficient vector off the optimal basis. Nonbasic splits
    /// are exactly zero by construction.
    pub fn extract(&mut self) -> (f64, Vec<f64>) {
        self.refresh_values();
        let mut beta = vec![0.0; self.m + 1];
        for p in 0..self.t {
            if let Column::Coef { coef, sign } = self.column_of(self.basis[p]) {
                beta[coef] += sign * self.x_b[p];
            }
        }
        let intercept = beta[0];
        beta.remove(0);
        (intercept, beta)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense LU factorization with row partial pivoting, P A = L U, for the small
/// coefficient block G (k <= M + 1).
struct Lu {
    n: usize,
    a: Vec<f64>, // row-major; L below the diagonal (unit), U on and above
    piv: Vec<usize>,
}

impl Lu {
    fn empty() -> Self {
        Self { n: 0, a: Vec::new(), piv: Vec::new() }
    }

    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut scale: f64 = 1.0;
        for &v in &a {
            scale = scale.max(v.abs());
        }
        let mut piv = vec![0usize; n];
        for i in 0..n {
            let mut p = i;
            let mut best = a[i * n + i].abs();
            for r in i + 1..n {
                let v = a[r * n + i].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-13 * scale {
                return None;
            }
            piv[i] = p;
            if p != i {
                for c in 0..n {
                    a.swap(i * n + c, p * n + c);
                }
            }
            let inv = 1.0 / a[i * n + i];
            for r in i + 1..n {
                let f = a[r * n + i] * inv;
                a[r * n + i] = f;
                if f != 0.0 {
                    for c in i + 1..n {
                        a[r * n + c] -= f * a[i * n + c];
                    }
                }
            }
        }
        Some(Self { n, a, piv })
    }

    /// Solves A x = b in place.
    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            b.swap(i, self.piv[i]);
        }
        for i in 1..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.a[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.a[i * n + j] * b[j];
            }
            b[i] = s / self.a[i * n + i];
        }
    }

    /// Solves A^T x = b in place (A = P^T L U, so U^T y = b, L^T v = y,
    /// x = P^T v).
    fn solve_transposed(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.a[j * n + i] * b[j];
            }
            b[i] = s / self.a[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.a[j * n + i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            b.swap(i, self.piv[i]);
        }
    }
}
