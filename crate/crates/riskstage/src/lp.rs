//! Linear programming kernel: a two-phase primal simplex method with bounded
//! variables over a dense tableau.
//!
//! The solver accepts minimization problems with per-variable bounds
//! (including infinite and free bounds) and sparse `≤` / `≥` / `=` rows. It
//! reports a strict trichotomy — optimal, infeasible, or unbounded — plus an
//! explicit "stalled" error if the pivot budget is exhausted, so callers never
//! mistake a numerical failure for infeasibility.
//!
//! Internally every variable is transformed to `x̃ ≥ 0` (shift, negation, or a
//! free split), rows gain slack/surplus variables plus one artificial each,
//! and phase 1 minimizes the artificial sum. Bland's smallest-index rule is
//! used in both phases; nonbasic variables sitting at finite upper bounds are
//! handled by column flips.
//!
//! [`min_feasible_budget`] bisects the smallest budget `L` for which a
//! caller-built LP is feasible; the cut-generation loops reuse the same
//! bisection engine through [`bisect_budget`].

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const ROW_TOL: f64 = 1e-7;
const BOUND_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("invalid LP: {0}")]
    BadInput(String),
    #[error("simplex stalled: pivot budget of {MAX_PIVOTS} exhausted")]
    Stalled,
    #[error("solution failed the post-check: {0}")]
    PostCheck(String),
    #[error("no feasible budget in the given range")]
    NoFeasibleBudget,
    #[error("budget feasibility is not monotone near {budget}")]
    NonMonotone { budget: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization LP with per-variable bounds and sparse constraint rows.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    /// New problem minimizing `objective`, all variables in `[0, +∞)`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(LpRow {
            coeffs,
            relation,
            rhs,
        });
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        for (i, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::BadInput(format!("objective[{i}] = {c}")));
            }
        }
        for i in 0..n {
            let (l, u) = (self.lower[i], self.upper[i]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(LpError::BadInput(format!("bounds of variable {i}: [{l}, {u}]")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::BadInput(format!("rhs of row {r} = {}", row.rhs)));
            }
            for &(var, coeff) in &row.coeffs {
                if var >= n {
                    return Err(LpError::BadInput(format!(
                        "row {r} references variable {var} (n = {n})"
                    )));
                }
                if !coeff.is_finite() {
                    return Err(LpError::BadInput(format!(
                        "row {r} has coefficient {coeff} on variable {var}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        values: Vec<f64>,
        objective_value: f64,
    },
    Infeasible,
    Unbounded,
}

/// How one transformed (nonnegative) variable maps back to an original one.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + x̃`
    Shifted { var: usize, lower: f64 },
    /// `x = upper − x̃` (no finite lower bound)
    Negated { var: usize, upper: f64 },
    /// positive part of a free variable
    FreePos { var: usize },
    /// negative part of a free variable
    FreeNeg { var: usize },
}

struct Tableau {
    /// `m × (total+1)` constraint rows; the last column is the rhs.
    rows: Vec<Vec<f64>>,
    /// Phase-1 objective row (reduced costs; last entry is `−z₁`).
    phase1: Vec<f64>,
    /// Phase-2 objective row, kept reduced through both phases.
    phase2: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    upper: Vec<f64>,
    flipped: Vec<bool>,
    artificial_start: usize,
    pivots: usize,
}

impl Tableau {
    fn total(&self) -> usize {
        self.upper.len()
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<(), LpError> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(LpError::Stalled);
        }
        let div = self.rows[row][col];
        for entry in self.rows[row].iter_mut() {
            *entry /= div;
        }
        let pivot_row = self.rows[row].clone();
        for (r, current) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = current[col];
            if factor != 0.0 {
                for (entry, &p) in current.iter_mut().zip(&pivot_row) {
                    *entry -= factor * p;
                }
            }
        }
        for objective in [&mut self.phase1, &mut self.phase2] {
            let factor = objective[col];
            if factor != 0.0 {
                for (entry, &p) in objective.iter_mut().zip(&pivot_row) {
                    *entry -= factor * p;
                }
            }
        }
        self.in_basis[self.basis[row]] = false;
        self.in_basis[col] = true;
        self.basis[row] = col;
        Ok(())
    }

    /// Moves nonbasic `col` to its (finite) upper bound by substituting its
    /// complement; all nonbasic variables then sit at zero again.
    fn flip(&mut self, col: usize) -> Result<(), LpError> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(LpError::Stalled);
        }
        let bound = self.upper[col];
        let rhs = self.total();
        for r in 0..self.rows.len() {
            let coeff = self.rows[r][col];
            self.rows[r][rhs] -= coeff * bound;
            self.rows[r][col] = -coeff;
        }
        for objective in [&mut self.phase1, &mut self.phase2] {
            let coeff = objective[col];
            objective[rhs] -= coeff * bound;
            objective[col] = -coeff;
        }
        self.flipped[col] = !self.flipped[col];
        Ok(())
    }

    /// One phase of Bland-rule simplex. Returns `false` if the phase detected
    /// an unbounded objective.
    fn run_phase(&mut self, phase_one: bool) -> Result<bool, LpError> {
        let total = self.total();
        let rhs = total;
        loop {
            let objective = if phase_one { &self.phase1 } else { &self.phase2 };
            // Bland: smallest-index improving nonbasic column. Artificials
            // never re-enter the basis.
            let mut entering = None;
            for j in 0..total {
                if j >= self.artificial_start || self.in_basis[j] || self.upper[j] <= 0.0 {
                    continue;
                }
                if objective[j] < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(true);
            };
            // Ratio test: the increase of x_j is blocked by a basic variable
            // hitting either of its bounds, or by x_j's own upper bound.
            let mut best_t = f64::INFINITY;
            let mut best: Option<(usize, bool, usize)> = None; // (row, leaves_at_upper, basic index)
            for r in 0..self.rows.len() {
                let coeff = self.rows[r][j];
                let value = self.rows[r][rhs];
                let basic = self.basis[r];
                let (t, at_upper) = if coeff > PIVOT_TOL {
                    ((value / coeff).max(0.0), false)
                } else if coeff < -PIVOT_TOL && self.upper[basic].is_finite() {
                    (((self.upper[basic] - value) / -coeff).max(0.0), true)
                } else {
                    continue;
                };
                let better = t < best_t - PIVOT_TOL
                    || (t <= best_t + PIVOT_TOL && best.map_or(true, |(_, _, b)| basic < b));
                if better {
                    best_t = best_t.min(t);
                    best = Some((r, at_upper, basic));
                }
            }
            let own_bound = self.upper[j];
            if own_bound.is_finite() && own_bound < best_t - PIVOT_TOL {
                self.flip(j)?;
                continue;
            }
            match best {
                Some((row, leaves_at_upper, basic)) => {
                    self.pivot(row, j)?;
                    if leaves_at_upper {
                        self.flip(basic)?;
                    }
                }
                None => {
                    if own_bound.is_finite() {
                        self.flip(j)?;
                    } else {
                        return Ok(false); // unbounded ray
                    }
                }
            }
        }
    }
}

/// A validated problem transformed to standard form, ready for phase 1.
struct Prepared {
    tab: Tableau,
    var_map: Vec<VarMap>,
    /// Snapshot of the standard-form rows before any pivoting, used to
    /// recompute basic values exactly once the final basis is known.
    original_rows: Vec<Vec<f64>>,
}

fn prepare(problem: &LpProblem) -> Result<Prepared, LpError> {
    problem.validate()?;
    let n = problem.n_vars();

    // Transform every variable to x̃ ≥ 0 with an optional finite upper bound.
    let mut var_map: Vec<VarMap> = Vec::new();
    let mut upper_t: Vec<f64> = Vec::new();
    let mut columns_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let (l, u) = (problem.lower[i], problem.upper[i]);
        if l.is_finite() {
            columns_of[i].push(var_map.len());
            var_map.push(VarMap::Shifted { var: i, lower: l });
            upper_t.push(if u.is_finite() { u - l } else { f64::INFINITY });
        } else if u.is_finite() {
            columns_of[i].push(var_map.len());
            var_map.push(VarMap::Negated { var: i, upper: u });
            upper_t.push(f64::INFINITY);
        } else {
            columns_of[i].push(var_map.len());
            var_map.push(VarMap::FreePos { var: i });
            upper_t.push(f64::INFINITY);
            columns_of[i].push(var_map.len());
            var_map.push(VarMap::FreeNeg { var: i });
            upper_t.push(f64::INFINITY);
        }
    }
    let structural = var_map.len();

    // One dense row per constraint over the transformed variables.
    let m = problem.rows.len();
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs_t: Vec<f64> = Vec::with_capacity(m);
    let mut relation_t: Vec<Relation> = Vec::with_capacity(m);
    for row in &problem.rows {
        let mut coeffs = vec![0.0; structural];
        let mut rhs = row.rhs;
        for &(var, coeff) in &row.coeffs {
            match var_map[columns_of[var][0]] {
                VarMap::Shifted { lower, .. } => {
                    coeffs[columns_of[var][0]] += coeff;
                    rhs -= coeff * lower;
                }
                VarMap::Negated { upper, .. } => {
                    coeffs[columns_of[var][0]] -= coeff;
                    rhs -= coeff * upper;
                }
                VarMap::FreePos { .. } => {
                    coeffs[columns_of[var][0]] += coeff;
                    coeffs[columns_of[var][1]] -= coeff;
                }
                VarMap::FreeNeg { .. } => unreachable!("free splits start at the positive part"),
            }
        }
        dense.push(coeffs);
        rhs_t.push(rhs);
        relation_t.push(row.relation);
    }

    // Slack/surplus columns, then b ≥ 0 normalization, then artificials.
    let slack_count = relation_t
        .iter()
        .filter(|rel| **rel != Relation::Eq)
        .count();
    let total = structural + slack_count + m;
    let artificial_start = structural + slack_count;
    let mut tableau_rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut slack_at = structural;
    for (r, mut coeffs) in dense.into_iter().enumerate() {
        coeffs.resize(total + 1, 0.0);
        match relation_t[r] {
            Relation::Le => {
                coeffs[slack_at] = 1.0;
                slack_at += 1;
            }
            Relation::Ge => {
                coeffs[slack_at] = -1.0;
                slack_at += 1;
            }
            Relation::Eq => {}
        }
        let mut rhs = rhs_t[r];
        if rhs < 0.0 {
            rhs = -rhs;
            for entry in coeffs.iter_mut() {
                *entry = -*entry;
            }
        }
        coeffs[artificial_start + r] = 1.0;
        coeffs[total] = rhs;
        tableau_rows.push(coeffs);
    }

    let original_rows = tableau_rows.clone();

    let mut upper = upper_t;
    upper.resize(total, f64::INFINITY);

    // Phase-1 reduced cost row: cost 1 on each (basic) artificial, reduced by
    // subtracting every constraint row. Phase-2 costs start reduced because
    // artificials cost zero there.
    let mut phase1 = vec![0.0; total + 1];
    for row in &tableau_rows {
        for (entry, &coeff) in phase1.iter_mut().zip(row) {
            *entry -= coeff;
        }
    }
    for a in 0..m {
        phase1[artificial_start + a] += 1.0;
    }
    let mut phase2 = vec![0.0; total + 1];
    for (col, map) in var_map.iter().enumerate() {
        phase2[col] = match map {
            VarMap::Shifted { var, .. } | VarMap::FreePos { var } => problem.objective[*var],
            VarMap::Negated { var, .. } => -problem.objective[*var],
            VarMap::FreeNeg { var } => -problem.objective[*var],
        };
    }

    let tab = Tableau {
        rows: tableau_rows,
        phase1,
        phase2,
        basis: (artificial_start..artificial_start + m).collect(),
        in_basis: {
            let mut flags = vec![false; total];
            for a in 0..m {
                flags[artificial_start + a] = true;
            }
            flags
        },
        upper,
        flipped: vec![false; total],
        artificial_start,
        pivots: 0,
    };
    Ok(Prepared {
        tab,
        var_map,
        original_rows,
    })
}

/// Runs phase 1 only and reports whether the constraints are satisfiable.
/// Used by budget bisection, which discards the solution values anyway; this
/// skips phase 2 and the post-check, so marginally feasible systems (artificial
/// residue below the phase-1 tolerance) classify cleanly instead of tripping
/// the strict solution checks.
pub(crate) fn phase1_feasible(problem: &LpProblem) -> Result<bool, LpError> {
    let mut prep = prepare(problem)?;
    if !prep.tab.run_phase(true)? {
        return Err(LpError::Stalled); // phase 1 is bounded below by zero
    }
    let total = prep.tab.total();
    Ok(-prep.tab.phase1[total] <= PHASE1_TOL)
}

/// Solves the problem, returning optimal values in the original variable
/// space, or the infeasible/unbounded verdict.
pub fn solve(problem: &LpProblem) -> Result<LpOutcome, LpError> {
    let n = problem.n_vars();
    let Prepared {
        mut tab,
        var_map,
        original_rows,
    } = prepare(problem)?;
    let m = tab.rows.len();
    let total = tab.total();
    let artificial_start = tab.artificial_start;

    if !tab.run_phase(true)? {
        return Err(LpError::Stalled); // phase 1 is bounded below by zero
    }
    let phase1_value = -tab.phase1[total];
    if phase1_value > PHASE1_TOL {
        return Ok(LpOutcome::Infeasible);
    }
    // Drive surviving artificials out of the basis where possible; pin all
    // artificials at zero either way.
    for r in 0..m {
        if tab.basis[r] < artificial_start {
            continue;
        }
        if let Some(col) = (0..artificial_start)
            .find(|&j| !tab.in_basis[j] && tab.rows[r][j].abs() > PIVOT_TOL)
        {
            tab.pivot(r, col)?;
        }
    }
    for a in artificial_start..total {
        tab.upper[a] = 0.0;
    }

    if !tab.run_phase(false)? {
        return Ok(LpOutcome::Unbounded);
    }

    // Recover the transformed coordinates. The pivoted tableau accumulates
    // rounding error, so with the nonbasic variables fixed at their bounds the
    // basic values are recomputed from the pre-pivot rows: the basis columns
    // form a square system solved afresh by Gaussian elimination with partial
    // pivoting. If that system is too ill-conditioned to pivot, fall back to
    // the tableau's own right-hand sides.
    let mut actual = vec![0.0; total];
    for j in 0..total {
        if !tab.in_basis[j] && tab.flipped[j] && tab.upper[j].is_finite() {
            actual[j] = tab.upper[j];
        }
    }
    let refreshed = (|| -> Option<Vec<f64>> {
        let mut matrix: Vec<Vec<f64>> = (0..m)
            .map(|r| tab.basis.iter().map(|&b| original_rows[r][b]).collect())
            .collect();
        let mut rhs: Vec<f64> = (0..m)
            .map(|r| {
                original_rows[r][total]
                    - (0..total)
                        .filter(|&j| !tab.in_basis[j] && actual[j] != 0.0)
                        .map(|j| original_rows[r][j] * actual[j])
                        .sum::<f64>()
            })
            .collect();
        for col in 0..m {
            let pivot_row = (col..m)
                .max_by(|&a, &b| matrix[a][col].abs().total_cmp(&matrix[b][col].abs()))?;
            if matrix[pivot_row][col].abs() < 1e-12 {
                return None;
            }
            matrix.swap(col, pivot_row);
            rhs.swap(col, pivot_row);
            for r in col + 1..m {
                let factor = matrix[r][col] / matrix[col][col];
                if factor != 0.0 {
                    for k in col..m {
                        matrix[r][k] -= factor * matrix[col][k];
                    }
                    rhs[r] -= factor * rhs[col];
                }
            }
        }
        let mut solution = vec![0.0; m];
        for col in (0..m).rev() {
            let tail: f64 = (col + 1..m).map(|k| matrix[col][k] * solution[k]).sum();
            solution[col] = (rhs[col] - tail) / matrix[col][col];
        }
        Some(solution)
    })();
    match refreshed {
        Some(solution) => {
            for (r, &basic) in tab.basis.iter().enumerate() {
                actual[basic] = solution[r];
            }
        }
        None => {
            for (r, &basic) in tab.basis.iter().enumerate() {
                actual[basic] = if tab.flipped[basic] {
                    tab.upper[basic] - tab.rows[r][total]
                } else {
                    tab.rows[r][total]
                };
            }
        }
    }
    let mut values = vec![0.0; n];
    for (col, map) in var_map.iter().enumerate() {
        match map {
            VarMap::Shifted { var, lower } => values[*var] += lower + actual[col],
            VarMap::Negated { var, upper } => values[*var] += upper - actual[col],
            VarMap::FreePos { var } => values[*var] += actual[col],
            VarMap::FreeNeg { var } => values[*var] -= actual[col],
        }
    }

    // Post-check: bounds within 1e-9 (then clamped exactly), rows within 1e-7.
    for i in 0..n {
        if values[i] < problem.lower[i] - BOUND_TOL || values[i] > problem.upper[i] + BOUND_TOL {
            return Err(LpError::PostCheck(format!(
                "variable {i} = {} outside [{}, {}]",
                values[i], problem.lower[i], problem.upper[i]
            )));
        }
        values[i] = values[i].max(problem.lower[i]).min(problem.upper[i]);
    }
    for (r, row) in problem.rows.iter().enumerate() {
        let lhs: f64 = row.coeffs.iter().map(|&(v, c)| c * values[v]).sum();
        let violated = match row.relation {
            Relation::Le => lhs > row.rhs + ROW_TOL,
            Relation::Ge => lhs < row.rhs - ROW_TOL,
            Relation::Eq => (lhs - row.rhs).abs() > ROW_TOL,
        };
        if violated {
            return Err(LpError::PostCheck(format!(
                "row {r}: lhs {lhs} vs rhs {} ({:?})",
                row.rhs, row.relation
            )));
        }
    }
    let objective_value = problem
        .objective
        .iter()
        .zip(&values)
        .map(|(&c, &x)| c * x)
        .sum();
    Ok(LpOutcome::Optimal {
        values,
        objective_value,
    })
}

/// Bisects the smallest budget in `[lo, hi]` whose `check` succeeds, assuming
/// feasibility is monotone in the budget. Returns [`LpError::NoFeasibleBudget`]
/// if even `hi` fails.
pub(crate) fn bisect_budget(
    lo: f64,
    hi: f64,
    tol: f64,
    mut check: impl FnMut(f64) -> Result<bool, LpError>,
) -> Result<f64, LpError> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(LpError::BadInput(format!("budget range [{lo}, {hi}]")));
    }
    if !check(hi)? {
        return Err(LpError::NoFeasibleBudget);
    }
    if check(lo)? {
        return Ok(lo);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if check(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest budget `L ∈ [lo, hi]` for which the LP built by `build(L)` is
/// feasible, to within `1e-7 · max(1, hi)`, together with a fractional
/// witness. After the bisection the budget just below the answer is
/// re-checked; a feasible answer there means the builder is not monotone and
/// an error is returned.
///
/// A budget is classified by phase-1 feasibility alone. At the returned
/// budget the constraint system can be satisfiable only to within the phase-1
/// tolerance, in which case the optimal vertex misses the variable bounds by
/// a sliver and the full solve rejects it; the witness is then re-solved a
/// few bisection-tolerance steps above, which stays within the budget
/// accuracy already conceded.
pub fn min_feasible_budget(
    lo: f64,
    hi: f64,
    mut build: impl FnMut(f64) -> LpProblem,
) -> Result<(f64, LpOutcome), LpError> {
    let tol = 1e-7 * hi.abs().max(1.0);
    let mut feasible = |budget: f64| -> Result<bool, LpError> { phase1_feasible(&build(budget)) };
    let best = bisect_budget(lo, hi, tol, &mut feasible)?;
    let probe = best - 2.0 * tol;
    if probe >= lo && feasible(probe)? {
        return Err(LpError::NonMonotone { budget: probe });
    }
    let mut witness = solve(&build(best));
    for step in [1.0, 4.0, 16.0] {
        match witness {
            Err(LpError::PostCheck(_)) | Ok(LpOutcome::Infeasible) => {
                witness = solve(&build(best + step * tol));
            }
            _ => break,
        }
    }
    Ok((best, witness?))
}
