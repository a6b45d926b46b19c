//! Algorithms for the representatives-selection (rs) and cardinality
//! selection families: singleton-group normalization, the exact expectation
//! solver for rs, LP half-rounding for the CVaR and robust objectives, the
//! expectation dynamic program, the budget LP, and randomized rounding with
//! repair.

use crate::lp::{self, LpOutcome, LpProblem, Relation};
use crate::model::{
    Family, FamilyStructure, ModelError, Objective, RsPartition, SolveReport, TwoStageInstance,
    TwoStagePlan,
};
use crate::util::SplitMix64;

/// Result of [`rs_normalize`]: the singleton-group instance together with the
/// map from each group back to the original tool bought when the group is
/// resolved in the first stage.
#[derive(Debug, Clone)]
pub struct RsNormalized {
    /// Equivalent instance with one tool per group; tool `g` carries the
    /// group-`g` minimum of the first-stage costs and, per scenario, the
    /// group minimum of the second-stage costs.
    pub instance: TwoStageInstance,
    /// The original groups, in group order.
    pub groups: Vec<Vec<usize>>,
    /// Per group: the original tool realizing the first-stage minimum
    /// (smallest index on ties).
    pub first_stage_pick: Vec<usize>,
}

fn require_rs(inst: &TwoStageInstance, algorithm: &'static str) -> Result<(), ModelError> {
    if inst.family != Family::Rs {
        return Err(ModelError::WrongFamily {
            algorithm,
            family: inst.family.name(),
        });
    }
    Ok(())
}

fn require_selection(inst: &TwoStageInstance, algorithm: &'static str) -> Result<usize, ModelError> {
    match inst.selection_p() {
        Some(p) if inst.family == Family::Selection => Ok(p),
        _ => Err(ModelError::WrongFamily {
            algorithm,
            family: inst.family.name(),
        }),
    }
}

/// Replaces every group by a single representative tool: first-stage cost =
/// group minimum of `C`, second-stage cost under scenario `j` = group minimum
/// of `c_·j`. Objective values coincide with the original instance for the
/// corresponding stage choices, so optima are preserved.
pub fn rs_normalize(inst: &TwoStageInstance) -> Result<RsNormalized, ModelError> {
    require_rs(inst, "rs-normalize")?;
    inst.validate()?;
    let groups: Vec<Vec<usize>> = inst.rs_groups().expect("rs structure").to_vec();
    let k = inst.scenario_count();
    let mut first_stage_costs = Vec::with_capacity(groups.len());
    let mut first_stage_pick = Vec::with_capacity(groups.len());
    let mut costs = vec![Vec::with_capacity(groups.len()); k];
    for group in &groups {
        let mut best = group[0];
        for &i in group {
            if inst.first_stage_costs[i] < inst.first_stage_costs[best] {
                best = i;
            }
        }
        first_stage_pick.push(best);
        first_stage_costs.push(inst.first_stage_costs[best]);
        for (j, row) in costs.iter_mut().enumerate() {
            let min = group
                .iter()
                .map(|&i| inst.cost(j, i))
                .fold(f64::INFINITY, f64::min);
            row.push(min);
        }
    }
    let singleton_groups = (0..groups.len()).map(|g| vec![g]).collect();
    let mut instance = TwoStageInstance::new(
        Family::Rs,
        inst.feasible_mode,
        first_stage_costs,
        inst.probabilities().to_vec(),
        costs,
        FamilyStructure::RsPartition(RsPartition {
            groups: singleton_groups,
        }),
    )?;
    instance.alpha = inst.alpha;
    Ok(RsNormalized {
        instance,
        groups,
        first_stage_pick,
    })
}

/// Exact solver for the expectation objective on rs instances: after
/// normalization, tool `g` is bought in the first stage iff its first-stage
/// cost is at most its expected second-stage cost `ĉ_g = Σ_j p_j c_gj`
/// (ties buy in the first stage).
pub fn rs_solve_expectation(inst: &TwoStageInstance) -> Result<SolveReport, ModelError> {
    let norm = rs_normalize(inst)?;
    let reduced = &norm.instance;
    let mut x = vec![0u8; inst.element_count()];
    let mut value = 0.0;
    for g in 0..reduced.element_count() {
        let c_hat: f64 = (0..reduced.scenario_count())
            .map(|j| reduced.probabilities()[j] * reduced.cost(j, g))
            .sum();
        let first = reduced.first_stage_costs[g];
        if first <= c_hat {
            x[norm.first_stage_pick[g]] = 1;
            value += first;
        } else {
            value += c_hat;
        }
    }
    SolveReport::from_first_stage(
        inst,
        Objective::Expectation,
        x,
        Some(value),
        "rs-expectation",
        None,
    )
}

/// Shared by the two LP-rounding solvers: lifts a 0/1 decision on the
/// normalized groups back to a first-stage vector on the original tools.
fn lift_group_choice(norm: &RsNormalized, buy_group: &[bool], n: usize) -> Vec<u8> {
    let mut x = vec![0u8; n];
    for (g, &buy) in buy_group.iter().enumerate() {
        if buy {
            x[norm.first_stage_pick[g]] = 1;
        }
    }
    x
}

fn lp_optimal(outcome: LpOutcome) -> Result<(Vec<f64>, f64), ModelError> {
    match outcome {
        LpOutcome::Optimal {
            values,
            objective_value,
        } => Ok((values, objective_value)),
        LpOutcome::Infeasible => Err(ModelError::Lp(lp::LpError::PostCheck(
            "relaxation unexpectedly infeasible".to_string(),
        ))),
        LpOutcome::Unbounded => Err(ModelError::Lp(lp::LpError::PostCheck(
            "relaxation unexpectedly unbounded".to_string(),
        ))),
    }
}

/// min{2, 1/(1−α)}-approximation for the CVaR objective on rs instances.
///
/// Solves the LP relaxation of the CVaR MIP (variables `x ∈ [0,1]^n`, free
/// `γ` split into `γ⁺ − γ⁻`, tail excesses `u_j ≥ 0`), rounds `x*` at
/// threshold 0.5 (≥ 0.5 buys in the first stage), and returns the better —
/// under the CVaR objective — of the rounded plan and the
/// expectation-optimal plan. The report's `lower_bound` is the LP optimum.
pub fn rs_lp_round_cvar(inst: &TwoStageInstance, alpha: f64) -> Result<SolveReport, ModelError> {
    require_rs(inst, "rs-lp2-cvar")?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(ModelError::BadAlpha { alpha });
    }
    let norm = rs_normalize(inst)?;
    let reduced = &norm.instance;
    let n = reduced.element_count();
    let k = reduced.scenario_count();
    let probs = reduced.probabilities();

    // Variables: x_0..x_{n-1}, γ⁺, γ⁻, u_0..u_{K-1}.
    let gamma_pos = n;
    let gamma_neg = n + 1;
    let u_base = n + 2;
    let mut objective = vec![0.0; n + 2 + k];
    objective[..n].copy_from_slice(&reduced.first_stage_costs);
    objective[gamma_pos] = 1.0;
    objective[gamma_neg] = -1.0;
    for j in 0..k {
        objective[u_base + j] = probs[j] / (1.0 - alpha);
    }
    let mut problem = LpProblem::minimize(objective);
    for i in 0..n {
        problem.set_bounds(i, 0.0, 1.0);
    }
    for j in 0..k {
        // u_j ≥ Σ_i c_ij (1 − x_i) − γ  ⇔  u_j + Σ_i c_ij x_i + γ⁺ − γ⁻ ≥ Σ_i c_ij
        let mut coeffs = vec![(u_base + j, 1.0), (gamma_pos, 1.0), (gamma_neg, -1.0)];
        let mut rhs = 0.0;
        for i in 0..n {
            let c = reduced.cost(j, i);
            coeffs.push((i, c));
            rhs += c;
        }
        problem.add_row(coeffs, Relation::Ge, rhs);
    }
    let (values, lp_value) = lp_optimal(lp::solve(&problem)?)?;

    let buy: Vec<bool> = (0..n).map(|g| values[g] >= 0.5).collect();
    let rounded_x = lift_group_choice(&norm, &buy, inst.element_count());
    let rounded = SolveReport::from_first_stage(
        inst,
        Objective::Cvar(alpha),
        rounded_x,
        Some(lp_value),
        "rs-lp2-cvar",
        None,
    )?;
    let expectation_x = rs_solve_expectation(inst)?.x;
    let fallback = SolveReport::from_first_stage(
        inst,
        Objective::Cvar(alpha),
        expectation_x,
        Some(lp_value),
        "rs-lp2-cvar",
        None,
    )?;
    Ok(if rounded.value <= fallback.value {
        rounded
    } else {
        fallback
    })
}

/// 2-approximation for the robust objective on rs instances: LP relaxation of
/// `min L` subject to `C·x + Σ_i c_ij (1 − x_i) ≤ L` per scenario, rounded at
/// threshold 0.5. The rounded value is at most twice the LP optimum, which is
/// reported as `lower_bound`.
pub fn rs_lp_round_robust(inst: &TwoStageInstance) -> Result<SolveReport, ModelError> {
    require_rs(inst, "rs-lp2-robust")?;
    let norm = rs_normalize(inst)?;
    let reduced = &norm.instance;
    let n = reduced.element_count();
    let k = reduced.scenario_count();

    // Variables: x_0..x_{n-1} ∈ [0,1], L ≥ 0.
    let budget = n;
    let mut objective = vec![0.0; n + 1];
    objective[budget] = 1.0;
    let mut problem = LpProblem::minimize(objective);
    for i in 0..n {
        problem.set_bounds(i, 0.0, 1.0);
    }
    for j in 0..k {
        // Σ_i (C_i − c_ij) x_i − L ≤ −Σ_i c_ij
        let mut coeffs = vec![(budget, -1.0)];
        let mut rhs = 0.0;
        for i in 0..n {
            coeffs.push((i, reduced.first_stage_costs[i] - reduced.cost(j, i)));
            rhs -= reduced.cost(j, i);
        }
        problem.add_row(coeffs, Relation::Le, rhs);
    }
    let (values, lp_value) = lp_optimal(lp::solve(&problem)?)?;

    let buy: Vec<bool> = (0..n).map(|g| values[g] >= 0.5).collect();
    let x = lift_group_choice(&norm, &buy, inst.element_count());
    SolveReport::from_first_stage(
        inst,
        Objective::Robust,
        x,
        Some(lp_value),
        "rs-lp2-robust",
        None,
    )
}

const DP_FIRST_STAGE: u32 = u32::MAX - 1;
const DP_UNREACHED: u32 = u32::MAX;

/// Exact expectation solver for cardinality selection in
/// `O(n · p^{K+1} · 2^K)` time: state `(L, l_1..l_K)` counts the items bought
/// in the first stage and, per scenario, in the second stage among the first
/// `i` items; each item is skipped, bought now, or assigned to a nonempty
/// subset of scenarios. Guarded for `K ≤ 6` and a bounded state table.
pub fn selection_dp_expectation(inst: &TwoStageInstance) -> Result<SolveReport, ModelError> {
    let p = require_selection(inst, "selection-dp")?;
    inst.validate()?;
    let n = inst.element_count();
    let k = inst.scenario_count();
    let probs = inst.probabilities();

    let dim = p + 1;
    let table: usize = dim
        .checked_pow(k as u32 + 1)
        .unwrap_or(usize::MAX)
        .min(usize::MAX);
    let limit = crate::exact::guard_limit();
    let cells = table.checked_mul(n).unwrap_or(usize::MAX);
    if k > 6 || cells > limit {
        return Err(ModelError::EnumerationGuard {
            count: cells,
            limit,
        });
    }

    // Strides: coordinate 0 is L, coordinates 1..=K are the l_j counts.
    let mut stride = vec![1usize; k + 1];
    for d in 1..=k {
        stride[d] = stride[d - 1] * dim;
    }
    // Per scenario-subset mask: combined stride shift and (per item) cost.
    let masks = 1usize << k;
    let mut mask_shift = vec![0usize; masks];
    for mask in 1..masks {
        let low = mask.trailing_zeros() as usize;
        mask_shift[mask] = mask_shift[mask & (mask - 1)] + stride[low + 1];
    }

    let mut value = vec![f64::INFINITY; table];
    value[0] = 0.0;
    let mut choice = vec![DP_UNREACHED; table * n];
    let mut coords = vec![0usize; k + 1];
    let mut mask_cost = vec![0.0f64; masks];

    for i in 0..n {
        for mask in 1..masks {
            let low = mask.trailing_zeros() as usize;
            mask_cost[mask] = mask_cost[mask & (mask - 1)] + probs[low] * inst.cost(low, i);
        }
        let mut next = vec![f64::INFINITY; table];
        let choice_row = &mut choice[i * table..(i + 1) * table];
        for idx in 0..table {
            let from = value[idx];
            if !from.is_finite() {
                continue;
            }
            // Decode the state to know which coordinates may still grow.
            let mut rest = idx;
            for d in 0..=k {
                coords[d] = rest % dim;
                rest /= dim;
            }
            // Skip item i.
            if from < next[idx] {
                next[idx] = from;
                choice_row[idx] = 0;
            }
            // Buy item i in the first stage.
            if coords[0] < p {
                let to = idx + stride[0];
                let cand = from + inst.first_stage_costs[i];
                if cand < next[to] {
                    next[to] = cand;
                    choice_row[to] = DP_FIRST_STAGE;
                }
            }
            // Assign item i to a nonempty subset of scenarios.
            'mask: for mask in 1..masks {
                let mut m = mask;
                while m != 0 {
                    let j = m.trailing_zeros() as usize;
                    if coords[j + 1] >= p {
                        continue 'mask;
                    }
                    m &= m - 1;
                }
                let to = idx + mask_shift[mask];
                let cand = from + mask_cost[mask];
                if cand < next[to] {
                    next[to] = cand;
                    choice_row[to] = mask as u32;
                }
            }
        }
        value = next;
    }

    // Feasible terminal states: L + l_j = p for every scenario.
    let mut best_idx = None;
    let mut best = f64::INFINITY;
    for first in 0..=p {
        let mut idx = first * stride[0];
        for d in 1..=k {
            idx += (p - first) * stride[d];
        }
        if value[idx] < best {
            best = value[idx];
            best_idx = Some(idx);
        }
    }
    let mut idx = best_idx.ok_or(ModelError::NoFeasibleSolution)?;

    let mut x = vec![0u8; n];
    let mut recourse = vec![vec![0u8; n]; k];
    for i in (0..n).rev() {
        let c = choice[i * table + idx];
        debug_assert_ne!(c, DP_UNREACHED);
        if c == DP_FIRST_STAGE {
            x[i] = 1;
            idx -= stride[0];
        } else if c != 0 {
            let mut m = c as usize;
            while m != 0 {
                let j = m.trailing_zeros() as usize;
                recourse[j][i] = 1;
                m &= m - 1;
            }
            idx -= mask_shift[c as usize];
        }
    }
    debug_assert_eq!(idx, 0);

    SolveReport::from_plan(
        inst,
        Objective::Expectation,
        TwoStagePlan { x, recourse },
        Some(best),
        "selection-dp",
        None,
    )
}

/// Budget LP for cardinality selection under expectation: smallest `L` such
/// that the filtered LP — `C·x + Σ_j p_j c_j·y_j ≤ L`, `Σ_i (x_i + y_ij) = p`
/// per scenario, `x_i + y_ij ≤ 1`, variables outside `E(L) = {i: C_i ≤ L}`
/// and `E^j(L) = {i: p_j c_ij ≤ L}` fixed to 0 — is feasible.
#[derive(Debug, Clone)]
pub struct SelectionLp {
    pub l_star: f64,
    /// Absolute tolerance of the budget bisection: the true threshold is at
    /// least `l_star − budget_tolerance`, which is the certified lower bound.
    pub budget_tolerance: f64,
    /// Fractional first-stage solution, length n.
    pub x: Vec<f64>,
    /// Fractional second-stage solution, one row per scenario.
    pub y: Vec<Vec<f64>>,
}

pub fn selection_lp_budget(inst: &TwoStageInstance) -> Result<SelectionLp, ModelError> {
    let p = require_selection(inst, "selection-lp")?;
    inst.validate()?;
    let n = inst.element_count();
    let k = inst.scenario_count();
    let probs = inst.probabilities().to_vec();

    let total: f64 = inst.first_stage_costs.iter().sum::<f64>()
        + inst
            .scenario_costs()
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .sum::<f64>();

    let build = |budget: f64| -> LpProblem {
        let mut problem = LpProblem::minimize(vec![0.0; n + k * n]);
        for i in 0..n {
            let open = inst.first_stage_costs[i] <= budget;
            problem.set_bounds(i, 0.0, if open { 1.0 } else { 0.0 });
        }
        for j in 0..k {
            for i in 0..n {
                let open = probs[j] * inst.cost(j, i) <= budget;
                problem.set_bounds(n + j * n + i, 0.0, if open { 1.0 } else { 0.0 });
            }
        }
        let mut budget_row = Vec::with_capacity(n + k * n);
        for i in 0..n {
            budget_row.push((i, inst.first_stage_costs[i]));
        }
        for j in 0..k {
            for i in 0..n {
                budget_row.push((n + j * n + i, probs[j] * inst.cost(j, i)));
            }
        }
        problem.add_row(budget_row, Relation::Le, budget);
        for j in 0..k {
            let mut row = Vec::with_capacity(2 * n);
            for i in 0..n {
                row.push((i, 1.0));
                row.push((n + j * n + i, 1.0));
            }
            problem.add_row(row, Relation::Eq, p as f64);
            for i in 0..n {
                problem.add_row(vec![(i, 1.0), (n + j * n + i, 1.0)], Relation::Le, 1.0);
            }
        }
        problem
    };

    let (l_star, witness) = lp::min_feasible_budget(0.0, total, build)?;
    let (values, _) = lp_optimal(witness)?;
    let x = values[..n].to_vec();
    let y = (0..k).map(|j| values[n + j * n..n + (j + 1) * n].to_vec()).collect();
    Ok(SelectionLp {
        l_star,
        budget_tolerance: 1e-7 * total.max(1.0),
        x,
        y,
    })
}

/// Diagnostic record of one randomized-rounding run.
#[derive(Debug, Clone)]
pub struct RoundingTrace {
    pub seed: u64,
    pub k_hat: u64,
    /// Smallest feasible LP budget; the lower bound reported by the solver.
    pub l_star: f64,
    /// First-stage items after rounding (and repair, if it ran), ascending.
    pub x_set: Vec<usize>,
    /// Second-stage items per scenario, ascending.
    pub y_sets: Vec<Vec<usize>>,
    /// True iff some scenario still has `|X ∪ Y_j| < p` after repair.
    pub failed: bool,
    /// Items added by the repair pass, in the order they were added.
    pub repair_added: Vec<usize>,
}

/// Result of [`selection_randomized_rounding`]; `report` is `None` exactly
/// when the trace records a failure.
#[derive(Debug, Clone)]
pub struct SelectionRounding {
    pub report: Option<SolveReport>,
    pub trace: RoundingTrace,
}

fn deficient_scenarios(trace: &RoundingTrace, p: usize) -> Vec<usize> {
    let mut bad = Vec::new();
    for (j, y) in trace.y_sets.iter().enumerate() {
        let union = y.iter().filter(|i| !trace.x_set.contains(i)).count() + trace.x_set.len();
        if union < p {
            bad.push(j);
        }
    }
    bad
}

/// Greedy repair: add items from `E(L*) ∖ X` in increasing first-stage cost
/// (ties by index) until every scenario satisfies `|X ∪ Y_j| ≥ p` or the pool
/// is exhausted. A trace that is already feasible is returned unchanged.
pub fn selection_repair(inst: &TwoStageInstance, trace: &mut RoundingTrace) {
    let p = inst.selection_p().expect("selection instance");
    if deficient_scenarios(trace, p).is_empty() {
        trace.failed = false;
        return;
    }
    let mut pool: Vec<usize> = (0..inst.element_count())
        .filter(|&i| inst.first_stage_costs[i] <= trace.l_star && !trace.x_set.contains(&i))
        .collect();
    pool.sort_by(|&a, &b| {
        inst.first_stage_costs[a]
            .partial_cmp(&inst.first_stage_costs[b])
            .expect("finite costs")
            .then(a.cmp(&b))
    });
    for item in pool {
        if deficient_scenarios(trace, p).is_empty() {
            break;
        }
        trace.x_set.push(item);
        trace.x_set.sort_unstable();
        trace.repair_added.push(item);
    }
    trace.failed = !deficient_scenarios(trace, p).is_empty();
}

/// Randomized rounding for cardinality selection under expectation
/// (`k̂ = ⌈335 ln n + 40 ln 2K⌉` repeated coin flips on the budget-LP
/// solution), with greedy repair on failure. Reproducible: all coins come
/// from a SplitMix64 stream seeded by `seed`, flipped in a fixed order (items
/// ascending over `E(L*)`, then scenarios ascending with items ascending over
/// `E^j(L*)`, `k̂` flips each).
pub fn selection_randomized_rounding(
    inst: &TwoStageInstance,
    seed: u64,
) -> Result<SelectionRounding, ModelError> {
    let p = require_selection(inst, "selection-rr")?;
    let lp = selection_lp_budget(inst)?;
    let n = inst.element_count();
    let k = inst.scenario_count();
    let k_hat = (335.0 * (n as f64).ln() + 40.0 * ((2 * k) as f64).ln()).ceil() as u64;

    let mut rng = SplitMix64::new(seed);
    let mut flip_all = |probability: f64| -> bool {
        let mut heads = false;
        for _ in 0..k_hat {
            // Consume every draw so the stream position is data-independent.
            heads |= rng.bernoulli(probability);
        }
        heads
    };

    let mut x_set = Vec::new();
    for i in 0..n {
        if inst.first_stage_costs[i] <= lp.l_star && flip_all(lp.x[i]) {
            x_set.push(i);
        }
    }
    let mut y_sets = Vec::with_capacity(k);
    for j in 0..k {
        let mut y = Vec::new();
        for i in 0..n {
            if inst.probabilities()[j] * inst.cost(j, i) <= lp.l_star && flip_all(lp.y[j][i]) {
                y.push(i);
            }
        }
        y_sets.push(y);
    }

    let mut trace = RoundingTrace {
        seed,
        k_hat,
        l_star: lp.l_star,
        x_set,
        y_sets,
        failed: false,
        repair_added: Vec::new(),
    };
    if !deficient_scenarios(&trace, p).is_empty() {
        trace.failed = true;
        selection_repair(inst, &mut trace);
    }
    if trace.failed {
        return Ok(SelectionRounding {
            report: None,
            trace,
        });
    }

    // Trim to a plan. First-stage items are kept (they are shared across
    // scenarios); each scenario keeps its cheapest items until the count
    // reaches p, dropping the costliest surplus. In exact mode a first stage
    // larger than p itself would not be a partial solution, so it is cut back
    // to its p cheapest items.
    let mut kept: Vec<usize> = trace.x_set.clone();
    if inst.feasible_mode == crate::model::FeasibleMode::Exact && kept.len() > p {
        kept.sort_by(|&a, &b| {
            inst.first_stage_costs[a]
                .partial_cmp(&inst.first_stage_costs[b])
                .expect("finite costs")
                .then(a.cmp(&b))
        });
        kept.truncate(p);
        kept.sort_unstable();
    }
    let mut x = vec![0u8; n];
    for &i in &kept {
        x[i] = 1;
    }
    let need = p.saturating_sub(kept.len());
    let mut recourse = Vec::with_capacity(k);
    for j in 0..k {
        let mut y = vec![0u8; n];
        if need > 0 {
            let mut candidates: Vec<usize> = trace.y_sets[j]
                .iter()
                .copied()
                .filter(|i| !kept.contains(i))
                .collect();
            candidates.sort_by(|&a, &b| {
                inst.cost(j, a)
                    .partial_cmp(&inst.cost(j, b))
                    .expect("finite costs")
                    .then(a.cmp(&b))
            });
            for &i in candidates.iter().take(need) {
                y[i] = 1;
            }
        }
        recourse.push(y);
    }

    let report = SolveReport::from_plan(
        inst,
        Objective::Expectation,
        TwoStagePlan { x, recourse },
        Some((lp.l_star - lp.budget_tolerance).max(0.0)),
        "selection-rr",
        Some(seed),
    )?;
    Ok(SelectionRounding {
        report: Some(report),
        trace,
    })
}
