//! Shortest-path, spanning-tree, and assignment algorithms: series-parallel
//! decomposition and its expectation DP, the DAG connectivity solver, the
//! spanning-tree cut-set LP with min-cut separation, spanning-tree randomized
//! rounding with repair, and the path→assignment reduction.

use crate::lp::{self, LpError, LpOutcome, LpProblem, Relation};
use crate::model::{
    Bipartite, Digraph, Family, FamilyStructure, FeasibleMode, ModelError, Objective, SolveReport,
    TwoStageInstance, TwoStagePlan,
};
use crate::util::{SplitMix64, UnionFind};

fn require_shortest_path<'a>(
    inst: &'a TwoStageInstance,
    algorithm: &'static str,
) -> Result<(usize, &'a [(usize, usize)], usize, usize), ModelError> {
    match inst.digraph() {
        Some(g) if inst.family == Family::ShortestPath => Ok(g),
        _ => Err(ModelError::WrongFamily {
            algorithm,
            family: inst.family.name(),
        }),
    }
}

fn require_spanning_tree<'a>(
    inst: &'a TwoStageInstance,
    algorithm: &'static str,
) -> Result<(usize, &'a [(usize, usize)]), ModelError> {
    match inst.undirected() {
        Some(g) if inst.family == Family::SpanningTree => Ok(g),
        _ => Err(ModelError::WrongFamily {
            algorithm,
            family: inst.family.name(),
        }),
    }
}

// ---------------------------------------------------------------------------
// Series-parallel decomposition
// ---------------------------------------------------------------------------

/// Decomposition tree of a two-terminal series-parallel digraph. Leaves
/// biject with the arcs of the input; composing the children per the node
/// kind reproduces the digraph between the recorded terminals. Nodes that
/// touch no arc are outside the decomposition and are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpDecomposition {
    pub source: usize,
    pub sink: usize,
    pub kind: SpKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpKind {
    Leaf {
        arc: usize,
    },
    /// Left's sink coincides with right's source.
    Series {
        left: Box<SpDecomposition>,
        right: Box<SpDecomposition>,
    },
    /// Both children share the node's terminals.
    Parallel {
        left: Box<SpDecomposition>,
        right: Box<SpDecomposition>,
    },
}

impl SpDecomposition {
    /// Number of leaves (= arcs) under this node.
    pub fn arc_count(&self) -> usize {
        match &self.kind {
            SpKind::Leaf { .. } => 1,
            SpKind::Series { left, right } | SpKind::Parallel { left, right } => {
                left.arc_count() + right.arc_count()
            }
        }
    }
}

/// Builds the series-parallel decomposition tree of a two-terminal digraph by
/// repeated reductions: two components with equal terminals merge in
/// parallel; the unique in/out component pair at an interior degree-(1,1)
/// node merges in series. A graph is accepted exactly when the reductions
/// leave a single component spanning source→sink (the reduction system is
/// confluent, so scan order does not affect acceptance). Rejection carries
/// the irreducible kernel's terminal pairs as a witness.
pub fn sp_decompose(g: &Digraph) -> Result<SpDecomposition, ModelError> {
    if g.source == g.sink {
        return Err(ModelError::SourceIsSink);
    }
    let mut comps: Vec<SpDecomposition> = g
        .arcs
        .iter()
        .enumerate()
        .map(|(i, &(tail, head))| SpDecomposition {
            source: tail,
            sink: head,
            kind: SpKind::Leaf { arc: i },
        })
        .collect();
    loop {
        if comps.len() == 1 && comps[0].source == g.source && comps[0].sink == g.sink {
            return Ok(comps.pop().expect("single component"));
        }
        if let Some((i, j)) = find_parallel_pair(&comps) {
            let right = comps.remove(j);
            let left = comps.remove(i);
            comps.insert(
                i,
                SpDecomposition {
                    source: left.source,
                    sink: left.sink,
                    kind: SpKind::Parallel {
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                },
            );
            continue;
        }
        if let Some((i, j)) = find_series_pair(&comps, g) {
            let (lo, hi) = (i.min(j), i.max(j));
            let hi_comp = comps.remove(hi);
            let lo_comp = comps.remove(lo);
            let (left, right) = if lo == i {
                (lo_comp, hi_comp)
            } else {
                (hi_comp, lo_comp)
            };
            comps.insert(
                lo,
                SpDecomposition {
                    source: left.source,
                    sink: right.sink,
                    kind: SpKind::Series {
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                },
            );
            continue;
        }
        return Err(ModelError::NotSeriesParallel {
            kernel: comps.iter().map(|c| (c.source, c.sink)).collect(),
        });
    }
}

fn find_parallel_pair(comps: &[SpDecomposition]) -> Option<(usize, usize)> {
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            if comps[i].source == comps[j].source && comps[i].sink == comps[j].sink {
                return Some((i, j));
            }
        }
    }
    None
}

/// Finds `(in, out)` component indices joinable in series at some interior
/// node: the node has exactly one component ending and one starting there,
/// and they are distinct (a self-loop component is both and never reduces).
fn find_series_pair(comps: &[SpDecomposition], g: &Digraph) -> Option<(usize, usize)> {
    for v in 0..g.node_count {
        if v == g.source || v == g.sink {
            continue;
        }
        let ins: Vec<usize> = (0..comps.len()).filter(|&i| comps[i].sink == v).collect();
        let outs: Vec<usize> = (0..comps.len()).filter(|&i| comps[i].source == v).collect();
        if ins.len() == 1 && outs.len() == 1 && ins[0] != outs[0] {
            return Some((ins[0], outs[0]));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Series-parallel expectation DP
// ---------------------------------------------------------------------------

struct SpEval {
    /// Optimal two-stage expected cost of the component standalone.
    mixed: f64,
    /// Cheapest pure-second-stage terminal-to-terminal cost per scenario.
    defer: Vec<f64>,
    kind: SpEvalKind,
}

enum SpEvalKind {
    Leaf { arc: usize, buy: bool },
    Series { left: Box<SpEval>, right: Box<SpEval> },
    /// The mixed optimum routes every scenario through one child.
    ParallelChild { left_is_better: bool, left: Box<SpEval>, right: Box<SpEval> },
    /// The mixed optimum defers the branch choice to the second stage.
    ParallelDefer { left: Box<SpEval>, right: Box<SpEval> },
}

fn sp_evaluate(node: &SpDecomposition, inst: &TwoStageInstance) -> SpEval {
    let k = inst.scenario_count();
    match &node.kind {
        SpKind::Leaf { arc } => {
            let expected: f64 = (0..k)
                .map(|j| inst.probabilities()[j] * inst.cost(j, *arc))
                .sum();
            let first = inst.first_stage_costs[*arc];
            let buy = first <= expected;
            SpEval {
                mixed: if buy { first } else { expected },
                defer: (0..k).map(|j| inst.cost(j, *arc)).collect(),
                kind: SpEvalKind::Leaf { arc: *arc, buy },
            }
        }
        SpKind::Series { left, right } => {
            let l = sp_evaluate(left, inst);
            let r = sp_evaluate(right, inst);
            SpEval {
                mixed: l.mixed + r.mixed,
                defer: (0..k).map(|j| l.defer[j] + r.defer[j]).collect(),
                kind: SpEvalKind::Series {
                    left: Box::new(l),
                    right: Box::new(r),
                },
            }
        }
        SpKind::Parallel { left, right } => {
            let l = sp_evaluate(left, inst);
            let r = sp_evaluate(right, inst);
            let defer: Vec<f64> = (0..k).map(|j| l.defer[j].min(r.defer[j])).collect();
            let deferral: f64 = (0..k)
                .map(|j| inst.probabilities()[j] * defer[j])
                .sum();
            let child_best = l.mixed.min(r.mixed);
            if child_best <= deferral {
                SpEval {
                    mixed: child_best,
                    defer,
                    kind: SpEvalKind::ParallelChild {
                        left_is_better: l.mixed <= r.mixed,
                        left: Box::new(l),
                        right: Box::new(r),
                    },
                }
            } else {
                SpEval {
                    mixed: deferral,
                    defer,
                    kind: SpEvalKind::ParallelDefer {
                        left: Box::new(l),
                        right: Box::new(r),
                    },
                }
            }
        }
    }
}

/// Writes the mixed-optimal plan of `node` into `x` / `recourse`.
fn sp_collect_mixed(node: &SpEval, x: &mut [u8], recourse: &mut [Vec<u8>]) {
    match &node.kind {
        SpEvalKind::Leaf { arc, buy } => {
            if *buy {
                x[*arc] = 1;
            } else {
                for row in recourse.iter_mut() {
                    row[*arc] = 1;
                }
            }
        }
        SpEvalKind::Series { left, right } => {
            sp_collect_mixed(left, x, recourse);
            sp_collect_mixed(right, x, recourse);
        }
        SpEvalKind::ParallelChild {
            left_is_better,
            left,
            right,
        } => {
            sp_collect_mixed(if *left_is_better { left } else { right }, x, recourse);
        }
        SpEvalKind::ParallelDefer { left, right } => {
            for j in 0..recourse.len() {
                let child = if left.defer[j] <= right.defer[j] {
                    left
                } else {
                    right
                };
                sp_collect_defer(child, j, recourse);
            }
        }
    }
}

/// Writes the scenario-`j` cheapest pure-second-stage path of `node` into the
/// recourse row.
fn sp_collect_defer(node: &SpEval, j: usize, recourse: &mut [Vec<u8>]) {
    match &node.kind {
        SpEvalKind::Leaf { arc, .. } => recourse[j][*arc] = 1,
        SpEvalKind::Series { left, right } => {
            sp_collect_defer(left, j, recourse);
            sp_collect_defer(right, j, recourse);
        }
        SpEvalKind::ParallelChild { left, right, .. }
        | SpEvalKind::ParallelDefer { left, right } => {
            let child = if left.defer[j] <= right.defer[j] {
                left
            } else {
                right
            };
            sp_collect_defer(child, j, recourse);
        }
    }
}

/// Exact expectation solver for series-parallel shortest-path instances in
/// exact mode. Bottom-up over the decomposition tree, each component carries
/// its standalone two-stage optimum (`mixed`) and its cheapest pure
/// second-stage cost per scenario (`defer`):
///
/// * leaf: `mixed = min(C_a, Σ_j p_j c_aj)` (ties buy first stage),
///   `defer_j = c_aj`;
/// * series: both quantities add;
/// * parallel: `defer_j = min` of the children, and `mixed` is the best of
///   the two child optima and the fully deferred per-scenario branch choice
///   `Σ_j p_j min(defer)`.
///
/// Superset mode is rejected: with redundant purchases allowed, partial
/// combinations of branch solutions break the component independence the
/// recursion relies on.
pub fn sp_dp_expectation(inst: &TwoStageInstance) -> Result<SolveReport, ModelError> {
    require_shortest_path(inst, "sp-dp")?;
    if inst.feasible_mode != FeasibleMode::Exact {
        return Err(ModelError::WrongMode {
            algorithm: "sp-dp",
            required: "exact",
        });
    }
    inst.validate()?;
    let g = match &inst.structure {
        FamilyStructure::Digraph(g) => g,
        _ => unreachable!("family checked"),
    };
    let tree = sp_decompose(g)?;
    let eval = sp_evaluate(&tree, inst);
    let mut x = vec![0u8; inst.element_count()];
    let mut recourse = vec![vec![0u8; inst.element_count()]; inst.scenario_count()];
    sp_collect_mixed(&eval, &mut x, &mut recourse);
    SolveReport::from_plan(
        inst,
        Objective::Expectation,
        TwoStagePlan { x, recourse },
        Some(eval.mixed),
        "sp-dp",
        None,
    )
}

// ---------------------------------------------------------------------------
// DAG connectivity solver
// ---------------------------------------------------------------------------

/// Topological order of the digraph's nodes (smallest node id first among the
/// ready ones), or `None` if the arcs contain a cycle.
fn topological_order(node_count: usize, arcs: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; node_count];
    for &(_, head) in arcs {
        indegree[head] += 1;
    }
    let mut placed = vec![false; node_count];
    let mut order = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        let next = (0..node_count).find(|&v| !placed[v] && indegree[v] == 0)?;
        placed[next] = true;
        order.push(next);
        for &(tail, head) in arcs {
            if tail == next {
                indegree[head] -= 1;
            }
        }
    }
    Some(order)
}

/// Follows predecessor arcs from `node` back to the tree root, marking the
/// path's arcs in `out`.
fn mark_chain(mut node: usize, pred: &[Option<usize>], arcs: &[(usize, usize)], out: &mut [u8]) {
    while let Some(a) = pred[node] {
        out[a] = 1;
        node = arcs[a].0;
    }
}

/// Solver for the connectivity variant of two-stage shortest path on a DAG:
/// the first stage is restricted to be itself a path from the source to some
/// node `v`, and the second stage completes it per scenario. For every node,
/// a topological-order relaxation gives the cheapest first-stage path
/// `C*(v)` and the cheapest scenario-`j` completion `c*_j(v)`; the answer
/// minimizes `C*(v) + CVaR_α` over nodes (smallest node id on ties).
///
/// Because of the restriction the value can exceed the unrestricted optimum
/// of the instance, so no lower bound is claimed in the report. Cyclic
/// digraphs are rejected.
pub fn connectivity_solve(inst: &TwoStageInstance, alpha: f64) -> Result<SolveReport, ModelError> {
    let (node_count, arcs, source, sink) = require_shortest_path(inst, "connectivity")?;
    inst.validate()?;
    if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
        return Err(ModelError::BadAlpha { alpha });
    }
    let order = topological_order(node_count, arcs).ok_or(ModelError::CyclicDigraph)?;
    let k = inst.scenario_count();

    // First-stage shortest path from the source, with predecessor arcs.
    let mut dist = vec![f64::INFINITY; node_count];
    let mut pred: Vec<Option<usize>> = vec![None; node_count];
    dist[source] = 0.0;
    for &u in &order {
        if !dist[u].is_finite() {
            continue;
        }
        for (a, &(tail, head)) in arcs.iter().enumerate() {
            if tail == u && dist[u] + inst.first_stage_costs[a] < dist[head] {
                dist[head] = dist[u] + inst.first_stage_costs[a];
                pred[head] = Some(a);
            }
        }
    }

    // Per scenario: shortest completion to the sink, with successor arcs.
    let mut back = vec![vec![f64::INFINITY; node_count]; k];
    let mut succ: Vec<Vec<Option<usize>>> = vec![vec![None; node_count]; k];
    for j in 0..k {
        back[j][sink] = 0.0;
        for &u in order.iter().rev() {
            for (a, &(tail, head)) in arcs.iter().enumerate() {
                if tail == u
                    && back[j][head].is_finite()
                    && inst.cost(j, a) + back[j][head] < back[j][u]
                {
                    back[j][u] = inst.cost(j, a) + back[j][head];
                    succ[j][u] = Some(a);
                }
            }
        }
    }

    let mut best: Option<(f64, usize)> = None;
    for v in 0..node_count {
        if !dist[v].is_finite() || (0..k).any(|j| !back[j][v].is_finite()) {
            continue;
        }
        let atoms: Vec<(f64, f64)> = (0..k).map(|j| (back[j][v], inst.probabilities()[j])).collect();
        let d = crate::risk::DiscreteDistribution::new(atoms)?;
        let value = dist[v] + d.cvar(alpha)?;
        if best.map_or(true, |(b, _)| value < b) {
            best = Some((value, v));
        }
    }
    let (_, v) = best.ok_or(ModelError::NoFeasibleSolution)?;

    let mut x = vec![0u8; inst.element_count()];
    mark_chain(v, &pred, arcs, &mut x);
    let mut recourse = Vec::with_capacity(k);
    for j in 0..k {
        let mut y = vec![0u8; inst.element_count()];
        let mut node = v;
        while node != sink {
            let a = succ[j][node].expect("finite completion has a successor arc");
            y[a] = 1;
            node = arcs[a].1;
        }
        recourse.push(y);
    }
    SolveReport::from_plan(
        inst,
        Objective::Cvar(alpha),
        TwoStagePlan { x, recourse },
        None,
        "connectivity",
        None,
    )
}

// ---------------------------------------------------------------------------
// Spanning-tree cut-set LP
// ---------------------------------------------------------------------------

/// Which budget shape the spanning-tree LP and rounding use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MstVariant {
    /// Per-scenario budgets `C·x + c_j·y_j ≤ L`; filters `E(L) = {e: C_e ≤ L}`
    /// and `E^j(L) = {e: c_ej ≤ L}`.
    Robust,
    /// Single budget `C·x + Σ_j p_j c_j·y_j ≤ L`; filters `E(L)` as above and
    /// `E^j(L) = {e: p_j c_ej ≤ L}`.
    Expectation,
}

impl MstVariant {
    fn objective(self) -> Objective {
        match self {
            MstVariant::Robust => Objective::Robust,
            MstVariant::Expectation => Objective::Expectation,
        }
    }

    fn algorithm(self) -> &'static str {
        match self {
            MstVariant::Robust => "mst-rr-robust",
            MstVariant::Expectation => "mst-rr-expectation",
        }
    }
}

/// Smallest-budget fractional solution of the cut-set relaxation, plus the
/// cut pool that certifies it.
#[derive(Debug, Clone)]
pub struct CutSetLp {
    pub l_star: f64,
    /// Absolute tolerance of the budget bisection: the true threshold is at
    /// least `l_star − budget_tolerance`, which is the certified lower bound.
    pub budget_tolerance: f64,
    /// Fractional first-stage solution, length = edge count.
    pub x: Vec<f64>,
    /// Fractional second-stage solution, one row per scenario.
    pub y: Vec<Vec<f64>>,
    /// Active cuts `(scenario, S)`, where `S` is the sorted shore containing
    /// node 0. Every cut was violated (value below `1 − 1e-6`) when added,
    /// except the seeded `S = {0}` cut of each scenario.
    pub cuts: Vec<(usize, Vec<usize>)>,
    /// Number of separation rounds that added cuts across the whole
    /// bisection; capped at `10 · |E| · K`.
    pub iterations: usize,
}

/// Edges with exactly one endpoint in `S` (given by membership flags).
fn cut_edges(edges: &[(usize, usize)], in_s: &[bool]) -> Vec<usize> {
    edges
        .iter()
        .enumerate()
        .filter(|&(_, &(u, v))| in_s[u] != in_s[v])
        .map(|(e, _)| e)
        .collect()
}

/// Global minimum cut of an undirected weighted graph by the Stoer–Wagner
/// maximum-adjacency procedure. Returns the cut weight and one shore.
/// Deterministic: ties in the adjacency search pick the smallest node id, and
/// the first minimal phase wins.
fn stoer_wagner(node_count: usize, weights: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let mut w = weights.to_vec();
    let mut groups: Vec<Vec<usize>> = (0..node_count).map(|v| vec![v]).collect();
    let mut active: Vec<usize> = (0..node_count).collect();
    let mut best = (f64::INFINITY, Vec::new());
    while active.len() > 1 {
        let mut in_a = vec![false; node_count];
        let mut weight_to_a = vec![0.0; node_count];
        let first = active[0];
        in_a[first] = true;
        for &v in &active {
            if v != first {
                weight_to_a[v] = w[first][v];
            }
        }
        let mut last = first;
        let mut before_last = first;
        let mut last_weight = 0.0;
        for _ in 1..active.len() {
            let mut next = usize::MAX;
            for &v in &active {
                if !in_a[v] && (next == usize::MAX || weight_to_a[v] > weight_to_a[next]) {
                    next = v;
                }
            }
            in_a[next] = true;
            before_last = last;
            last = next;
            last_weight = weight_to_a[next];
            for &v in &active {
                if !in_a[v] {
                    weight_to_a[v] += w[next][v];
                }
            }
        }
        if last_weight < best.0 {
            best = (last_weight, groups[last].clone());
        }
        // Merge `last` into `before_last`.
        for &v in &active {
            if v != last && v != before_last {
                w[before_last][v] += w[last][v];
                w[v][before_last] = w[before_last][v];
            }
        }
        let moved = std::mem::take(&mut groups[last]);
        groups[before_last].extend(moved);
        active.retain(|&v| v != last);
    }
    best
}

/// Canonical cut encoding: the sorted shore that contains node 0.
fn canonical_shore(node_count: usize, side: &[usize]) -> Vec<usize> {
    let mut in_side = vec![false; node_count];
    for &v in side {
        in_side[v] = true;
    }
    let keep = in_side[0];
    let mut shore: Vec<usize> = (0..node_count).filter(|&v| in_side[v] == keep).collect();
    shore.sort_unstable();
    shore
}

/// Solves the spanning-tree cut-set relaxation: the smallest budget `L` at
/// which fractional `x, y_j ∈ [0,1]` (zeroed outside the cost filters) can
/// satisfy the variant's budget row(s) and every cut constraint
/// `Σ_{e∈δ(S)} x_e + y_ej ≥ 1`. Cuts are generated lazily: each feasibility
/// probe of the budget bisection re-solves against the current pool, then
/// runs a Stoer–Wagner global minimum cut per scenario on the edge weights
/// `x_e + y_ej` and pools every shore of weight below `1 − 1e-6`, repeating
/// until the probe's point is separation-clean. The pool persists across
/// probes (cuts are budget-independent), so feasibility stays monotone in
/// the budget. A marginally feasible probe whose full solve fails its
/// numerical post-check retries a few bisection-tolerance steps above the
/// probed budget — within the accuracy the bisection already concedes.
pub fn mst_cutset_lp(
    inst: &TwoStageInstance,
    variant: MstVariant,
) -> Result<CutSetLp, ModelError> {
    let (node_count, edges) = require_spanning_tree(inst, variant.algorithm())?;
    inst.validate()?;
    let m = edges.len();
    let k = inst.scenario_count();
    let probs = inst.probabilities().to_vec();
    let hi: f64 = inst.first_stage_costs.iter().sum();
    let tol = 1e-7 * hi.abs().max(1.0);
    let cap = 10 * m * k;

    let second_stage_weight = |j: usize, e: usize| -> f64 {
        match variant {
            MstVariant::Robust => inst.cost(j, e),
            MstVariant::Expectation => probs[j] * inst.cost(j, e),
        }
    };

    let mut cuts: Vec<(usize, Vec<usize>)> = (0..k).map(|j| (j, vec![0])).collect();
    let mut iterations = 0usize;
    let mut cap_hit = false;
    let mut stash: Option<Vec<f64>> = None;

    let build = |budget: f64, cuts: &[(usize, Vec<usize>)]| -> LpProblem {
        let mut problem = LpProblem::minimize(vec![0.0; m + k * m]);
        for e in 0..m {
            let open = inst.first_stage_costs[e] <= budget;
            problem.set_bounds(e, 0.0, if open { 1.0 } else { 0.0 });
        }
        for j in 0..k {
            for e in 0..m {
                let open = second_stage_weight(j, e) <= budget;
                problem.set_bounds(m + j * m + e, 0.0, if open { 1.0 } else { 0.0 });
            }
        }
        match variant {
            MstVariant::Robust => {
                for j in 0..k {
                    let mut row = Vec::with_capacity(2 * m);
                    for e in 0..m {
                        row.push((e, inst.first_stage_costs[e]));
                        row.push((m + j * m + e, inst.cost(j, e)));
                    }
                    problem.add_row(row, Relation::Le, budget);
                }
            }
            MstVariant::Expectation => {
                let mut row = Vec::with_capacity(m + k * m);
                for e in 0..m {
                    row.push((e, inst.first_stage_costs[e]));
                }
                for j in 0..k {
                    for e in 0..m {
                        row.push((m + j * m + e, probs[j] * inst.cost(j, e)));
                    }
                }
                problem.add_row(row, Relation::Le, budget);
            }
        }
        for (j, shore) in cuts {
            let mut in_s = vec![false; node_count];
            for &v in shore {
                in_s[v] = true;
            }
            let row: Vec<(usize, f64)> = cut_edges(edges, &in_s)
                .into_iter()
                .flat_map(|e| [(e, 1.0), (m + j * m + e, 1.0)])
                .collect();
            problem.add_row(row, Relation::Ge, 1.0);
        }
        problem
    };

    let mut check = |budget: f64| -> Result<bool, LpError> {
        loop {
            let mut outcome = lp::solve(&build(budget, &cuts));
            for step in [1.0, 4.0, 16.0] {
                match outcome {
                    Err(LpError::PostCheck(_)) => {
                        outcome = lp::solve(&build(budget + step * tol, &cuts));
                    }
                    _ => break,
                }
            }
            let values = match outcome? {
                LpOutcome::Optimal { values, .. } => values,
                LpOutcome::Infeasible => return Ok(false),
                LpOutcome::Unbounded => {
                    return Err(LpError::PostCheck(
                        "feasibility probe unexpectedly unbounded".to_string(),
                    ))
                }
            };
            let mut found: Vec<(usize, Vec<usize>)> = Vec::new();
            for j in 0..k {
                let mut weights = vec![vec![0.0; node_count]; node_count];
                for (e, &(u, v)) in edges.iter().enumerate() {
                    let weight = values[e] + values[m + j * m + e];
                    weights[u][v] += weight;
                    weights[v][u] += weight;
                }
                let (cut_value, side) = stoer_wagner(node_count, &weights);
                if cut_value < 1.0 - 1e-6 {
                    let shore = canonical_shore(node_count, &side);
                    if !cuts.contains(&(j, shore.clone())) && !found.contains(&(j, shore.clone())) {
                        found.push((j, shore));
                    }
                }
            }
            if found.is_empty() {
                stash = Some(values);
                return Ok(true);
            }
            // Every round past this point adds at least one cut that was not
            // in the pool, so the round count is bounded by the number of
            // distinct (scenario, shore) pairs; the cap only trips if
            // numerical trouble makes the separator cycle.
            if iterations >= cap {
                cap_hit = true;
                return Err(LpError::Stalled);
            }
            iterations += 1;
            found.sort();
            cuts.extend(found);
        }
    };

    let best = lp::bisect_budget(0.0, hi, tol, &mut check);
    let best = match best {
        Ok(b) => b,
        Err(LpError::Stalled) if cap_hit => {
            return Err(ModelError::CutGenerationExceeded { cap })
        }
        Err(e) => return Err(e.into()),
    };
    let probe = best - 2.0 * tol;
    if probe >= 0.0 {
        match check(probe) {
            Ok(false) => {}
            Ok(true) => return Err(ModelError::Lp(LpError::NonMonotone { budget: probe })),
            Err(LpError::Stalled) if cap_hit => {
                return Err(ModelError::CutGenerationExceeded { cap })
            }
            Err(e) => return Err(e.into()),
        }
        // The probe failed, so the stash still holds the point from the last
        // successful check — the one at `best`.
    }
    let values = stash.expect("bisection succeeded, so some check stashed a point");
    let x = values[..m].to_vec();
    let y = (0..k)
        .map(|j| values[m + j * m..m + (j + 1) * m].to_vec())
        .collect();
    Ok(CutSetLp {
        l_star: best,
        budget_tolerance: tol,
        x,
        y,
        cuts,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Spanning-tree randomized rounding
// ---------------------------------------------------------------------------

/// Diagnostic record of one spanning-tree rounding run.
#[derive(Debug, Clone)]
pub struct MstRoundingTrace {
    pub seed: u64,
    pub k_hat: u64,
    /// Smallest feasible LP budget; basis of the reported lower bound.
    pub l_star: f64,
    /// First-stage edges after rounding (and repair), ascending, unpruned.
    pub f_set: Vec<usize>,
    /// Second-stage edges per scenario, ascending, unpruned.
    pub fj_sets: Vec<Vec<usize>>,
    /// True iff some scenario graph is still disconnected after repair.
    pub failed: bool,
    /// Repair additions in order: `(edge, None)` went to the first stage,
    /// `(edge, Some(j))` to scenario `j`.
    pub repair_added: Vec<(usize, Option<usize>)>,
}

/// Result of [`mst_randomized_rounding`]; `report` is `None` exactly when the
/// trace records a failure.
#[derive(Debug, Clone)]
pub struct MstRounding {
    pub report: Option<SolveReport>,
    pub trace: MstRoundingTrace,
}

fn scenario_components(
    node_count: usize,
    edges: &[(usize, usize)],
    f_set: &[usize],
    fj: &[usize],
) -> UnionFind {
    let mut uf = UnionFind::new(node_count);
    for &e in f_set.iter().chain(fj) {
        uf.union(edges[e].0, edges[e].1);
    }
    uf
}

/// Randomized rounding for two-stage spanning tree
/// (`k̂ = ⌈40 ln n + 16 ln K⌉` repeated coin flips on the cut-set LP
/// solution). An edge enters `F` (resp. `F^j`) if any of its `k̂` coins with
/// success probability `x*_e` (resp. `y*_ej`) lands heads. If some scenario
/// graph `(V, F ∪ F^j)` is disconnected, a greedy repair adds, from the
/// filtered edges not yet selected anywhere, the cheapest edge that joins two
/// components of a disconnected scenario (cost = first-stage cost when added
/// to `F`, scenario cost when added to `F^j`; ties by edge index, then `F`
/// first); it fails when no applicable edge remains. Connected outputs are
/// pruned to per-scenario spanning trees: `F` first loses globally redundant
/// (cycle-closing) edges in increasing first-stage cost, then every scenario
/// keeps all of the pruned `F` and fills up with its cheapest non-redundant
/// `F^j` edges.
///
/// Reproducible: all coins come from a SplitMix64 stream seeded by `seed`,
/// flipped in a fixed order (edges ascending over `E(L*)`, then scenarios
/// ascending with edges ascending over `E^j(L*)`, `k̂` flips each).
pub fn mst_randomized_rounding(
    inst: &TwoStageInstance,
    seed: u64,
    variant: MstVariant,
) -> Result<MstRounding, ModelError> {
    let (node_count, edges) = require_spanning_tree(inst, variant.algorithm())?;
    let lp = mst_cutset_lp(inst, variant)?;
    let m = edges.len();
    let k = inst.scenario_count();
    let probs = inst.probabilities().to_vec();
    let k_hat = (40.0 * (node_count as f64).ln() + 16.0 * (k as f64).ln()).ceil() as u64;

    let second_stage_weight = |j: usize, e: usize| -> f64 {
        match variant {
            MstVariant::Robust => inst.cost(j, e),
            MstVariant::Expectation => probs[j] * inst.cost(j, e),
        }
    };

    let mut rng = SplitMix64::new(seed);
    let mut flip_all = |probability: f64| -> bool {
        let mut heads = false;
        for _ in 0..k_hat {
            // Consume every draw so the stream position is data-independent.
            heads |= rng.bernoulli(probability);
        }
        heads
    };

    let mut f_set: Vec<usize> = Vec::new();
    for e in 0..m {
        if inst.first_stage_costs[e] <= lp.l_star && flip_all(lp.x[e]) {
            f_set.push(e);
        }
    }
    let mut fj_sets: Vec<Vec<usize>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut fj = Vec::new();
        for e in 0..m {
            if second_stage_weight(j, e) <= lp.l_star && flip_all(lp.y[j][e]) {
                fj.push(e);
            }
        }
        fj_sets.push(fj);
    }

    let mut trace = MstRoundingTrace {
        seed,
        k_hat,
        l_star: lp.l_star,
        f_set,
        fj_sets,
        failed: false,
        repair_added: Vec::new(),
    };

    let disconnected = |trace: &MstRoundingTrace| -> Vec<usize> {
        (0..k)
            .filter(|&j| {
                scenario_components(node_count, edges, &trace.f_set, &trace.fj_sets[j])
                    .components()
                    > 1
            })
            .collect()
    };

    // Repair: cheapest applicable (edge, target) joining two components of a
    // disconnected scenario, among filtered edges selected nowhere yet.
    loop {
        let bad = disconnected(&trace);
        if bad.is_empty() {
            break;
        }
        let selected: Vec<bool> = {
            let mut flags = vec![false; m];
            for &e in trace.f_set.iter().chain(trace.fj_sets.iter().flatten()) {
                flags[e] = true;
            }
            flags
        };
        // Candidate = (cost, edge, rank); rank 0 is the first stage, 1 + j is
        // scenario j.
        let mut best_candidate: Option<(f64, usize, usize)> = None;
        for e in 0..m {
            if selected[e] {
                continue;
            }
            let first_applicable = inst.first_stage_costs[e] <= lp.l_star
                && bad.iter().any(|&j| {
                    !scenario_components(node_count, edges, &trace.f_set, &trace.fj_sets[j])
                        .connected(edges[e].0, edges[e].1)
                });
            if first_applicable {
                let candidate = (inst.first_stage_costs[e], e, 0usize);
                if best_candidate.map_or(true, |b| (candidate.0, candidate.1, candidate.2) < b) {
                    best_candidate = Some(candidate);
                }
            }
            for &j in &bad {
                if second_stage_weight(j, e) <= lp.l_star
                    && !scenario_components(node_count, edges, &trace.f_set, &trace.fj_sets[j])
                        .connected(edges[e].0, edges[e].1)
                {
                    let candidate = (inst.cost(j, e), e, 1 + j);
                    if best_candidate.map_or(true, |b| (candidate.0, candidate.1, candidate.2) < b)
                    {
                        best_candidate = Some(candidate);
                    }
                }
            }
        }
        match best_candidate {
            Some((_, e, 0)) => {
                trace.f_set.push(e);
                trace.f_set.sort_unstable();
                trace.repair_added.push((e, None));
            }
            Some((_, e, rank)) => {
                let j = rank - 1;
                trace.fj_sets[j].push(e);
                trace.fj_sets[j].sort_unstable();
                trace.repair_added.push((e, Some(j)));
            }
            None => {
                trace.failed = true;
                return Ok(MstRounding {
                    report: None,
                    trace,
                });
            }
        }
    }

    // Prune to trees. Dropping an edge that closes a cycle within F never
    // disconnects any F ∪ F^j, so F is first thinned to a forest (cheapest
    // first-stage edges kept); each scenario then keeps that forest and its
    // cheapest connecting F^j edges.
    let mut by_first_cost = trace.f_set.clone();
    by_first_cost.sort_by(|&a, &b| {
        inst.first_stage_costs[a]
            .partial_cmp(&inst.first_stage_costs[b])
            .expect("finite costs")
            .then(a.cmp(&b))
    });
    let mut forest = UnionFind::new(node_count);
    let mut kept_first: Vec<usize> = Vec::new();
    for &e in &by_first_cost {
        if forest.union(edges[e].0, edges[e].1) {
            kept_first.push(e);
        }
    }
    kept_first.sort_unstable();

    let mut x = vec![0u8; m];
    for &e in &kept_first {
        x[e] = 1;
    }
    let mut recourse = Vec::with_capacity(k);
    for j in 0..k {
        let mut uf = forest.clone();
        let mut candidates: Vec<usize> = trace.fj_sets[j]
            .iter()
            .copied()
            .filter(|e| !kept_first.contains(e))
            .collect();
        candidates.sort_by(|&a, &b| {
            inst.cost(j, a)
                .partial_cmp(&inst.cost(j, b))
                .expect("finite costs")
                .then(a.cmp(&b))
        });
        let mut y = vec![0u8; m];
        for &e in &candidates {
            if uf.union(edges[e].0, edges[e].1) {
                y[e] = 1;
            }
        }
        recourse.push(y);
    }

    let report = SolveReport::from_plan(
        inst,
        variant.objective(),
        TwoStagePlan { x, recourse },
        Some((lp.l_star - lp.budget_tolerance).max(0.0)),
        variant.algorithm(),
        Some(seed),
    )?;
    Ok(MstRounding {
        report: Some(report),
        trace,
    })
}

// ---------------------------------------------------------------------------
// Path → assignment reduction
// ---------------------------------------------------------------------------

/// Cost-preserving reduction from two-stage shortest path to two-stage
/// assignment by node splitting. Left side: the source plus every interior
/// node; right side: a primed copy of every interior node plus the sink. Arc
/// `(u, v)` becomes the edge `{u, v′}` with the arc's costs, at the same
/// element index. One dummy edge `{i, i′}` per interior node is appended
/// after the arc edges, with first-stage cost `M = max(1, |A| · c_max)`
/// (`c_max` over every cost of the instance) and second-stage cost 0 in all
/// scenarios, so optimal plans defer dummies for free and never buy one first
/// stage. Probabilities, mode, and alpha are copied.
///
/// Arcs entering the source or leaving the sink have no image (those nodes
/// are not split) and cannot lie on any source→sink path; such instances are
/// rejected.
pub fn sp_to_assignment(inst: &TwoStageInstance) -> Result<TwoStageInstance, ModelError> {
    let (node_count, arcs, source, sink) = require_shortest_path(inst, "sp-to-assignment")?;
    inst.validate()?;
    for (index, &(tail, head)) in arcs.iter().enumerate() {
        if head == source || tail == sink {
            return Err(ModelError::BadTerminalArc { index, tail, head });
        }
    }
    let left_of: Vec<Option<usize>> = {
        let mut next = 0;
        (0..node_count)
            .map(|v| {
                (v != sink).then(|| {
                    let id = next;
                    next += 1;
                    id
                })
            })
            .collect()
    };
    let right_of: Vec<Option<usize>> = {
        let mut next = 0;
        (0..node_count)
            .map(|v| {
                (v != source).then(|| {
                    let id = next;
                    next += 1;
                    id
                })
            })
            .collect()
    };
    let side_count = node_count - 1;

    let c_max = inst
        .first_stage_costs
        .iter()
        .chain(inst.scenario_costs().iter().flatten())
        .fold(0.0f64, |acc, &c| acc.max(c));
    let dummy_cost = (arcs.len() as f64 * c_max).max(1.0);

    let mut edges: Vec<(usize, usize)> = arcs
        .iter()
        .map(|&(tail, head)| {
            (
                left_of[tail].expect("tail is not the sink"),
                right_of[head].expect("head is not the source"),
            )
        })
        .collect();
    let mut first_stage_costs = inst.first_stage_costs.clone();
    let mut costs = inst.scenario_costs().to_vec();
    for v in 0..node_count {
        if v == source || v == sink {
            continue;
        }
        edges.push((left_of[v].expect("interior"), right_of[v].expect("interior")));
        first_stage_costs.push(dummy_cost);
        for row in costs.iter_mut() {
            row.push(0.0);
        }
    }

    let image = TwoStageInstance {
        family: Family::Assignment,
        feasible_mode: inst.feasible_mode,
        n: edges.len(),
        first_stage_costs,
        scenarios: crate::model::ScenarioSet {
            probabilities: inst.probabilities().to_vec(),
            costs,
        },
        structure: FamilyStructure::Bipartite(Bipartite {
            left_count: side_count,
            right_count: side_count,
            edges,
        }),
        alpha: inst.alpha,
    };
    image.validate()?;
    Ok(image)
}
