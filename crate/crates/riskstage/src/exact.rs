//! Reference oracles: feasible-set enumeration, optimal recourse for every
//! family, and brute-force optimization of the full two-stage objective.
//!
//! These routines favour transparency over speed and are the ground truth the
//! approximation algorithms are tested against. All of them are protected by
//! an enumeration guard (default one million states) that can be raised
//! through the `RISKSTAGE_GUARD_OVERRIDE` environment variable.
//!
//! Recourse ties are broken toward the lexicographically smallest recourse
//! vector. For matroid families (selection, representatives, spanning trees)
//! a greedy pass with the order "cost ascending, element index descending"
//! realizes that tie-break exactly; for paths and assignments the module uses
//! a restriction argument instead: walk the elements in index order and pin an
//! element to zero whenever some optimal completion avoids it.

use crate::model::{
    self, Family, FeasibleMode, ModelError, Objective, SolveReport, TwoStageInstance,
};
use crate::util::UnionFind;

/// Default ceiling on enumerated states (catalog members, search nodes,
/// candidate vectors).
pub const DEFAULT_GUARD_LIMIT: usize = 1_000_000;

/// Relative tolerance for "did the restricted problem keep the same optimum"
/// checks inside lexicographic tie-breaking.
const RESTRICT_TOL: f64 = 1e-9;

/// Strict-improvement margin for the branch-and-bound search.
const IMPROVE_TOL: f64 = 1e-12;

pub(crate) fn guard_limit() -> usize {
    std::env::var("RISKSTAGE_GUARD_OVERRIDE")
        .ok()
        .and_then(|value| value.parse::<usize>().ok())
        .unwrap_or(DEFAULT_GUARD_LIMIT)
}

fn guard_check(count: usize, limit: usize) -> Result<(), ModelError> {
    if count > limit {
        Err(ModelError::EnumerationGuard { count, limit })
    } else {
        Ok(())
    }
}

/// Explicit list of the members of `X`, each as a 0/1 vector.
#[derive(Debug, Clone)]
pub struct FeasibleCatalog {
    pub members: Vec<Vec<u8>>,
}

impl FeasibleCatalog {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Enumerates every member of the family's feasible set `X`.
pub fn enumerate_feasible(inst: &TwoStageInstance) -> Result<FeasibleCatalog, ModelError> {
    let limit = guard_limit();
    let n = inst.element_count();
    let mut members: Vec<Vec<u8>> = Vec::new();
    match inst.family {
        Family::Selection => {
            let p = inst.selection_p().expect("selection structure");
            let mut chosen: Vec<usize> = Vec::with_capacity(p);
            enumerate_combinations(n, p, 0, &mut chosen, &mut members, limit)?;
        }
        Family::Rs => {
            let groups = inst.rs_groups().expect("rs structure");
            let mut picks: Vec<usize> = Vec::with_capacity(groups.len());
            enumerate_products(groups, 0, n, &mut picks, &mut members, limit)?;
        }
        Family::ShortestPath => {
            let usable = vec![true; n];
            visit_simple_paths(inst, &usable, limit, &mut |path_arcs| {
                members.push(arcs_to_vector(n, path_arcs));
                members.len() >= limit + 1
            })?;
            guard_check(members.len(), limit)?;
        }
        Family::SpanningTree => {
            let (node_count, edges) = inst.undirected().expect("tree structure");
            let mut uf = UnionFind::new(node_count);
            let mut chosen: Vec<usize> = Vec::new();
            let mut nodes = 0usize;
            enumerate_trees(
                node_count,
                edges,
                0,
                &mut uf,
                &mut chosen,
                &mut members,
                limit,
                &mut nodes,
            )?;
        }
        Family::Assignment => {
            let (left, right, edges) = inst.bipartite().expect("bipartite structure");
            let mut incident: Vec<Vec<usize>> = vec![Vec::new(); left];
            for (e, &(l, _)) in edges.iter().enumerate() {
                incident[l].push(e);
            }
            let mut right_used = vec![false; right];
            let mut chosen: Vec<usize> = Vec::new();
            enumerate_matchings(
                left,
                edges,
                &incident,
                0,
                &mut right_used,
                &mut chosen,
                &mut members,
                n,
                limit,
            )?;
        }
    }
    Ok(FeasibleCatalog { members })
}

fn arcs_to_vector(n: usize, arcs: &[usize]) -> Vec<u8> {
    let mut v = vec![0u8; n];
    for &a in arcs {
        v[a] = 1;
    }
    v
}

fn enumerate_combinations(
    n: usize,
    need: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<u8>>,
    limit: usize,
) -> Result<(), ModelError> {
    if need == 0 {
        out.push(arcs_to_vector(n, chosen));
        return guard_check(out.len(), limit);
    }
    if start + need > n {
        return Ok(());
    }
    for i in start..=(n - need) {
        chosen.push(i);
        enumerate_combinations(n, need - 1, i + 1, chosen, out, limit)?;
        chosen.pop();
    }
    Ok(())
}

fn enumerate_products(
    groups: &[Vec<usize>],
    g: usize,
    n: usize,
    picks: &mut Vec<usize>,
    out: &mut Vec<Vec<u8>>,
    limit: usize,
) -> Result<(), ModelError> {
    if g == groups.len() {
        out.push(arcs_to_vector(n, picks));
        return guard_check(out.len(), limit);
    }
    for &i in &groups[g] {
        picks.push(i);
        enumerate_products(groups, g + 1, n, picks, out, limit)?;
        picks.pop();
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn enumerate_trees(
    node_count: usize,
    edges: &[(usize, usize)],
    idx: usize,
    uf: &mut UnionFind,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<u8>>,
    limit: usize,
    nodes: &mut usize,
) -> Result<(), ModelError> {
    *nodes += 1;
    guard_check(*nodes, limit)?;
    if uf.components() == 1 {
        out.push(arcs_to_vector(edges.len(), chosen));
        return guard_check(out.len(), limit);
    }
    if idx == edges.len() {
        return Ok(());
    }
    // Prune: the chosen forest plus every remaining edge must still connect.
    let mut probe = uf.clone();
    for &(u, v) in &edges[idx..] {
        probe.union(u, v);
    }
    if probe.components() != 1 {
        return Ok(());
    }
    let (u, v) = edges[idx];
    if !uf.connected(u, v) {
        let mut with = uf.clone();
        with.union(u, v);
        chosen.push(idx);
        enumerate_trees(node_count, edges, idx + 1, &mut with, chosen, out, limit, nodes)?;
        chosen.pop();
    }
    enumerate_trees(node_count, edges, idx + 1, uf, chosen, out, limit, nodes)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_matchings(
    left: usize,
    edges: &[(usize, usize)],
    incident: &[Vec<usize>],
    l: usize,
    right_used: &mut Vec<bool>,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<u8>>,
    n: usize,
    limit: usize,
) -> Result<(), ModelError> {
    if l == left {
        out.push(arcs_to_vector(n, chosen));
        return guard_check(out.len(), limit);
    }
    for &e in &incident[l] {
        let r = edges[e].1;
        if right_used[r] {
            continue;
        }
        right_used[r] = true;
        chosen.push(e);
        enumerate_matchings(left, edges, incident, l + 1, right_used, chosen, out, n, limit)?;
        chosen.pop();
        right_used[r] = false;
    }
    Ok(())
}

/// Depth-first enumeration of simple source→sink paths over the arcs marked
/// usable. The visitor receives the arc indices of each path and returns
/// `true` to stop early. The guard counts expanded search nodes.
fn visit_simple_paths(
    inst: &TwoStageInstance,
    usable: &[bool],
    limit: usize,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> Result<(), ModelError> {
    let (node_count, arcs, source, sink) = inst.digraph().expect("digraph structure");
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for (a, &(tail, _)) in arcs.iter().enumerate() {
        if usable[a] {
            out[tail].push(a);
        }
    }
    let mut visited = vec![false; node_count];
    let mut stack: Vec<usize> = Vec::new();
    let mut nodes = 0usize;
    fn dfs(
        node: usize,
        sink: usize,
        arcs: &[(usize, usize)],
        out: &[Vec<usize>],
        visited: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        nodes: &mut usize,
        limit: usize,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> Result<bool, ModelError> {
        *nodes += 1;
        guard_check(*nodes, limit)?;
        if node == sink {
            return Ok(visit(stack));
        }
        visited[node] = true;
        for &a in &out[node] {
            let head = arcs[a].1;
            if visited[head] {
                continue;
            }
            stack.push(a);
            let stop = dfs(head, sink, arcs, out, visited, stack, nodes, limit, visit)?;
            stack.pop();
            if stop {
                visited[node] = false;
                return Ok(true);
            }
        }
        visited[node] = false;
        Ok(false)
    }
    dfs(
        source,
        sink,
        arcs,
        &out,
        &mut visited,
        &mut stack,
        &mut nodes,
        limit,
        visit,
    )?;
    Ok(())
}

/// Exact-mode partial check for paths: does some simple path contain all of
/// `x`'s arcs?
pub(crate) fn path_superset_member_exists(
    inst: &TwoStageInstance,
    x: &[u8],
) -> Result<bool, ModelError> {
    let required: Vec<usize> = model::support(x);
    let usable = vec![true; inst.element_count()];
    let mut found = false;
    visit_simple_paths(inst, &usable, guard_limit(), &mut |path| {
        if required.iter().all(|r| path.contains(r)) {
            found = true;
        }
        found
    })?;
    Ok(found)
}

/// Minimum of `Σ_{i∈z} w_i` over the members `z ∈ X`, or `None` if `X` is
/// empty. Weights must be nonnegative; `f64::INFINITY` marks an element as
/// unusable.
pub(crate) fn family_min_cost(inst: &TwoStageInstance, weights: &[f64]) -> Option<f64> {
    match inst.family {
        Family::Selection => {
            let p = inst.selection_p().expect("selection structure");
            let mut sorted: Vec<f64> = weights.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("comparable weights"));
            let total: f64 = sorted[..p].iter().sum();
            total.is_finite().then_some(total)
        }
        Family::Rs => {
            let mut total = 0.0;
            for group in inst.rs_groups().expect("rs structure") {
                let best = group
                    .iter()
                    .map(|&i| weights[i])
                    .fold(f64::INFINITY, f64::min);
                total += best;
            }
            total.is_finite().then_some(total)
        }
        Family::ShortestPath => {
            let (node_count, arcs, source, sink) = inst.digraph().expect("digraph structure");
            dijkstra_min_cost(node_count, arcs, weights, source, sink)
        }
        Family::SpanningTree => {
            let (node_count, edges) = inst.undirected().expect("tree structure");
            kruskal_min_cost(node_count, edges, weights)
        }
        Family::Assignment => {
            let (left, right, edges) = inst.bipartite().expect("bipartite structure");
            matching_min_cost(left, right, edges, weights)
        }
    }
}

/// Plain Dijkstra over nonnegative arc weights (`INFINITY` = unusable).
pub(crate) fn dijkstra_min_cost(
    node_count: usize,
    arcs: &[(usize, usize)],
    weights: &[f64],
    source: usize,
    sink: usize,
) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; node_count];
    let mut done = vec![false; node_count];
    dist[source] = 0.0;
    for _ in 0..node_count {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for v in 0..node_count {
            if !done[v] && dist[v] < best {
                best = dist[v];
                u = v;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        if u == sink {
            break;
        }
        for (a, &(tail, head)) in arcs.iter().enumerate() {
            if tail == u && weights[a].is_finite() {
                let cand = dist[u] + weights[a];
                if cand < dist[head] {
                    dist[head] = cand;
                }
            }
        }
    }
    dist[sink].is_finite().then_some(dist[sink])
}

/// Minimum spanning tree weight over usable edges; `None` if they do not
/// connect the graph.
pub(crate) fn kruskal_min_cost(
    node_count: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
) -> Option<f64> {
    let mut order: Vec<usize> = (0..edges.len()).filter(|&e| weights[e].is_finite()).collect();
    order.sort_by(|&a, &b| {
        weights[a]
            .partial_cmp(&weights[b])
            .expect("comparable weights")
            .then(b.cmp(&a))
    });
    let mut uf = UnionFind::new(node_count);
    let mut total = 0.0;
    for e in order {
        let (u, v) = edges[e];
        if uf.union(u, v) {
            total += weights[e];
        }
    }
    (uf.components() == 1).then_some(total)
}

/// Minimum-weight perfect matching via a bitmask DP over right nodes;
/// parallel edges collapse to their cheapest usable representative.
pub(crate) fn matching_min_cost(
    left: usize,
    right: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
) -> Option<f64> {
    assert!(right <= 20, "matching DP supports at most 20 right nodes");
    let mut pair = vec![vec![f64::INFINITY; right]; left];
    for (e, &(l, r)) in edges.iter().enumerate() {
        if weights[e] < pair[l][r] {
            pair[l][r] = weights[e];
        }
    }
    let full = 1usize << right;
    let mut dp = vec![f64::INFINITY; full];
    dp[0] = 0.0;
    for mask in 0..full {
        if !dp[mask].is_finite() {
            continue;
        }
        let l = (mask as u32).count_ones() as usize;
        if l == left {
            continue;
        }
        for r in 0..right {
            if mask & (1 << r) != 0 || !pair[l][r].is_finite() {
                continue;
            }
            let cand = dp[mask] + pair[l][r];
            let next = mask | (1 << r);
            if cand < dp[next] {
                dp[next] = cand;
            }
        }
    }
    dp[full - 1].is_finite().then_some(dp[full - 1])
}

/// Objective functional over explicit per-scenario costs, mirroring the
/// arithmetic of [`DiscreteDistribution`] exactly.
pub(crate) fn apply_costs(objective: Objective, costs: &[f64], probs: &[f64]) -> f64 {
    match objective {
        Objective::Expectation => costs.iter().zip(probs).map(|(&c, &p)| p * c).sum(),
        Objective::Robust => costs.iter().fold(f64::NEG_INFINITY, |m, &c| m.max(c)),
        Objective::Cvar(alpha) => {
            if alpha == 0.0 {
                return costs.iter().zip(probs).map(|(&c, &p)| p * c).sum();
            }
            let mut best = f64::INFINITY;
            for &gamma in costs {
                let tail: f64 = costs
                    .iter()
                    .zip(probs)
                    .map(|(&c, &p)| p * (c - gamma).max(0.0))
                    .sum();
                best = best.min(gamma + tail / (1.0 - alpha));
            }
            best
        }
    }
}

fn dot_selected(costs: &[f64], v: &[u8]) -> f64 {
    costs
        .iter()
        .zip(v)
        .map(|(&c, &b)| if b == 1 { c } else { 0.0 })
        .sum()
}

/// Optimal recourse for `x` under scenario `j`: minimum completion cost and
/// the lexicographically smallest optimal recourse vector.
pub(crate) fn family_recourse(
    inst: &TwoStageInstance,
    x: &[u8],
    j: usize,
) -> Result<(f64, Vec<u8>), ModelError> {
    let n = inst.element_count();
    let costs = &inst.scenario_costs()[j];
    let not_partial = || ModelError::NotPartialSolution { scenario: j };
    match inst.family {
        Family::Selection => {
            let p = inst.selection_p().expect("selection structure");
            let have = model::support_size(x);
            if inst.feasible_mode == FeasibleMode::Exact && have > p {
                return Err(not_partial());
            }
            let need = p.saturating_sub(have);
            let mut candidates: Vec<usize> = (0..n).filter(|&i| x[i] == 0).collect();
            candidates.sort_by(|&a, &b| {
                costs[a]
                    .partial_cmp(&costs[b])
                    .expect("comparable costs")
                    .then(b.cmp(&a))
            });
            let mut y = vec![0u8; n];
            for &i in candidates.iter().take(need) {
                y[i] = 1;
            }
            Ok((dot_selected(costs, &y), y))
        }
        Family::Rs => {
            let groups = inst.rs_groups().expect("rs structure");
            let mut y = vec![0u8; n];
            for group in groups {
                let covered = group.iter().filter(|&&i| x[i] == 1).count();
                if covered >= 1 {
                    if inst.feasible_mode == FeasibleMode::Exact && covered > 1 {
                        return Err(not_partial());
                    }
                    continue;
                }
                // Cheapest tool; among ties the largest index keeps y
                // lexicographically smallest.
                let mut best: Option<usize> = None;
                for &i in group {
                    let better = match best {
                        None => true,
                        Some(b) => {
                            costs[i] < costs[b] || (costs[i] == costs[b] && i > b)
                        }
                    };
                    if better {
                        best = Some(i);
                    }
                }
                y[best.expect("groups are nonempty")] = 1;
            }
            Ok((dot_selected(costs, &y), y))
        }
        Family::SpanningTree => {
            let (node_count, edges) = inst.undirected().expect("tree structure");
            if !model::first_stage_acyclic(node_count, edges, x) {
                return Err(ModelError::CyclicFirstStage);
            }
            let mut uf = UnionFind::new(node_count);
            for (e, &(u, v)) in edges.iter().enumerate() {
                if x[e] == 1 {
                    uf.union(u, v);
                }
            }
            let mut order: Vec<usize> = (0..n).filter(|&e| x[e] == 0).collect();
            order.sort_by(|&a, &b| {
                costs[a]
                    .partial_cmp(&costs[b])
                    .expect("comparable costs")
                    .then(b.cmp(&a))
            });
            let mut y = vec![0u8; n];
            for e in order {
                let (u, v) = edges[e];
                if uf.union(u, v) {
                    y[e] = 1;
                }
            }
            if uf.components() != 1 {
                return Err(not_partial());
            }
            Ok((dot_selected(costs, &y), y))
        }
        Family::ShortestPath => match inst.feasible_mode {
            FeasibleMode::Superset => path_superset_recourse(inst, x, costs, j),
            FeasibleMode::Exact => path_exact_recourse(inst, x, costs, j),
        },
        Family::Assignment => match inst.feasible_mode {
            FeasibleMode::Superset => assignment_superset_recourse(inst, x, costs, j),
            FeasibleMode::Exact => assignment_exact_recourse(inst, x, costs, j),
        },
    }
}

fn same_optimum(candidate: f64, reference: f64) -> bool {
    candidate <= reference + RESTRICT_TOL * (1.0 + reference.abs())
}

/// Superset path recourse: zero-weight the owned arcs, then fix the recourse
/// vector bit by bit — an arc stays out of `y` whenever dropping it preserves
/// the optimal completion cost.
fn path_superset_recourse(
    inst: &TwoStageInstance,
    x: &[u8],
    costs: &[f64],
    j: usize,
) -> Result<(f64, Vec<u8>), ModelError> {
    let (node_count, arcs, source, sink) = inst.digraph().expect("digraph structure");
    let n = inst.element_count();
    let mut weights: Vec<f64> = (0..n)
        .map(|a| if x[a] == 1 { 0.0 } else { costs[a] })
        .collect();
    let optimum = dijkstra_min_cost(node_count, arcs, &weights, source, sink)
        .ok_or(ModelError::NotPartialSolution { scenario: j })?;
    let mut y = vec![0u8; n];
    for a in 0..n {
        if x[a] == 1 {
            continue;
        }
        let saved = weights[a];
        weights[a] = f64::INFINITY;
        let restricted = dijkstra_min_cost(node_count, arcs, &weights, source, sink);
        match restricted {
            Some(value) if same_optimum(value, optimum) => {}
            _ => {
                weights[a] = saved;
                y[a] = 1;
            }
        }
    }
    Ok((dot_selected(costs, &y), y))
}

/// Exact path recourse: enumerate the simple paths containing `x` and keep
/// the cheapest completion, ties toward the lexicographically smallest `y`.
fn path_exact_recourse(
    inst: &TwoStageInstance,
    x: &[u8],
    costs: &[f64],
    j: usize,
) -> Result<(f64, Vec<u8>), ModelError> {
    let n = inst.element_count();
    let required = model::support(x);
    let usable = vec![true; n];
    let mut best: Option<(f64, Vec<u8>)> = None;
    visit_simple_paths(inst, &usable, guard_limit(), &mut |path| {
        if !required.iter().all(|r| path.contains(r)) {
            return false;
        }
        let mut y = arcs_to_vector(n, path);
        for &r in &required {
            y[r] = 0;
        }
        let cost = dot_selected(costs, &y);
        let better = match &best {
            None => true,
            Some((bc, by)) => cost < *bc - 0.0 || (cost == *bc && y < *by),
        };
        if better {
            best = Some((cost, y));
        }
        false
    })?;
    best.ok_or(ModelError::NotPartialSolution { scenario: j })
}

/// Superset assignment recourse via the same restriction argument as paths,
/// with the matching DP as the completion oracle.
fn assignment_superset_recourse(
    inst: &TwoStageInstance,
    x: &[u8],
    costs: &[f64],
    j: usize,
) -> Result<(f64, Vec<u8>), ModelError> {
    let (left, right, edges) = inst.bipartite().expect("bipartite structure");
    let n = inst.element_count();
    let mut weights: Vec<f64> = (0..n)
        .map(|e| if x[e] == 1 { 0.0 } else { costs[e] })
        .collect();
    let optimum = matching_min_cost(left, right, edges, &weights)
        .ok_or(ModelError::NotPartialSolution { scenario: j })?;
    let mut y = vec![0u8; n];
    for e in 0..n {
        if x[e] == 1 {
            continue;
        }
        let saved = weights[e];
        weights[e] = f64::INFINITY;
        let restricted = matching_min_cost(left, right, edges, &weights);
        match restricted {
            Some(value) if same_optimum(value, optimum) => {}
            _ => {
                weights[e] = saved;
                y[e] = 1;
            }
        }
    }
    Ok((dot_selected(costs, &y), y))
}

/// Exact assignment recourse: `x` must itself be a partial matching, which is
/// completed on the uncovered nodes; the bit-fixing pass again realizes the
/// lexicographic tie-break.
fn assignment_exact_recourse(
    inst: &TwoStageInstance,
    x: &[u8],
    costs: &[f64],
    j: usize,
) -> Result<(f64, Vec<u8>), ModelError> {
    let (left, right, edges) = inst.bipartite().expect("bipartite structure");
    let n = inst.element_count();
    let mut left_taken = vec![false; left];
    let mut right_taken = vec![false; right];
    for (e, &(l, r)) in edges.iter().enumerate() {
        if x[e] == 1 {
            if left_taken[l] || right_taken[r] {
                return Err(ModelError::NotPartialSolution { scenario: j });
            }
            left_taken[l] = true;
            right_taken[r] = true;
        }
    }
    // Candidate edges must complete the matching exactly: both endpoints free.
    let mut weights: Vec<f64> = (0..n)
        .map(|e| {
            let (l, r) = edges[e];
            if x[e] == 0 && !left_taken[l] && !right_taken[r] {
                costs[e]
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let sub_cost = |weights: &[f64]| -> Option<f64> {
        // Collapse to the submatching problem on free nodes.
        let free_left: Vec<usize> = (0..left).filter(|&l| !left_taken[l]).collect();
        let free_right: Vec<usize> = (0..right).filter(|&r| !right_taken[r]).collect();
        if free_left.is_empty() {
            return Some(0.0);
        }
        let lpos: Vec<usize> = {
            let mut m = vec![usize::MAX; left];
            for (k, &l) in free_left.iter().enumerate() {
                m[l] = k;
            }
            m
        };
        let rpos: Vec<usize> = {
            let mut m = vec![usize::MAX; right];
            for (k, &r) in free_right.iter().enumerate() {
                m[r] = k;
            }
            m
        };
        let sub_edges: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(l, r)| {
                if lpos[l] != usize::MAX && rpos[r] != usize::MAX {
                    (lpos[l], rpos[r])
                } else {
                    (0, 0) // weight INFINITY below makes these irrelevant
                }
            })
            .collect();
        let sub_weights: Vec<f64> = (0..n)
            .map(|e| {
                let (l, r) = edges[e];
                if lpos[l] != usize::MAX && rpos[r] != usize::MAX {
                    weights[e]
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        matching_min_cost(free_left.len(), free_right.len(), &sub_edges, &sub_weights)
    };
    let optimum = sub_cost(&weights).ok_or(ModelError::NotPartialSolution { scenario: j })?;
    let mut y = vec![0u8; n];
    for e in 0..n {
        if !weights[e].is_finite() {
            continue;
        }
        let saved = weights[e];
        weights[e] = f64::INFINITY;
        let restricted = sub_cost(&weights);
        match restricted {
            Some(value) if same_optimum(value, optimum) => {}
            _ => {
                weights[e] = saved;
                y[e] = 1;
            }
        }
    }
    Ok((dot_selected(costs, &y), y))
}

/// Exhaustive optimization of the two-stage objective. Exact mode enumerates
/// every first-stage vector dominated by a catalog member; superset mode runs
/// a depth-first branch-and-bound with an admissible per-scenario bound.
pub fn brute_force_optimum(
    inst: &TwoStageInstance,
    objective: Objective,
) -> Result<SolveReport, ModelError> {
    if let Objective::Cvar(alpha) = objective {
        if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
            return Err(ModelError::Risk(crate::risk::RiskError::AlphaOutOfRange {
                alpha,
            }));
        }
    }
    let (value, x) = match inst.feasible_mode {
        FeasibleMode::Exact => exact_brute(inst, objective)?,
        FeasibleMode::Superset => superset_brute(inst, objective)?,
    };
    SolveReport::from_first_stage(inst, objective, x, Some(value), "brute", None)
}

fn exact_brute(
    inst: &TwoStageInstance,
    objective: Objective,
) -> Result<(f64, Vec<u8>), ModelError> {
    let limit = guard_limit();
    let catalog = enumerate_feasible(inst)?;
    if catalog.is_empty() {
        return Err(ModelError::NoFeasibleSolution);
    }
    // Candidate first stages: all sub-vectors of catalog members, deduplicated
    // in lexicographic order.
    let mut candidates: std::collections::BTreeSet<Vec<u8>> = std::collections::BTreeSet::new();
    for member in &catalog.members {
        let support = model::support(member);
        guard_check(
            candidates.len().saturating_add(1usize << support.len().min(40)),
            limit.saturating_mul(2),
        )?;
        for mask in 0u64..(1u64 << support.len()) {
            let mut x = vec![0u8; inst.element_count()];
            for (bit, &i) in support.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    x[i] = 1;
                }
            }
            candidates.insert(x);
            guard_check(candidates.len(), limit)?;
        }
    }
    let probs = inst.probabilities();
    let k = inst.scenario_count();
    let mut best: Option<(f64, Vec<u8>)> = None;
    for x in candidates {
        // Optimal recourse cost per scenario by scanning the catalog.
        let mut per_scenario = Vec::with_capacity(k);
        let mut feasible = true;
        for j in 0..k {
            let costs = &inst.scenario_costs()[j];
            let mut cheapest = f64::INFINITY;
            for member in &catalog.members {
                if x.iter().zip(member).any(|(&xb, &mb)| xb == 1 && mb == 0) {
                    continue;
                }
                let completion: f64 = (0..inst.element_count())
                    .map(|i| {
                        if member[i] == 1 && x[i] == 0 {
                            costs[i]
                        } else {
                            0.0
                        }
                    })
                    .sum();
                cheapest = cheapest.min(completion);
            }
            if !cheapest.is_finite() {
                feasible = false;
                break;
            }
            per_scenario.push(cheapest);
        }
        if !feasible {
            continue;
        }
        let value =
            dot_selected(&inst.first_stage_costs, &x) + apply_costs(objective, &per_scenario, probs);
        if best.as_ref().map_or(true, |(bv, _)| value < bv - IMPROVE_TOL) {
            best = Some((value, x));
        }
    }
    best.ok_or(ModelError::NoFeasibleSolution)
}

/// Per-scenario completion value of a full superset-mode first stage, or
/// `None` when the first stage is invalid (cyclic) or nothing completes it.
fn superset_value(inst: &TwoStageInstance, objective: Objective, x: &[u8]) -> Option<f64> {
    if inst.family == Family::SpanningTree {
        let (node_count, edges) = inst.undirected().expect("tree structure");
        if !model::first_stage_acyclic(node_count, edges, x) {
            return None;
        }
    }
    let k = inst.scenario_count();
    let mut per_scenario = Vec::with_capacity(k);
    for j in 0..k {
        let costs = &inst.scenario_costs()[j];
        let weights: Vec<f64> = (0..inst.element_count())
            .map(|i| if x[i] == 1 { 0.0 } else { costs[i] })
            .collect();
        per_scenario.push(family_min_cost(inst, &weights)?);
    }
    Some(
        dot_selected(&inst.first_stage_costs, x)
            + apply_costs(objective, &per_scenario, inst.probabilities()),
    )
}

/// Elements worth considering for the first stage in superset mode: the
/// element must appear in some member of `X`, and buying it up front must not
/// be dominated by deferring it in every scenario.
fn superset_branch_elements(inst: &TwoStageInstance) -> Vec<usize> {
    let n = inst.element_count();
    let mut relevant: Vec<bool> = vec![true; n];
    match inst.family {
        Family::ShortestPath => {
            let (node_count, arcs, source, sink) = inst.digraph().expect("digraph structure");
            let all = vec![1u8; n];
            let from_source = reach_forward(node_count, arcs, &all, source);
            let to_sink = reach_backward(node_count, arcs, &all, sink);
            for (a, &(tail, head)) in arcs.iter().enumerate() {
                relevant[a] = from_source[tail] && to_sink[head];
            }
        }
        Family::Assignment => {
            let (left, right, edges) = inst.bipartite().expect("bipartite structure");
            for e in 0..n {
                let weights: Vec<f64> = (0..n)
                    .map(|f| if f == e { 0.0 } else { 1.0 })
                    .collect();
                // Edge e is relevant iff some perfect matching uses it: force
                // it by making every matching that avoids it cost ≥ 1 more
                // than the best one through it, then compare.
                relevant[e] = matching_uses_edge(left, right, edges, e, &weights);
            }
        }
        _ => {}
    }
    (0..n)
        .filter(|&i| {
            if !relevant[i] {
                return false;
            }
            // Dominance: an element at least as expensive up front as in
            // every scenario can always be deferred.
            let up_front = inst.first_stage_costs[i];
            let worst_later = (0..inst.scenario_count())
                .map(|j| inst.cost(j, i))
                .fold(f64::NEG_INFINITY, f64::max);
            up_front < worst_later
        })
        .collect()
}

fn matching_uses_edge(
    left: usize,
    right: usize,
    edges: &[(usize, usize)],
    e: usize,
    _weights: &[f64],
) -> bool {
    // Force edge e, then ask for a perfect matching on the remaining nodes.
    let (fl, fr) = edges[e];
    let n = edges.len();
    let weights: Vec<f64> = (0..n)
        .map(|f| {
            let (l, r) = edges[f];
            if f == e {
                0.0
            } else if l == fl || r == fr {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    // A zero-cost perfect matching exists among the usable edges iff e extends
    // to a perfect matching.
    matching_min_cost(left, right, edges, &weights).is_some()
}

fn reach_forward(
    node_count: usize,
    arcs: &[(usize, usize)],
    usable: &[u8],
    from: usize,
) -> Vec<bool> {
    let mut seen = vec![false; node_count];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for (a, &(tail, head)) in arcs.iter().enumerate() {
            if usable[a] == 1 && tail == u && !seen[head] {
                seen[head] = true;
                stack.push(head);
            }
        }
    }
    seen
}

fn reach_backward(
    node_count: usize,
    arcs: &[(usize, usize)],
    usable: &[u8],
    to: usize,
) -> Vec<bool> {
    let mut seen = vec![false; node_count];
    seen[to] = true;
    let mut stack = vec![to];
    while let Some(u) = stack.pop() {
        for (a, &(tail, head)) in arcs.iter().enumerate() {
            if usable[a] == 1 && head == u && !seen[tail] {
                seen[tail] = true;
                stack.push(tail);
            }
        }
    }
    seen
}

/// First-improvement local search over single-bit flips, used to seed the
/// branch-and-bound with a good incumbent.
fn local_search(
    inst: &TwoStageInstance,
    objective: Objective,
    branch: &[usize],
    start: Vec<u8>,
) -> Option<(f64, Vec<u8>)> {
    let mut x = start;
    let mut value = superset_value(inst, objective, &x)?;
    for _ in 0..1000 {
        let mut improved = false;
        for &i in branch {
            x[i] ^= 1;
            match superset_value(inst, objective, &x) {
                Some(candidate) if candidate < value - IMPROVE_TOL => {
                    value = candidate;
                    improved = true;
                }
                _ => {
                    x[i] ^= 1;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Some((value, x))
}

fn superset_brute(
    inst: &TwoStageInstance,
    objective: Objective,
) -> Result<(f64, Vec<u8>), ModelError> {
    let n = inst.element_count();
    let all = vec![1u8; n];
    if !model::contains_member(inst, &all) {
        return Err(ModelError::NoFeasibleSolution);
    }
    let limit = guard_limit();
    let branch = superset_branch_elements(inst);
    let k = inst.scenario_count();

    // Seed the incumbent via local search from three deterministic starts.
    let start_all: Vec<u8> = {
        let mut x = vec![0u8; n];
        if inst.family == Family::SpanningTree {
            // Maximal acyclic subset of the branch edges, cheapest first.
            let (node_count, edges) = inst.undirected().expect("tree structure");
            let mut order = branch.clone();
            order.sort_by(|&a, &b| {
                inst.first_stage_costs[a]
                    .partial_cmp(&inst.first_stage_costs[b])
                    .expect("comparable costs")
                    .then(a.cmp(&b))
            });
            let mut uf = UnionFind::new(node_count);
            for e in order {
                if uf.union(edges[e].0, edges[e].1) {
                    x[e] = 1;
                }
            }
        } else {
            for &i in &branch {
                x[i] = 1;
            }
        }
        x
    };
    let start_mean: Vec<u8> = {
        let mut x = vec![0u8; n];
        for &i in &branch {
            let mean: f64 =
                (0..k).map(|j| inst.probabilities()[j] * inst.cost(j, i)).sum();
            if inst.first_stage_costs[i] <= mean {
                x[i] = 1;
            }
        }
        if inst.family == Family::SpanningTree {
            let (node_count, edges) = inst.undirected().expect("tree structure");
            let mut uf = UnionFind::new(node_count);
            for i in 0..n {
                if x[i] == 1 && !uf.union(edges[i].0, edges[i].1) {
                    x[i] = 0;
                }
            }
        }
        x
    };
    let mut best: Option<(f64, Vec<u8>)> = None;
    for start in [vec![0u8; n], start_all, start_mean] {
        if let Some((value, x)) = local_search(inst, objective, &branch, start) {
            if best.as_ref().map_or(true, |(bv, _)| value < bv - IMPROVE_TOL) {
                best = Some((value, x));
            }
        }
    }
    let (mut best_value, mut best_x) = best.ok_or(ModelError::NoFeasibleSolution)?;

    // Depth-first search over the branch elements with an admissible bound:
    // decided purchases are charged fully, undecided elements are priced at
    // min(first stage, scenario) inside each scenario's completion bound.
    struct Search<'a> {
        inst: &'a TwoStageInstance,
        objective: Objective,
        branch: &'a [usize],
        limit: usize,
        nodes: usize,
        best_value: f64,
        best_x: Vec<u8>,
        bound_weights: Vec<Vec<f64>>, // per scenario, updated in place
        x: Vec<u8>,
        tree_uf: Option<UnionFind>,
    }
    impl Search<'_> {
        fn lower_bound(&self, spent: f64) -> f64 {
            let k = self.inst.scenario_count();
            let mut per_scenario = Vec::with_capacity(k);
            for j in 0..k {
                match family_min_cost(self.inst, &self.bound_weights[j]) {
                    Some(v) => per_scenario.push(v),
                    None => return f64::INFINITY,
                }
            }
            spent + apply_costs(self.objective, &per_scenario, self.inst.probabilities())
        }

        fn dfs(&mut self, depth: usize, spent: f64) -> Result<(), ModelError> {
            self.nodes += 1;
            guard_check(self.nodes, self.limit)?;
            if self.lower_bound(spent) >= self.best_value - IMPROVE_TOL {
                return Ok(());
            }
            if depth == self.branch.len() {
                if let Some(value) = superset_value(self.inst, self.objective, &self.x) {
                    if value < self.best_value - IMPROVE_TOL {
                        self.best_value = value;
                        self.best_x = self.x.clone();
                    }
                }
                return Ok(());
            }
            let i = self.branch[depth];
            let k = self.inst.scenario_count();
            // Exclude i from the first stage: its price reverts to the
            // scenario cost inside the bound.
            let saved: Vec<f64> = (0..k).map(|j| self.bound_weights[j][i]).collect();
            for j in 0..k {
                self.bound_weights[j][i] = self.inst.cost(j, i);
            }
            self.dfs(depth + 1, spent)?;
            // Include i: it becomes free in every scenario's completion.
            let mut include_ok = true;
            let mut saved_uf = None;
            if let Some(uf) = &mut self.tree_uf {
                let (_, edges) = self.inst.undirected().expect("tree structure");
                saved_uf = Some(uf.clone());
                if !uf.union(edges[i].0, edges[i].1) {
                    include_ok = false; // cyclic first stage
                }
            }
            if include_ok {
                for j in 0..k {
                    self.bound_weights[j][i] = 0.0;
                }
                self.x[i] = 1;
                self.dfs(depth + 1, spent + self.inst.first_stage_costs[i])?;
                self.x[i] = 0;
            }
            if let (Some(uf), Some(saved_uf)) = (&mut self.tree_uf, saved_uf) {
                *uf = saved_uf;
            }
            for j in 0..k {
                self.bound_weights[j][i] = saved[j];
            }
            Ok(())
        }
    }

    let bound_weights: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..n)
                .map(|i| {
                    if branch.contains(&i) {
                        inst.first_stage_costs[i].min(inst.cost(j, i))
                    } else {
                        inst.cost(j, i)
                    }
                })
                .collect()
        })
        .collect();
    let mut search = Search {
        inst,
        objective,
        branch: &branch,
        limit,
        nodes: 0,
        best_value,
        best_x: best_x.clone(),
        bound_weights,
        x: vec![0u8; n],
        tree_uf: (inst.family == Family::SpanningTree)
            .then(|| UnionFind::new(inst.undirected().expect("tree structure").0)),
    };
    search.dfs(0, 0.0)?;
    if search.best_value < best_value {
        best_value = search.best_value;
        best_x = search.best_x;
    }
    Ok((best_value, best_x))
}
