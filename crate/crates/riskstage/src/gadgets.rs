//! Instance generators: the hardness-reduction gadgets (set cover, Hamiltonian
//! path, SAT), the chain reduction from representative selection, and seeded
//! random instances for every family.
//!
//! Each gadget ties a combinatorial ground truth — a minimum cover, a
//! Hamiltonian path, a satisfying assignment — to the optimal value of the
//! generated two-stage instance. The tests verify those equivalences
//! exhaustively at small scale, which is what makes the generators useful as
//! an oracle corpus. All generators are pure functions of their inputs (plus
//! the seed for [`gen_random`]).

use crate::model::{
    Bipartite, Digraph, Family, FamilyStructure, FeasibleMode, ModelError, RsPartition,
    SelectionCardinality, TwoStageInstance, UndirectedGraph,
};
use crate::util::SplitMix64;

/// A set-cover input: a universe `{0, 1, …, universe−1}` and a collection of
/// subsets, each listed by element index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetCoverInput {
    pub universe: usize,
    pub sets: Vec<Vec<usize>>,
}

impl SetCoverInput {
    /// Validates that indices are in range and every element lies in at least
    /// one set (so a cover exists).
    pub fn new(universe: usize, sets: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        if universe == 0 {
            return Err(ModelError::GadgetInput {
                reason: "set-cover universe is empty".to_string(),
            });
        }
        if sets.is_empty() {
            return Err(ModelError::GadgetInput {
                reason: "set cover needs at least one set".to_string(),
            });
        }
        let mut covered = vec![false; universe];
        for (group, set) in sets.iter().enumerate() {
            for &element in set {
                if element >= universe {
                    return Err(ModelError::GroupElementRange {
                        group,
                        element,
                        n: universe,
                    });
                }
                covered[element] = true;
            }
        }
        if let Some(element) = covered.iter().position(|&c| !c) {
            return Err(ModelError::UncoveredElement { element });
        }
        Ok(SetCoverInput { universe, sets })
    }

    fn contains(&self, set: usize, element: usize) -> bool {
        self.sets[set].contains(&element)
    }

    /// Size of a minimum cover, by exhaustive search over subsets of the
    /// collection. Exponential in the number of sets; guarded at 20.
    pub fn min_cover_size(&self) -> Result<usize, ModelError> {
        let m = self.sets.len();
        if m > 20 {
            return Err(ModelError::GadgetInput {
                reason: format!("exhaustive cover search limited to 20 sets, got {m}"),
            });
        }
        let mut best = m; // the full collection always covers
        for mask in 1u32..(1 << m) {
            let size = mask.count_ones() as usize;
            if size >= best {
                continue;
            }
            let covers = (0..self.universe).all(|u| {
                (0..m).any(|s| mask & (1 << s) != 0 && self.contains(s, u))
            });
            if covers {
                best = size;
            }
        }
        Ok(best)
    }
}

/// A CNF formula: variables are `1..=variables`, a literal is `+v` or `-v`,
/// and each clause is a disjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfInput {
    pub variables: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl CnfInput {
    pub fn new(variables: usize, clauses: Vec<Vec<i32>>) -> Result<Self, ModelError> {
        if variables == 0 {
            return Err(ModelError::GadgetInput {
                reason: "CNF needs at least one variable".to_string(),
            });
        }
        if clauses.is_empty() {
            return Err(ModelError::GadgetInput {
                reason: "CNF needs at least one clause".to_string(),
            });
        }
        for (index, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(ModelError::EmptyClause { index });
            }
            for &literal in clause {
                let var = literal.unsigned_abs() as usize;
                if literal == 0 || var > variables {
                    return Err(ModelError::GadgetInput {
                        reason: format!("clause {index} has bad literal {literal}"),
                    });
                }
            }
        }
        Ok(CnfInput { variables, clauses })
    }

    /// Truth-table satisfiability check. Exponential in the variable count;
    /// guarded at 20.
    pub fn satisfiable(&self) -> Result<bool, ModelError> {
        if self.variables > 20 {
            return Err(ModelError::GadgetInput {
                reason: format!(
                    "truth-table check limited to 20 variables, got {}",
                    self.variables
                ),
            });
        }
        Ok((0u32..1 << self.variables).any(|assignment| {
            self.clauses.iter().all(|clause| {
                clause.iter().any(|&literal| {
                    let var = literal.unsigned_abs() as usize - 1;
                    let value = assignment & (1 << var) != 0;
                    (literal > 0) == value
                })
            })
        }))
    }
}

fn uniform_probabilities(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Representative-selection image of a set cover. With `m` sets over a
/// `u`-element universe and `M = u + 1`: one tool per set at first-stage cost
/// `M`, one extra tool at `2M`; one scenario per element pricing a tool at 0
/// exactly when its set covers the element (the extra tool at `2M`); and one
/// final scenario pricing the set tools at `M + 1` and the extra tool at `M`.
/// All groups are singletons and probabilities are uniform.
///
/// The robust optimum is `(m + 1) · M + L*`, where `L*` is the minimum cover
/// size: the final scenario forces all but `L*` of the set tools into the
/// first stage, and the element scenarios force the deferred tools to form a
/// cover.
pub fn gen_rs_setcover(sc: &SetCoverInput) -> Result<TwoStageInstance, ModelError> {
    let m = sc.sets.len();
    let big = (sc.universe + 1) as f64;
    let n = m + 1;
    let mut first = vec![big; n];
    first[m] = 2.0 * big;
    let mut costs = Vec::with_capacity(sc.universe + 1);
    for u in 0..sc.universe {
        let mut row = Vec::with_capacity(n);
        for s in 0..m {
            row.push(if sc.contains(s, u) { 0.0 } else { big });
        }
        row.push(2.0 * big);
        costs.push(row);
    }
    let mut last = vec![big + 1.0; n];
    last[m] = big;
    costs.push(last);
    TwoStageInstance::new(
        Family::Rs,
        FeasibleMode::Exact,
        first,
        uniform_probabilities(sc.universe + 1),
        costs,
        FamilyStructure::RsPartition(RsPartition {
            groups: (0..n).map(|i| vec![i]).collect(),
        }),
    )
}

/// Shortest-path image of a set cover on a series-parallel network: one
/// two-arc `s → t` bundle per set, the front arc at first-stage cost 1 and the
/// back arc at `m + 1`; one scenario per element under which a back arc is
/// free exactly when its set covers the element and everything else costs
/// `m + 1`. Superset mode, uniform probabilities. Arc `2j` is the front arc of
/// bundle `j`, arc `2j + 1` its back arc.
///
/// The robust optimum equals the minimum cover size `L*`: buy the front arcs
/// of a cover, then every scenario completes through a free back arc. (The
/// expected-value optimum can be strictly smaller, because leaving a rare
/// element uncovered costs `m + 1` only with that element's probability.)
pub fn gen_sp_setcover(sc: &SetCoverInput) -> Result<TwoStageInstance, ModelError> {
    let m = sc.sets.len();
    let dear = (m + 1) as f64;
    let mut arcs = Vec::with_capacity(2 * m);
    let mut first = Vec::with_capacity(2 * m);
    for j in 0..m {
        arcs.push((0, 2 + j));
        first.push(1.0);
        arcs.push((2 + j, 1));
        first.push(dear);
    }
    let mut costs = Vec::with_capacity(sc.universe);
    for u in 0..sc.universe {
        let mut row = Vec::with_capacity(2 * m);
        for j in 0..m {
            row.push(dear);
            row.push(if sc.contains(j, u) { 0.0 } else { dear });
        }
        costs.push(row);
    }
    TwoStageInstance::new(
        Family::ShortestPath,
        FeasibleMode::Superset,
        first,
        uniform_probabilities(sc.universe),
        costs,
        FamilyStructure::Digraph(Digraph {
            node_count: 2 + m,
            arcs,
            source: 0,
            sink: 1,
        }),
    )
}

/// Shortest-path image of a Hamiltonian-path question on `g` (from its source
/// to its sink). The doubled network has nodes `v_i = i` and `v_i′ = n + i`,
/// forward arcs `(v_i, v_i′)` at first-stage cost 0 (indices `0..n`), and
/// backward arcs `(v_i′, v_j)` for all `i ≠ j` at first-stage cost 1 (ordered
/// by `(i, j)`). Scenario 1 makes the chain arcs `(v_i′, v_{i+1})` free;
/// scenario 2 makes `(v_i′, v_j)` free exactly when `(v_i, v_j)` is an arc of
/// `g`. Exact mode, two equiprobable scenarios.
///
/// The optimum is 0 iff `g` has a Hamiltonian source→sink path: scenario 1
/// forces every forward arc on the path into the first stage, and scenario 2
/// then threads them in the order of a Hamiltonian path.
pub fn gen_sp_hamiltonian(g: &Digraph) -> Result<TwoStageInstance, ModelError> {
    let n = g.node_count;
    if n < 2 {
        return Err(ModelError::TooFewNodes);
    }
    if g.source >= n || g.sink >= n {
        return Err(ModelError::GadgetInput {
            reason: "digraph terminals outside its node range".to_string(),
        });
    }
    if g.source == g.sink {
        return Err(ModelError::SourceIsSink);
    }
    let mut arcs = Vec::with_capacity(n + n * (n - 1));
    for i in 0..n {
        arcs.push((i, n + i));
    }
    let mut first = vec![0.0; n];
    let mut chain = Vec::with_capacity(n * (n - 1));
    let mut input = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            arcs.push((n + i, j));
            first.push(1.0);
            chain.push(if j == i + 1 { 0.0 } else { 1.0 });
            input.push(if g.arcs.contains(&(i, j)) { 0.0 } else { 1.0 });
        }
    }
    let forward = vec![1.0; n];
    let c1: Vec<f64> = forward.iter().chain(&chain).copied().collect();
    let c2: Vec<f64> = forward.iter().chain(&input).copied().collect();
    TwoStageInstance::new(
        Family::ShortestPath,
        FeasibleMode::Exact,
        first,
        vec![0.5, 0.5],
        vec![c1, c2],
        FamilyStructure::Digraph(Digraph {
            node_count: 2 * n,
            arcs,
            source: g.source,
            sink: g.sink,
        }),
    )
}

/// Shortest-path image of a CNF formula, in superset mode with two
/// equiprobable scenarios and `M = 2nm + 2` (`n` variables, `m` clauses).
///
/// Layout: a spine of nodes `0..=n` runs source to sink. The component of
/// variable `i` spans spine nodes `i` and `i + 1` and holds, per clause `j`,
/// a *true-side* arc `a_ij` and a *false-side* arc `b_ij`, each with private
/// endpoints and first-stage cost 1 (arc `2(i·m + j)` is `a_ij`, the next is
/// `b_ij`). *Dashed* arcs (first-stage `M`, scenario-1 cost 0) link each side
/// into a chain from spine node `i` to `i + 1`, so a free scenario-1 passage
/// through the component exists exactly when one full side was bought.
/// *Clause* arcs (first-stage `M`, scenario-2 cost 0) run a second chain
/// source → `v_0a` → … → `v_jb` → … → sink where the passage `v_ja → v_jb`
/// detours over the solid arc of one of clause `j`'s literals — free in
/// scenario 2 exactly when some chosen side satisfies the clause.
///
/// The optimum is at most `mn` iff the formula is satisfiable: the first
/// stage must buy one full side per variable (cost `mn`), which encodes an
/// assignment, and scenario 2 completes freely iff that assignment satisfies
/// every clause.
pub fn gen_sp_sat(f: &CnfInput) -> Result<TwoStageInstance, ModelError> {
    let n = f.variables;
    let m = f.clauses.len();
    let big = (2 * n * m + 2) as f64;
    // Nodes: spine 0..=n; then per (variable, clause) the four solid-arc
    // endpoints; then per clause the pair v_ja, v_jb.
    let spine = |i: usize| i;
    let base = n + 1;
    let ga = |i: usize, j: usize| base + 4 * (i * m + j);
    let ha = |i: usize, j: usize| base + 4 * (i * m + j) + 1;
    let gb = |i: usize, j: usize| base + 4 * (i * m + j) + 2;
    let hb = |i: usize, j: usize| base + 4 * (i * m + j) + 3;
    let cbase = base + 4 * n * m;
    let va = |j: usize| cbase + 2 * j;
    let vb = |j: usize| cbase + 2 * j + 1;
    let node_count = cbase + 2 * m;

    let mut arcs = Vec::new();
    let mut first = Vec::new();
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    let push = |arc: (usize, usize), cost: f64, s1: f64, s2: f64, arcs: &mut Vec<(usize, usize)>, first: &mut Vec<f64>, c1: &mut Vec<f64>, c2: &mut Vec<f64>| {
        arcs.push(arc);
        first.push(cost);
        c1.push(s1);
        c2.push(s2);
    };
    // Solid arcs: first-stage 1, expensive in both scenarios.
    for i in 0..n {
        for j in 0..m {
            push((ga(i, j), ha(i, j)), 1.0, big, big, &mut arcs, &mut first, &mut c1, &mut c2);
            push((gb(i, j), hb(i, j)), 1.0, big, big, &mut arcs, &mut first, &mut c1, &mut c2);
        }
    }
    // Dashed arcs: chain the two sides of each component, free in scenario 1.
    for i in 0..n {
        push((spine(i), ga(i, 0)), big, 0.0, big, &mut arcs, &mut first, &mut c1, &mut c2);
        push((spine(i), gb(i, 0)), big, 0.0, big, &mut arcs, &mut first, &mut c1, &mut c2);
        for j in 0..m - 1 {
            push((ha(i, j), ga(i, j + 1)), big, 0.0, big, &mut arcs, &mut first, &mut c1, &mut c2);
            push((hb(i, j), gb(i, j + 1)), big, 0.0, big, &mut arcs, &mut first, &mut c1, &mut c2);
        }
        push((ha(i, m - 1), spine(i + 1)), big, 0.0, big, &mut arcs, &mut first, &mut c1, &mut c2);
        push((hb(i, m - 1), spine(i + 1)), big, 0.0, big, &mut arcs, &mut first, &mut c1, &mut c2);
    }
    // Clause arcs: the clause chain plus detours over literal arcs, free in
    // scenario 2.
    push((spine(0), va(0)), big, big, 0.0, &mut arcs, &mut first, &mut c1, &mut c2);
    for (j, clause) in f.clauses.iter().enumerate() {
        let mut seen: Vec<i32> = Vec::new();
        for &literal in clause {
            if seen.contains(&literal) {
                continue;
            }
            seen.push(literal);
            let i = literal.unsigned_abs() as usize - 1;
            let (tail, head) = if literal > 0 {
                (ga(i, j), ha(i, j))
            } else {
                (gb(i, j), hb(i, j))
            };
            push((va(j), tail), big, big, 0.0, &mut arcs, &mut first, &mut c1, &mut c2);
            push((head, vb(j)), big, big, 0.0, &mut arcs, &mut first, &mut c1, &mut c2);
        }
        if j + 1 < m {
            push((vb(j), va(j + 1)), big, big, 0.0, &mut arcs, &mut first, &mut c1, &mut c2);
        }
    }
    push((vb(m - 1), spine(n)), big, big, 0.0, &mut arcs, &mut first, &mut c1, &mut c2);

    TwoStageInstance::new(
        Family::ShortestPath,
        FeasibleMode::Superset,
        first,
        vec![0.5, 0.5],
        vec![c1, c2],
        FamilyStructure::Digraph(Digraph {
            node_count,
            arcs,
            source: spine(0),
            sink: spine(n),
        }),
    )
}

/// Target structure for the chain reduction from representative selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainTarget {
    ShortestPath,
    SpanningTree,
}

/// Chain reduction: a singleton-group representative-selection instance is
/// the same problem as a path network with one arc (or edge) per tool — there
/// is a single feasible solution, and the only decision left is the stage in
/// which each element is bought. Costs, probabilities, and alpha carry over
/// unchanged; tool `i` becomes the arc/edge `(i, i + 1)`.
pub fn gen_chain(inst: &TwoStageInstance, target: ChainTarget) -> Result<TwoStageInstance, ModelError> {
    if inst.family != Family::Rs {
        return Err(ModelError::WrongFamily {
            algorithm: "gen-chain",
            family: inst.family.name(),
        });
    }
    inst.validate()?;
    let groups = inst.rs_groups().expect("rs structure");
    if let Some(group) = groups.iter().position(|g| g.len() != 1) {
        return Err(ModelError::GadgetInput {
            reason: format!("chain reduction needs singleton groups; group {group} has {}", groups[group].len()),
        });
    }
    let n = inst.element_count();
    let links: Vec<(usize, usize)> = (0..n).map(|i| (i, i + 1)).collect();
    let (mode, structure) = match target {
        ChainTarget::ShortestPath => (
            FeasibleMode::Exact,
            FamilyStructure::Digraph(Digraph {
                node_count: n + 1,
                arcs: links,
                source: 0,
                sink: n,
            }),
        ),
        ChainTarget::SpanningTree => (
            FeasibleMode::Superset,
            FamilyStructure::UndirectedGraph(UndirectedGraph {
                node_count: n + 1,
                edges: links,
            }),
        ),
    };
    let mut image = TwoStageInstance::new(
        match target {
            ChainTarget::ShortestPath => Family::ShortestPath,
            ChainTarget::SpanningTree => Family::SpanningTree,
        },
        mode,
        inst.first_stage_costs.clone(),
        inst.probabilities().to_vec(),
        inst.scenario_costs().to_vec(),
        structure,
    )?;
    image.alpha = inst.alpha;
    Ok(image)
}

/// Seeded random instance with uniform integer costs in `cost_range`
/// (inclusive). `n` counts tools/items for rs and selection, nodes for the
/// network families, and one side of the bipartition for assignment.
/// Structures are guaranteed feasible: shortest-path digraphs are DAGs with a
/// source→sink path, spanning-tree graphs are connected, and assignment
/// graphs contain the diagonal matching. Probabilities are random positive
/// ninths, normalized. Same arguments, same instance — bit for bit.
pub fn gen_random(
    family: Family,
    n: usize,
    k: usize,
    seed: u64,
    cost_range: (u64, u64),
) -> Result<TwoStageInstance, ModelError> {
    if n == 0 {
        return Err(ModelError::NoElements);
    }
    if k == 0 {
        return Err(ModelError::NoScenarios);
    }
    let (lo, hi) = cost_range;
    if lo > hi {
        return Err(ModelError::GadgetInput {
            reason: format!("empty cost range {lo}..={hi}"),
        });
    }
    if matches!(
        family,
        Family::ShortestPath | Family::SpanningTree | Family::Assignment
    ) && n < 2
    {
        return Err(ModelError::TooFewNodes);
    }
    let mut rng = SplitMix64::new(seed);
    let (mode, structure) = match family {
        Family::Rs => (
            FeasibleMode::Exact,
            FamilyStructure::RsPartition(RsPartition {
                groups: (0..n).map(|i| vec![i]).collect(),
            }),
        ),
        Family::Selection => (
            FeasibleMode::Exact,
            FamilyStructure::SelectionCardinality(SelectionCardinality {
                p: rng.int_in(1, n as u64) as usize,
            }),
        ),
        Family::ShortestPath => {
            let arcs = loop {
                let mut arcs = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.bernoulli(0.45) {
                            arcs.push((i, j));
                        }
                    }
                }
                if source_reaches_sink(n, &arcs) {
                    break arcs;
                }
            };
            (
                FeasibleMode::Exact,
                FamilyStructure::Digraph(Digraph {
                    node_count: n,
                    arcs,
                    source: 0,
                    sink: n - 1,
                }),
            )
        }
        Family::SpanningTree => {
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((rng.index(v), v));
            }
            for _ in 0..rng.int_in(0, 3) {
                let u = rng.index(n);
                let v = rng.index(n);
                if u != v {
                    edges.push((u.min(v), u.max(v)));
                }
            }
            (
                FeasibleMode::Superset,
                FamilyStructure::UndirectedGraph(UndirectedGraph {
                    node_count: n,
                    edges,
                }),
            )
        }
        Family::Assignment => {
            let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
            for l in 0..n {
                for r in 0..n {
                    if l != r && rng.bernoulli(0.3) {
                        edges.push((l, r));
                    }
                }
            }
            (
                FeasibleMode::Exact,
                FamilyStructure::Bipartite(Bipartite {
                    left_count: n,
                    right_count: n,
                    edges,
                }),
            )
        }
    };
    let element_count = match &structure {
        FamilyStructure::RsPartition(_) | FamilyStructure::SelectionCardinality(_) => n,
        FamilyStructure::Digraph(g) => g.arcs.len(),
        FamilyStructure::UndirectedGraph(g) => g.edges.len(),
        FamilyStructure::Bipartite(g) => g.edges.len(),
    };
    let first: Vec<f64> = (0..element_count).map(|_| rng.int_in(lo, hi) as f64).collect();
    let costs: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..element_count).map(|_| rng.int_in(lo, hi) as f64).collect())
        .collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.int_in(1, 9) as f64).collect();
    let total: f64 = weights.iter().sum();
    TwoStageInstance::new(
        family,
        mode,
        first,
        weights.into_iter().map(|w| w / total).collect(),
        costs,
        structure,
    )
}

fn source_reaches_sink(node_count: usize, arcs: &[(usize, usize)]) -> bool {
    if arcs.is_empty() {
        return false;
    }
    let mut seen = vec![false; node_count];
    seen[0] = true;
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        for &(tail, head) in arcs {
            if tail == u && !seen[head] {
                seen[head] = true;
                stack.push(head);
            }
        }
    }
    seen[node_count - 1]
}
