//! Canonical instance/plan data model, feasible-set semantics, objective
//! evaluation, and JSON I/O.
//!
//! An instance fixes element costs and a combinatorial family; the feasible
//! set `X` consists of the characteristic vectors of that family's objects
//! (p-element selections, one representative per group, simple s–t paths,
//! spanning trees, perfect matchings). Two feasible-set readings are
//! supported:
//!
//! * `exact` — a finished solution `x + y` must lie in `X` itself;
//! * `superset` — `x + y` only needs to contain a member of `X`, so redundant
//!   first-stage purchases are allowed (the relaxation `X̄`).
//!
//! A first-stage vector is a *partial solution* if it can still be completed
//! under the chosen reading; the optimal completion under scenario `j` is its
//! *recourse*. Evaluation composes `C·x` with a risk functional over the
//! per-scenario recourse costs.
//!
//! Spanning-tree instances expose a single mode (declared `superset`): the two
//! readings coincide once cyclic first stages are discarded, because dropping
//! an edge of a first-stage cycle never hurts any completion. Cyclic `x` is
//! rejected with a dedicated error rather than silently repaired.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::exact;
use crate::risk::{DiscreteDistribution, RiskError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance JSON: {0}")]
    Json(String),
    #[error("instance needs at least one element")]
    NoElements,
    #[error("instance needs at least one scenario")]
    NoScenarios,
    #[error("first_stage_costs has {got} entries, expected n = {expected}")]
    FirstStageLength { got: usize, expected: usize },
    #[error("scenario {scenario} has {got} costs, expected n = {expected}")]
    ScenarioLength {
        scenario: usize,
        got: usize,
        expected: usize,
    },
    #[error("probabilities list has {got} entries, expected one per scenario ({expected})")]
    ProbabilityLength { got: usize, expected: usize },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error("scenario {scenario} has probability {probability}, expected > 0")]
    NonPositiveProbability { scenario: usize, probability: f64 },
    #[error("{place} cost of element {element} is {cost} (must be finite and >= 0)")]
    BadCost {
        place: &'static str,
        element: usize,
        cost: f64,
    },
    #[error("alpha {alpha} outside [0, 1)")]
    BadAlpha { alpha: f64 },
    #[error("family {family} does not match the given structure")]
    StructureMismatch { family: &'static str },
    #[error("element {element} in two groups")]
    PartitionOverlap { element: usize },
    #[error("element {element} not in any group")]
    PartitionGap { element: usize },
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("group {group} lists element {element} outside 0..{n}")]
    GroupElementRange { group: usize, element: usize, n: usize },
    #[error("selection cardinality p = {p} outside 1..={n}")]
    BadCardinality { p: usize, n: usize },
    #[error("structure lists {got} {kind}, expected n = {expected}")]
    ElementCountMismatch {
        kind: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{kind} {index} endpoint {node} outside 0..{node_count}")]
    DanglingEndpoint {
        kind: &'static str,
        index: usize,
        node: usize,
        node_count: usize,
    },
    #[error("{kind} {index} is a self-loop at node {node}")]
    SelfLoop {
        kind: &'static str,
        index: usize,
        node: usize,
    },
    #[error("digraph needs distinct source and sink")]
    SourceIsSink,
    #[error("graph needs at least two nodes")]
    TooFewNodes,
    #[error("assignment structure needs left_count == right_count, got {left} vs {right}")]
    UnbalancedBipartite { left: usize, right: usize },
    #[error("spanning-tree instances use the single superset-equivalent mode; set feasible_mode to \"superset\"")]
    SpanningTreeMode,
    #[error("spanning-tree instance graph is not connected")]
    DisconnectedGraph,
    #[error("vector has {got} entries, expected {expected}")]
    VectorLength { got: usize, expected: usize },
    #[error("vector entry {index} is {value}, expected 0 or 1")]
    NotZeroOne { index: usize, value: u8 },
    #[error("first-stage vector is not a partial solution (scenario {scenario})")]
    NotPartialSolution { scenario: usize },
    #[error("first-stage edge set contains a cycle; an acyclic first stage is never worse")]
    CyclicFirstStage,
    #[error("plan has {got} recourse vectors, expected one per scenario ({expected})")]
    RecourseCount { got: usize, expected: usize },
    #[error("plan buys element {element} in both stages (scenario {scenario})")]
    PlanOverlap { scenario: usize, element: usize },
    #[error("plan is not feasible under scenario {scenario}")]
    PlanInfeasible { scenario: usize },
    #[error("report value {value} does not match its plan's objective {expected}")]
    ReportValueMismatch { value: f64, expected: f64 },
    #[error("report lower bound {lower_bound} exceeds its value {value}")]
    ReportBoundExceedsValue { lower_bound: f64, value: f64 },
    #[error("enumeration guard exceeded: {count} > {limit} (raise RISKSTAGE_GUARD_OVERRIDE to override)")]
    EnumerationGuard { count: usize, limit: usize },
    #[error("instance has no feasible solution")]
    NoFeasibleSolution,
    #[error("not series-parallel: {} arcs remain irreducible", kernel.len())]
    NotSeriesParallel { kernel: Vec<(usize, usize)> },
    #[error("digraph is cyclic; the connectivity solver needs a DAG")]
    CyclicDigraph,
    #[error("cut generation exceeded its iteration cap of {cap}")]
    CutGenerationExceeded { cap: usize },
    #[error("arc {index} ({tail} -> {head}) enters the source or leaves the sink")]
    BadTerminalArc {
        index: usize,
        tail: usize,
        head: usize,
    },
    #[error("set-cover element {element} belongs to no set")]
    UncoveredElement { element: usize },
    #[error("CNF clause {index} is empty")]
    EmptyClause { index: usize },
    #[error("generator input: {reason}")]
    GadgetInput { reason: String },
    #[error("algorithm {algorithm} does not apply to a {family} instance")]
    WrongFamily {
        algorithm: &'static str,
        family: &'static str,
    },
    #[error("algorithm {algorithm} requires feasible_mode \"{required}\"")]
    WrongMode {
        algorithm: &'static str,
        required: &'static str,
    },
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("linear program: {0}")]
    Lp(#[from] crate::lp::LpError),
}

/// Combinatorial family of the feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Rs,
    Selection,
    ShortestPath,
    SpanningTree,
    Assignment,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Rs => "rs",
            Family::Selection => "selection",
            Family::ShortestPath => "shortest-path",
            Family::SpanningTree => "spanning-tree",
            Family::Assignment => "assignment",
        }
    }
}

/// Exact (`x + y ∈ X`) versus superset (`x + y ⊇ z` for some `z ∈ X`) reading
/// of feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeasibleMode {
    Exact,
    Superset,
}

/// Group partition for the representatives family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsPartition {
    pub groups: Vec<Vec<usize>>,
}

/// Cardinality constraint for the selection family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionCardinality {
    pub p: usize,
}

/// Arc list with a designated source and sink for the path family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Digraph {
    pub node_count: usize,
    pub arcs: Vec<(usize, usize)>,
    pub source: usize,
    pub sink: usize,
}

/// Edge list for the spanning-tree family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UndirectedGraph {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Bipartite edge list for the assignment family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bipartite {
    pub left_count: usize,
    pub right_count: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Family-specific structure; element indices identify the columns of the cost
/// matrix (tools for `rs`/`selection`, arcs, edges). The JSON form is the
/// variant's bare field set; the required keys of the variants are pairwise
/// distinct, so untagged deserialization is unambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyStructure {
    RsPartition(RsPartition),
    SelectionCardinality(SelectionCardinality),
    Digraph(Digraph),
    UndirectedGraph(UndirectedGraph),
    Bipartite(Bipartite),
}

/// Scenario block: probabilities plus one cost row per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub probabilities: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
}

/// A two-stage instance. Construct via [`TwoStageInstance::new`] or
/// [`parse_instance`]; both validate every invariant. Code that fills the
/// fields directly must call [`TwoStageInstance::validate`] before handing the
/// instance to any solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageInstance {
    pub family: Family,
    pub feasible_mode: FeasibleMode,
    pub n: usize,
    pub first_stage_costs: Vec<f64>,
    pub scenarios: ScenarioSet,
    pub structure: FamilyStructure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl TwoStageInstance {
    pub fn new(
        family: Family,
        feasible_mode: FeasibleMode,
        first_stage_costs: Vec<f64>,
        probabilities: Vec<f64>,
        costs: Vec<Vec<f64>>,
        structure: FamilyStructure,
    ) -> Result<Self, ModelError> {
        let inst = TwoStageInstance {
            family,
            feasible_mode,
            n: first_stage_costs.len(),
            first_stage_costs,
            scenarios: ScenarioSet {
                probabilities,
                costs,
            },
            structure,
            alpha: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn element_count(&self) -> usize {
        self.n
    }

    pub fn scenario_count(&self) -> usize {
        self.scenarios.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.scenarios.probabilities
    }

    pub fn scenario_costs(&self) -> &[Vec<f64>] {
        &self.scenarios.costs
    }

    /// Second-stage cost of element `i` under scenario `j`.
    pub fn cost(&self, j: usize, i: usize) -> f64 {
        self.scenarios.costs[j][i]
    }

    pub fn rs_groups(&self) -> Option<&[Vec<usize>]> {
        match &self.structure {
            FamilyStructure::RsPartition(rs) => Some(&rs.groups),
            _ => None,
        }
    }

    pub fn selection_p(&self) -> Option<usize> {
        match &self.structure {
            FamilyStructure::SelectionCardinality(sel) => Some(sel.p),
            _ => None,
        }
    }

    pub fn digraph(&self) -> Option<(usize, &[(usize, usize)], usize, usize)> {
        match &self.structure {
            FamilyStructure::Digraph(g) => Some((g.node_count, g.arcs.as_slice(), g.source, g.sink)),
            _ => None,
        }
    }

    pub fn undirected(&self) -> Option<(usize, &[(usize, usize)])> {
        match &self.structure {
            FamilyStructure::UndirectedGraph(g) => Some((g.node_count, g.edges.as_slice())),
            _ => None,
        }
    }

    pub fn bipartite(&self) -> Option<(usize, usize, &[(usize, usize)])> {
        match &self.structure {
            FamilyStructure::Bipartite(g) => Some((g.left_count, g.right_count, g.edges.as_slice())),
            _ => None,
        }
    }

    /// Checks every instance invariant; see [`ModelError`] for the catalogue.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n;
        if n == 0 {
            return Err(ModelError::NoElements);
        }
        if self.first_stage_costs.len() != n {
            return Err(ModelError::FirstStageLength {
                got: self.first_stage_costs.len(),
                expected: n,
            });
        }
        let k = self.scenarios.costs.len();
        if k == 0 {
            return Err(ModelError::NoScenarios);
        }
        if self.scenarios.probabilities.len() != k {
            return Err(ModelError::ProbabilityLength {
                got: self.scenarios.probabilities.len(),
                expected: k,
            });
        }
        for (element, &cost) in self.first_stage_costs.iter().enumerate() {
            if !cost.is_finite() || cost < 0.0 {
                return Err(ModelError::BadCost {
                    place: "first-stage",
                    element,
                    cost,
                });
            }
        }
        for (scenario, row) in self.scenarios.costs.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::ScenarioLength {
                    scenario,
                    got: row.len(),
                    expected: n,
                });
            }
            for (element, &cost) in row.iter().enumerate() {
                if !cost.is_finite() || cost < 0.0 {
                    return Err(ModelError::BadCost {
                        place: "second-stage",
                        element,
                        cost,
                    });
                }
            }
        }
        for (scenario, &probability) in self.scenarios.probabilities.iter().enumerate() {
            if !probability.is_finite() || probability <= 0.0 {
                return Err(ModelError::NonPositiveProbability {
                    scenario,
                    probability,
                });
            }
        }
        let sum: f64 = self.scenarios.probabilities.iter().sum();
        if (sum - 1.0).abs() > crate::risk::PROBABILITY_SUM_TOLERANCE {
            return Err(ModelError::ProbabilitySum { sum });
        }
        if let Some(alpha) = self.alpha {
            if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
                return Err(ModelError::BadAlpha { alpha });
            }
        }
        self.validate_structure()
    }

    fn validate_structure(&self) -> Result<(), ModelError> {
        let n = self.n;
        let mismatch = || ModelError::StructureMismatch {
            family: self.family.name(),
        };
        match (&self.family, &self.structure) {
            (Family::Rs, FamilyStructure::RsPartition(RsPartition { groups })) => {
                let mut seen = vec![false; n];
                for (g, group) in groups.iter().enumerate() {
                    if group.is_empty() {
                        return Err(ModelError::EmptyGroup { group: g });
                    }
                    for &element in group {
                        if element >= n {
                            return Err(ModelError::GroupElementRange {
                                group: g,
                                element,
                                n,
                            });
                        }
                        if seen[element] {
                            return Err(ModelError::PartitionOverlap { element });
                        }
                        seen[element] = true;
                    }
                }
                if let Some(element) = seen.iter().position(|&s| !s) {
                    return Err(ModelError::PartitionGap { element });
                }
                Ok(())
            }
            (Family::Selection, FamilyStructure::SelectionCardinality(SelectionCardinality { p })) => {
                if *p == 0 || *p > n {
                    return Err(ModelError::BadCardinality { p: *p, n });
                }
                Ok(())
            }
            (
                Family::ShortestPath,
                FamilyStructure::Digraph(Digraph {
                    node_count,
                    arcs,
                    source,
                    sink,
                }),
            ) => {
                if *node_count < 2 {
                    return Err(ModelError::TooFewNodes);
                }
                if arcs.len() != n {
                    return Err(ModelError::ElementCountMismatch {
                        kind: "arcs",
                        got: arcs.len(),
                        expected: n,
                    });
                }
                if source == sink {
                    return Err(ModelError::SourceIsSink);
                }
                for (endpoint, name) in [(*source, "source"), (*sink, "sink")] {
                    if endpoint >= *node_count {
                        return Err(ModelError::DanglingEndpoint {
                            kind: name,
                            index: 0,
                            node: endpoint,
                            node_count: *node_count,
                        });
                    }
                }
                for (index, &(tail, head)) in arcs.iter().enumerate() {
                    for node in [tail, head] {
                        if node >= *node_count {
                            return Err(ModelError::DanglingEndpoint {
                                kind: "arc",
                                index,
                                node,
                                node_count: *node_count,
                            });
                        }
                    }
                    if tail == head {
                        return Err(ModelError::SelfLoop {
                            kind: "arc",
                            index,
                            node: tail,
                        });
                    }
                }
                Ok(())
            }
            (
                Family::SpanningTree,
                FamilyStructure::UndirectedGraph(UndirectedGraph { node_count, edges }),
            ) => {
                if self.feasible_mode != FeasibleMode::Superset {
                    return Err(ModelError::SpanningTreeMode);
                }
                if *node_count < 2 {
                    return Err(ModelError::TooFewNodes);
                }
                if edges.len() != n {
                    return Err(ModelError::ElementCountMismatch {
                        kind: "edges",
                        got: edges.len(),
                        expected: n,
                    });
                }
                let mut uf = crate::util::UnionFind::new(*node_count);
                for (index, &(u, v)) in edges.iter().enumerate() {
                    for node in [u, v] {
                        if node >= *node_count {
                            return Err(ModelError::DanglingEndpoint {
                                kind: "edge",
                                index,
                                node,
                                node_count: *node_count,
                            });
                        }
                    }
                    if u == v {
                        return Err(ModelError::SelfLoop {
                            kind: "edge",
                            index,
                            node: u,
                        });
                    }
                    uf.union(u, v);
                }
                if uf.components() != 1 {
                    return Err(ModelError::DisconnectedGraph);
                }
                Ok(())
            }
            (
                Family::Assignment,
                FamilyStructure::Bipartite(Bipartite {
                    left_count,
                    right_count,
                    edges,
                }),
            ) => {
                if left_count != right_count {
                    return Err(ModelError::UnbalancedBipartite {
                        left: *left_count,
                        right: *right_count,
                    });
                }
                if *left_count == 0 {
                    return Err(ModelError::TooFewNodes);
                }
                if edges.len() != n {
                    return Err(ModelError::ElementCountMismatch {
                        kind: "edges",
                        got: edges.len(),
                        expected: n,
                    });
                }
                for (index, &(l, r)) in edges.iter().enumerate() {
                    if l >= *left_count {
                        return Err(ModelError::DanglingEndpoint {
                            kind: "edge",
                            index,
                            node: l,
                            node_count: *left_count,
                        });
                    }
                    if r >= *right_count {
                        return Err(ModelError::DanglingEndpoint {
                            kind: "edge",
                            index,
                            node: r,
                            node_count: *right_count,
                        });
                    }
                }
                Ok(())
            }
            _ => Err(mismatch()),
        }
    }
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<TwoStageInstance, ModelError> {
    let inst: TwoStageInstance =
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    inst.validate()?;
    Ok(inst)
}

/// Serializes a validated instance to canonical JSON (fixed key order, fixed
/// pretty layout) so that re-serialization is byte-identical.
pub fn serialize_instance(inst: &TwoStageInstance) -> Result<String, ModelError> {
    inst.validate()?;
    let mut text = serde_json::to_string_pretty(inst).expect("instance serialization");
    text.push('\n');
    Ok(text)
}

/// First-stage decision plus one recourse vector per scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStagePlan {
    pub x: Vec<u8>,
    pub recourse: Vec<Vec<u8>>,
}

/// Objective functional applied to the induced recourse-cost distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Expectation,
    Robust,
    Cvar(f64),
}

impl Objective {
    pub fn apply(&self, d: &DiscreteDistribution) -> Result<f64, RiskError> {
        match self {
            Objective::Expectation => Ok(d.expectation()),
            Objective::Robust => Ok(d.worst_case()),
            Objective::Cvar(alpha) => d.cvar(*alpha),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Objective::Expectation => "expectation".to_string(),
            Objective::Robust => "robust".to_string(),
            Objective::Cvar(alpha) => format!("cvar({alpha})"),
        }
    }
}

impl Serialize for Objective {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Objective::Expectation => serializer.serialize_str("expectation"),
            Objective::Robust => serializer.serialize_str("robust"),
            Objective::Cvar(alpha) => {
                use serde::ser::SerializeMap;
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("cvar", alpha)?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Objective {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Cvar { cvar: f64 },
        }
        match Raw::deserialize(deserializer)? {
            Raw::Name(name) => match name.as_str() {
                "expectation" => Ok(Objective::Expectation),
                "robust" => Ok(Objective::Robust),
                other => Err(D::Error::custom(format!("unknown objective {other:?}"))),
            },
            Raw::Cvar { cvar } => Ok(Objective::Cvar(cvar)),
        }
    }
}

/// Result of a solve: objective, value, plan, per-scenario second-stage costs,
/// optional lower bound, algorithm id, optional seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: Objective,
    pub value: f64,
    pub x: Vec<u8>,
    pub recourse: Vec<Vec<u8>>,
    pub per_scenario_cost: Vec<f64>,
    pub lower_bound: Option<f64>,
    pub algorithm: String,
    pub seed: Option<u64>,
}

impl SolveReport {
    /// Builds a report from an explicit plan. The plan is validated and the
    /// objective value is computed from the plan's own recourse vectors, so
    /// the report invariant holds by construction.
    pub fn from_plan(
        inst: &TwoStageInstance,
        objective: Objective,
        plan: TwoStagePlan,
        lower_bound: Option<f64>,
        algorithm: &str,
        seed: Option<u64>,
    ) -> Result<Self, ModelError> {
        validate_plan(inst, &plan)?;
        let per_scenario_cost: Vec<f64> = (0..inst.scenario_count())
            .map(|j| dot_cost(&inst.scenarios.costs[j], &plan.recourse[j]))
            .collect();
        let value = plan_value(inst, &plan.x, &per_scenario_cost, objective)?;
        if let Some(lb) = lower_bound {
            if lb > value + 1e-9 {
                return Err(ModelError::ReportBoundExceedsValue {
                    lower_bound: lb,
                    value,
                });
            }
        }
        Ok(SolveReport {
            objective,
            value,
            x: plan.x,
            recourse: plan.recourse,
            per_scenario_cost,
            lower_bound,
            algorithm: algorithm.to_string(),
            seed,
        })
    }

    /// Builds a report from a first-stage vector by computing the optimal
    /// recourse for every scenario.
    pub fn from_first_stage(
        inst: &TwoStageInstance,
        objective: Objective,
        x: Vec<u8>,
        lower_bound: Option<f64>,
        algorithm: &str,
        seed: Option<u64>,
    ) -> Result<Self, ModelError> {
        let mut recourse = Vec::with_capacity(inst.scenario_count());
        for j in 0..inst.scenario_count() {
            let (_, y) = recourse_cost(inst, &x, j)?;
            recourse.push(y);
        }
        SolveReport::from_plan(inst, objective, TwoStagePlan { x, recourse }, lower_bound, algorithm, seed)
    }

    /// Re-checks the report invariants against an instance.
    pub fn validate(&self, inst: &TwoStageInstance) -> Result<(), ModelError> {
        let plan = TwoStagePlan {
            x: self.x.clone(),
            recourse: self.recourse.clone(),
        };
        validate_plan(inst, &plan)?;
        let per_scenario_cost: Vec<f64> = (0..inst.scenario_count())
            .map(|j| dot_cost(&inst.scenarios.costs[j], &plan.recourse[j]))
            .collect();
        let expected = plan_value(inst, &plan.x, &per_scenario_cost, self.objective)?;
        if (expected - self.value).abs() > 1e-9 {
            return Err(ModelError::ReportValueMismatch {
                value: self.value,
                expected,
            });
        }
        if let Some(lb) = self.lower_bound {
            if lb > self.value + 1e-9 {
                return Err(ModelError::ReportBoundExceedsValue {
                    lower_bound: lb,
                    value: self.value,
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))
    }
}

fn dot_cost(costs: &[f64], v: &[u8]) -> f64 {
    costs
        .iter()
        .zip(v)
        .map(|(&c, &b)| if b == 1 { c } else { 0.0 })
        .sum()
}

fn plan_value(
    inst: &TwoStageInstance,
    x: &[u8],
    per_scenario_cost: &[f64],
    objective: Objective,
) -> Result<f64, ModelError> {
    let atoms: Vec<(f64, f64)> = per_scenario_cost
        .iter()
        .zip(inst.probabilities())
        .map(|(&c, &p)| (c, p))
        .collect();
    let d = DiscreteDistribution::new(atoms)?;
    Ok(dot_cost(&inst.first_stage_costs, x) + objective.apply(&d)?)
}

/// Checks that `v` is a 0/1 vector of instance length.
pub fn check_zero_one(inst: &TwoStageInstance, v: &[u8]) -> Result<(), ModelError> {
    if v.len() != inst.element_count() {
        return Err(ModelError::VectorLength {
            got: v.len(),
            expected: inst.element_count(),
        });
    }
    for (index, &value) in v.iter().enumerate() {
        if value > 1 {
            return Err(ModelError::NotZeroOne { index, value });
        }
    }
    Ok(())
}

pub(crate) fn support(v: &[u8]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter_map(|(i, &b)| (b == 1).then_some(i))
        .collect()
}

pub(crate) fn support_size(v: &[u8]) -> usize {
    v.iter().filter(|&&b| b == 1).count()
}

/// Is `v` (a full 0/1 vector) a member of `X` itself?
pub(crate) fn is_member(inst: &TwoStageInstance, v: &[u8]) -> bool {
    match inst.family {
        Family::Selection => support_size(v) == inst.selection_p().expect("selection structure"),
        Family::Rs => inst
            .rs_groups()
            .expect("rs structure")
            .iter()
            .all(|group| group.iter().filter(|&&i| v[i] == 1).count() == 1),
        Family::ShortestPath => is_simple_path(inst, v),
        Family::SpanningTree => {
            let (node_count, edges) = inst.undirected().expect("tree structure");
            if support_size(v) != node_count - 1 {
                return false;
            }
            spans_graph(node_count, edges, v)
        }
        Family::Assignment => {
            let (left, right, edges) = inst.bipartite().expect("bipartite structure");
            let mut left_deg = vec![0usize; left];
            let mut right_deg = vec![0usize; right];
            for (i, &(l, r)) in edges.iter().enumerate() {
                if v[i] == 1 {
                    left_deg[l] += 1;
                    right_deg[r] += 1;
                }
            }
            left_deg.iter().all(|&d| d == 1) && right_deg.iter().all(|&d| d == 1)
        }
    }
}

/// Does `v` contain a member of `X` (the superset reading)?
pub(crate) fn contains_member(inst: &TwoStageInstance, v: &[u8]) -> bool {
    match inst.family {
        Family::Selection => support_size(v) >= inst.selection_p().expect("selection structure"),
        Family::Rs => inst
            .rs_groups()
            .expect("rs structure")
            .iter()
            .all(|group| group.iter().any(|&i| v[i] == 1)),
        Family::ShortestPath => {
            let (node_count, arcs, source, sink) = inst.digraph().expect("digraph structure");
            reachable(node_count, arcs, v, source)[sink]
        }
        Family::SpanningTree => {
            let (node_count, edges) = inst.undirected().expect("tree structure");
            spans_graph(node_count, edges, v)
        }
        Family::Assignment => {
            let (left, right, edges) = inst.bipartite().expect("bipartite structure");
            let allowed: Vec<usize> = support(v);
            max_bipartite_matching(left, right, edges, &allowed) == left
        }
    }
}

/// Exact-mode path membership: the support of `v` must be precisely the arc
/// set of one simple source→sink path.
fn is_simple_path(inst: &TwoStageInstance, v: &[u8]) -> bool {
    let (node_count, arcs, source, sink) = inst.digraph().expect("digraph structure");
    let chosen = support(v);
    if chosen.is_empty() {
        return false;
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for &a in &chosen {
        out[arcs[a].0].push(a);
    }
    let mut visited = vec![false; node_count];
    let mut node = source;
    let mut used = 0usize;
    loop {
        if visited[node] {
            return false;
        }
        visited[node] = true;
        if node == sink {
            return used == chosen.len();
        }
        match out[node].as_slice() {
            [a] => {
                used += 1;
                node = arcs[*a].1;
            }
            _ => return false,
        }
    }
}

fn reachable(node_count: usize, arcs: &[(usize, usize)], v: &[u8], from: usize) -> Vec<bool> {
    let mut seen = vec![false; node_count];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for (i, &(tail, head)) in arcs.iter().enumerate() {
            if v[i] == 1 && tail == u && !seen[head] {
                seen[head] = true;
                stack.push(head);
            }
        }
    }
    seen
}

fn spans_graph(node_count: usize, edges: &[(usize, usize)], v: &[u8]) -> bool {
    let mut uf = crate::util::UnionFind::new(node_count);
    for (i, &(u, w)) in edges.iter().enumerate() {
        if v[i] == 1 {
            uf.union(u, w);
        }
    }
    uf.components() == 1
}

pub(crate) fn first_stage_acyclic(node_count: usize, edges: &[(usize, usize)], x: &[u8]) -> bool {
    let mut uf = crate::util::UnionFind::new(node_count);
    for (i, &(u, w)) in edges.iter().enumerate() {
        if x[i] == 1 && !uf.union(u, w) {
            return false;
        }
    }
    true
}

/// Maximum bipartite matching (augmenting paths) over the edge indices listed
/// in `allowed`. Optionally some edges can be forced into the matching first;
/// forcing an edge whose endpoints are taken returns `None`.
pub(crate) fn max_bipartite_matching(
    left: usize,
    right: usize,
    edges: &[(usize, usize)],
    allowed: &[usize],
) -> usize {
    matching_with_forced(left, right, edges, allowed, &[]).unwrap_or(0)
}

pub(crate) fn matching_with_forced(
    left: usize,
    right: usize,
    edges: &[(usize, usize)],
    allowed: &[usize],
    forced: &[usize],
) -> Option<usize> {
    let mut match_left = vec![usize::MAX; left];
    let mut match_right = vec![usize::MAX; right];
    let mut size = 0usize;
    for &e in forced {
        let (l, r) = edges[e];
        if match_left[l] != usize::MAX || match_right[r] != usize::MAX {
            return None;
        }
        match_left[l] = r;
        match_right[r] = l;
        size += 1;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); left];
    for &e in allowed {
        let (l, r) = edges[e];
        if match_left[l] == usize::MAX && match_right[r] != l {
            adj[l].push(r);
        }
    }
    // Forced left nodes keep their partner: only augment from free left nodes,
    // and never rematch a forced right node.
    let forced_right: Vec<bool> = {
        let mut fr = vec![false; right];
        for &e in forced {
            fr[edges[e].1] = true;
        }
        fr
    };
    fn augment(
        l: usize,
        adj: &[Vec<usize>],
        match_right: &mut [usize],
        match_left: &mut [usize],
        forced_right: &[bool],
        visited: &mut [bool],
    ) -> bool {
        for &r in &adj[l] {
            if forced_right[r] || visited[r] {
                continue;
            }
            visited[r] = true;
            let current = match_right[r];
            if current == usize::MAX
                || augment(current, adj, match_right, match_left, forced_right, visited)
            {
                match_right[r] = l;
                match_left[l] = r;
                return true;
            }
        }
        false
    }
    for l in 0..left {
        if match_left[l] != usize::MAX {
            continue;
        }
        let mut visited = vec![false; right];
        if augment(
            l,
            &adj,
            &mut match_right,
            &mut match_left,
            &forced_right,
            &mut visited,
        ) {
            size += 1;
        }
    }
    Some(size)
}

/// Can `x` still be completed to a solution?
///
/// Exact mode asks for a member `z ∈ X` with `x ≤ z`; superset mode only needs
/// `X` to be nonempty, since any member can be bought disjointly on top of
/// `x`. For spanning trees a cyclic `x` answers `false` (the canonical form of
/// the equivalent acyclic decision is required; see the module docs).
pub fn is_partial_solution(inst: &TwoStageInstance, x: &[u8]) -> Result<bool, ModelError> {
    check_zero_one(inst, x)?;
    match inst.feasible_mode {
        FeasibleMode::Superset => match inst.family {
            Family::SpanningTree => {
                let (node_count, edges) = inst.undirected().expect("tree structure");
                Ok(first_stage_acyclic(node_count, edges, x))
            }
            _ => {
                let all = vec![1u8; inst.element_count()];
                Ok(contains_member(inst, &all))
            }
        },
        FeasibleMode::Exact => match inst.family {
            Family::Selection => {
                Ok(support_size(x) <= inst.selection_p().expect("selection structure"))
            }
            Family::Rs => Ok(inst
                .rs_groups()
                .expect("rs structure")
                .iter()
                .all(|group| group.iter().filter(|&&i| x[i] == 1).count() <= 1)),
            Family::ShortestPath => exact::path_superset_member_exists(inst, x),
            Family::Assignment => {
                let (left, right, edges) = inst.bipartite().expect("bipartite structure");
                let chosen = support(x);
                let mut left_deg = vec![0usize; left];
                let mut right_deg = vec![0usize; right];
                for &e in &chosen {
                    left_deg[edges[e].0] += 1;
                    right_deg[edges[e].1] += 1;
                }
                if left_deg.iter().any(|&d| d > 1) || right_deg.iter().any(|&d| d > 1) {
                    return Ok(false);
                }
                let allowed: Vec<usize> = (0..edges.len()).collect();
                Ok(
                    matching_with_forced(left, right, edges, &allowed, &chosen)
                        == Some(left),
                )
            }
            Family::SpanningTree => unreachable!("spanning-tree instances are superset-mode"),
        },
    }
}

/// Optimal recourse for `x` under scenario `j`: the cheapest completion cost
/// and the corresponding second-stage vector (ties broken toward the
/// lexicographically smallest recourse vector).
pub fn recourse_cost(
    inst: &TwoStageInstance,
    x: &[u8],
    j: usize,
) -> Result<(f64, Vec<u8>), ModelError> {
    check_zero_one(inst, x)?;
    exact::family_recourse(inst, x, j)
}

/// The distribution of optimal recourse costs across scenarios.
pub fn induced_distribution(
    inst: &TwoStageInstance,
    x: &[u8],
) -> Result<DiscreteDistribution, ModelError> {
    let mut atoms = Vec::with_capacity(inst.scenario_count());
    for j in 0..inst.scenario_count() {
        let (cost, _) = recourse_cost(inst, x, j)?;
        atoms.push((cost, inst.probabilities()[j]));
    }
    Ok(DiscreteDistribution::new(atoms)?)
}

/// `C·x + F[induced distribution]` with optimal recourse in every scenario.
pub fn evaluate_first_stage(
    inst: &TwoStageInstance,
    x: &[u8],
    objective: Objective,
) -> Result<f64, ModelError> {
    let d = induced_distribution(inst, x)?;
    Ok(dot_cost(&inst.first_stage_costs, x) + objective.apply(&d)?)
}

/// `C·x + F[plan's own per-scenario costs]`, using the plan's recourse vectors
/// as given (they need not be optimal, only feasible).
pub fn evaluate_plan(
    inst: &TwoStageInstance,
    plan: &TwoStagePlan,
    objective: Objective,
) -> Result<f64, ModelError> {
    validate_plan(inst, plan)?;
    let per_scenario_cost: Vec<f64> = (0..inst.scenario_count())
        .map(|j| dot_cost(&inst.scenarios.costs[j], &plan.recourse[j]))
        .collect();
    plan_value(inst, &plan.x, &per_scenario_cost, objective)
}

/// Checks plan shape, stage disjointness, and per-scenario feasibility.
pub fn validate_plan(inst: &TwoStageInstance, plan: &TwoStagePlan) -> Result<(), ModelError> {
    check_zero_one(inst, &plan.x)?;
    if plan.recourse.len() != inst.scenario_count() {
        return Err(ModelError::RecourseCount {
            got: plan.recourse.len(),
            expected: inst.scenario_count(),
        });
    }
    if inst.family == Family::SpanningTree {
        let (node_count, edges) = inst.undirected().expect("tree structure");
        if !first_stage_acyclic(node_count, edges, &plan.x) {
            return Err(ModelError::CyclicFirstStage);
        }
    }
    for (j, y) in plan.recourse.iter().enumerate() {
        check_zero_one(inst, y)?;
        let mut full = vec![0u8; inst.element_count()];
        for i in 0..inst.element_count() {
            if plan.x[i] == 1 && y[i] == 1 {
                return Err(ModelError::PlanOverlap {
                    scenario: j,
                    element: i,
                });
            }
            full[i] = plan.x[i] | y[i];
        }
        let ok = match inst.feasible_mode {
            FeasibleMode::Exact => is_member(inst, &full),
            FeasibleMode::Superset => contains_member(inst, &full),
        };
        if !ok {
            return Err(ModelError::PlanInfeasible { scenario: j });
        }
    }
    Ok(())
}
