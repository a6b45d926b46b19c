use riskstage::exact::{brute_force_optimum, enumerate_feasible};
use riskstage::gadgets::{gen_rs_setcover, SetCoverInput};
use riskstage::model::{
    evaluate_first_stage, evaluate_plan, induced_distribution, is_partial_solution,
    parse_instance, recourse_cost, serialize_instance, validate_plan, Bipartite, Digraph, Family,
    FamilyStructure, FeasibleMode, ModelError, Objective, RsPartition, SelectionCardinality,
    SolveReport, TwoStageInstance, TwoStagePlan, UndirectedGraph,
};
use riskstage::util::SplitMix64;

const TOL: f64 = 1e-9;

fn selection_instance(
    p: usize,
    mode: FeasibleMode,
    first: Vec<f64>,
    probs: Vec<f64>,
    costs: Vec<Vec<f64>>,
) -> TwoStageInstance {
    TwoStageInstance::new(
        Family::Selection,
        mode,
        first,
        probs,
        costs,
        FamilyStructure::SelectionCardinality(SelectionCardinality { p }),
    )
    .expect("valid selection instance")
}

fn sp_instance(
    node_count: usize,
    arcs: Vec<(usize, usize)>,
    mode: FeasibleMode,
    first: Vec<f64>,
    probs: Vec<f64>,
    costs: Vec<Vec<f64>>,
) -> TwoStageInstance {
    let sink = node_count - 1;
    TwoStageInstance::new(
        Family::ShortestPath,
        mode,
        first,
        probs,
        costs,
        FamilyStructure::Digraph(Digraph {
            node_count,
            arcs,
            source: 0,
            sink,
        }),
    )
    .expect("valid shortest-path instance")
}

fn tree_instance(
    node_count: usize,
    edges: Vec<(usize, usize)>,
    first: Vec<f64>,
    probs: Vec<f64>,
    costs: Vec<Vec<f64>>,
) -> TwoStageInstance {
    TwoStageInstance::new(
        Family::SpanningTree,
        FeasibleMode::Superset,
        first,
        probs,
        costs,
        FamilyStructure::UndirectedGraph(UndirectedGraph { node_count, edges }),
    )
    .expect("valid spanning-tree instance")
}

fn random_probs(rng: &mut SplitMix64, k: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..k).map(|_| rng.int_in(1, 9) as f64).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn random_costs(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.int_in(0, 20) as f64).collect()
}

/// Random DAG on 0..n with source 0 and sink n-1 connected.
fn random_dag(rng: &mut SplitMix64, max_nodes: usize) -> (usize, Vec<(usize, usize)>) {
    loop {
        let n = rng.int_in(2, max_nodes as u64) as usize;
        let mut arcs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.bernoulli(0.45) {
                    arcs.push((i, j));
                }
            }
        }
        let mut reach = vec![false; n];
        reach[0] = true;
        for &(t, h) in &arcs {
            if reach[t] {
                reach[h] = true;
            }
        }
        if reach[n - 1] {
            return (n, arcs);
        }
    }
}

#[test]
fn minimal_selection_instance_round_trips() {
    let inst = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![1.0, 2.0],
        vec![1.0],
        vec![vec![3.0, 4.0]],
    );
    let text = serialize_instance(&inst).unwrap();
    let back = parse_instance(&text).unwrap();
    assert_eq!(back, inst);
    // Canonical form: re-serialization is byte-identical.
    assert_eq!(serialize_instance(&back).unwrap(), text);
}

#[test]
fn instance_json_schema_is_accepted() {
    let text = r#"{
        "family": "selection",
        "feasible_mode": "exact",
        "n": 2,
        "first_stage_costs": [1.0, 2.0],
        "scenarios": {"probabilities": [1.0], "costs": [[3.0, 4.0]]},
        "structure": {"p": 1}
    }"#;
    let inst = parse_instance(text).unwrap();
    assert_eq!(inst.family, Family::Selection);
    assert_eq!(inst.selection_p(), Some(1));
    assert_eq!(inst.alpha, None);

    match parse_instance("not json") {
        Err(ModelError::Json(_)) => {}
        other => panic!("expected a JSON error, got {other:?}"),
    }
}

#[test]
fn every_family_round_trips_and_alpha_is_kept() {
    let mut instances = vec![
        selection_instance(
            2,
            FeasibleMode::Superset,
            vec![1.0, 2.0, 3.0],
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0, 2.0], vec![2.0, 1.0, 0.0]],
        ),
        TwoStageInstance::new(
            Family::Rs,
            FeasibleMode::Exact,
            vec![1.0, 2.0, 3.0],
            vec![1.0],
            vec![vec![3.0, 2.0, 1.0]],
            FamilyStructure::RsPartition(RsPartition {
                groups: vec![vec![0, 1], vec![2]],
            }),
        )
        .unwrap(),
        sp_instance(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            FeasibleMode::Exact,
            vec![1.0, 1.0, 3.0],
            vec![0.25, 0.75],
            vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]],
        ),
        tree_instance(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![1.0, 2.0, 3.0],
            vec![1.0],
            vec![vec![3.0, 2.0, 1.0]],
        ),
        TwoStageInstance::new(
            Family::Assignment,
            FeasibleMode::Exact,
            vec![1.0, 2.0, 3.0],
            vec![1.0],
            vec![vec![3.0, 2.0, 1.0]],
            FamilyStructure::Bipartite(Bipartite {
                left_count: 2,
                right_count: 2,
                edges: vec![(0, 0), (1, 1), (0, 1)],
            }),
        )
        .unwrap(),
    ];
    instances[0].alpha = Some(0.3);
    for inst in &instances {
        let text = serialize_instance(inst).unwrap();
        let back = parse_instance(&text).unwrap();
        assert_eq!(&back, inst, "round-trip changed the instance:\n{text}");
        assert_eq!(serialize_instance(&back).unwrap(), text);
    }
    assert_eq!(parse_instance(&serialize_instance(&instances[0]).unwrap())
        .unwrap()
        .alpha, Some(0.3));
}

#[test]
fn setcover_generated_instance_round_trips() {
    let cover = SetCoverInput::new(
        7,
        vec![
            vec![1, 3, 2],
            vec![0],
            vec![2, 6],
            vec![0, 3, 5, 6],
            vec![1, 4, 5],
            vec![0, 5],
        ],
    )
    .unwrap();
    let inst = gen_rs_setcover(&cover).unwrap();
    let text = serialize_instance(&inst).unwrap();
    assert_eq!(parse_instance(&text).unwrap(), inst);
}

#[test]
fn probability_sum_violation_is_reported() {
    let result = TwoStageInstance::new(
        Family::Selection,
        FeasibleMode::Exact,
        vec![1.0, 2.0],
        vec![0.5, 0.6],
        vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        FamilyStructure::SelectionCardinality(SelectionCardinality { p: 1 }),
    );
    match result {
        Err(ModelError::ProbabilitySum { sum }) => {
            assert!((sum - 1.1).abs() < 1e-12);
            let message = ModelError::ProbabilitySum { sum }.to_string();
            assert!(
                message.starts_with("probabilities sum to 1.1"),
                "unexpected message: {message}"
            );
        }
        other => panic!("expected a probability-sum error, got {other:?}"),
    }
}

#[test]
fn partition_overlap_is_reported() {
    let result = TwoStageInstance::new(
        Family::Rs,
        FeasibleMode::Exact,
        vec![1.0, 2.0],
        vec![1.0],
        vec![vec![1.0, 2.0]],
        FamilyStructure::RsPartition(RsPartition {
            groups: vec![vec![0], vec![0, 1]],
        }),
    );
    match result {
        Err(err @ ModelError::PartitionOverlap { element: 0 }) => {
            assert_eq!(err.to_string(), "element 0 in two groups");
        }
        other => panic!("expected a partition-overlap error, got {other:?}"),
    }
}

#[test]
fn structural_validation_errors() {
    // Dangling arc endpoint.
    let dangling = TwoStageInstance::new(
        Family::ShortestPath,
        FeasibleMode::Exact,
        vec![1.0],
        vec![1.0],
        vec![vec![1.0]],
        FamilyStructure::Digraph(Digraph {
            node_count: 3,
            arcs: vec![(0, 5)],
            source: 0,
            sink: 2,
        }),
    );
    assert!(matches!(
        dangling,
        Err(ModelError::DanglingEndpoint { node: 5, .. })
    ));

    // Self-loop.
    let looped = TwoStageInstance::new(
        Family::ShortestPath,
        FeasibleMode::Exact,
        vec![1.0, 1.0],
        vec![1.0],
        vec![vec![1.0, 1.0]],
        FamilyStructure::Digraph(Digraph {
            node_count: 3,
            arcs: vec![(0, 2), (1, 1)],
            source: 0,
            sink: 2,
        }),
    );
    assert!(matches!(
        looped,
        Err(ModelError::SelfLoop { index: 1, node: 1, .. })
    ));

    // Family and structure disagree.
    let mismatched = TwoStageInstance::new(
        Family::Selection,
        FeasibleMode::Exact,
        vec![1.0, 2.0],
        vec![1.0],
        vec![vec![1.0, 2.0]],
        FamilyStructure::RsPartition(RsPartition {
            groups: vec![vec![0], vec![1]],
        }),
    );
    assert!(matches!(
        mismatched,
        Err(ModelError::StructureMismatch { family: "selection" })
    ));

    // Assignment sides must balance.
    let unbalanced = TwoStageInstance::new(
        Family::Assignment,
        FeasibleMode::Exact,
        vec![1.0, 2.0],
        vec![1.0],
        vec![vec![1.0, 2.0]],
        FamilyStructure::Bipartite(Bipartite {
            left_count: 2,
            right_count: 1,
            edges: vec![(0, 0), (1, 0)],
        }),
    );
    assert!(matches!(
        unbalanced,
        Err(ModelError::UnbalancedBipartite { left: 2, right: 1 })
    ));

    // Spanning-tree instances reject exact mode and disconnected graphs.
    let exact_tree = TwoStageInstance::new(
        Family::SpanningTree,
        FeasibleMode::Exact,
        vec![1.0, 2.0],
        vec![1.0],
        vec![vec![1.0, 2.0]],
        FamilyStructure::UndirectedGraph(UndirectedGraph {
            node_count: 3,
            edges: vec![(0, 1), (1, 2)],
        }),
    );
    assert!(matches!(exact_tree, Err(ModelError::SpanningTreeMode)));

    let split = TwoStageInstance::new(
        Family::SpanningTree,
        FeasibleMode::Superset,
        vec![1.0, 2.0],
        vec![1.0],
        vec![vec![1.0, 2.0]],
        FamilyStructure::UndirectedGraph(UndirectedGraph {
            node_count: 4,
            edges: vec![(0, 1), (2, 3)],
        }),
    );
    assert!(matches!(split, Err(ModelError::DisconnectedGraph)));

    // Alpha outside [0, 1) is rejected at validation time.
    let mut bad_alpha = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![1.0, 2.0],
        vec![1.0],
        vec![vec![1.0, 2.0]],
    );
    bad_alpha.alpha = Some(1.0);
    assert!(matches!(
        bad_alpha.validate(),
        Err(ModelError::BadAlpha { alpha }) if alpha == 1.0
    ));
}

#[test]
fn partial_solution_examples() {
    let exact = selection_instance(
        2,
        FeasibleMode::Exact,
        vec![1.0; 3],
        vec![1.0],
        vec![vec![1.0; 3]],
    );
    assert!(!is_partial_solution(&exact, &[1, 1, 1]).unwrap());
    assert!(is_partial_solution(&exact, &[1, 1, 0]).unwrap());
    assert!(is_partial_solution(&exact, &[0, 0, 0]).unwrap());

    let superset = selection_instance(
        2,
        FeasibleMode::Superset,
        vec![1.0; 3],
        vec![1.0],
        vec![vec![1.0; 3]],
    );
    assert!(is_partial_solution(&superset, &[1, 1, 1]).unwrap());

    // Two arcs that lie on no common s-t path of the diamond graph.
    let diamond = sp_instance(
        4,
        vec![(0, 1), (0, 2), (1, 3), (2, 3)],
        FeasibleMode::Exact,
        vec![1.0; 4],
        vec![1.0],
        vec![vec![1.0; 4]],
    );
    assert!(!is_partial_solution(&diamond, &[1, 0, 0, 1]).unwrap());
    assert!(is_partial_solution(&diamond, &[1, 0, 1, 0]).unwrap());

    // Malformed vectors are rejected, not coerced.
    assert!(matches!(
        is_partial_solution(&exact, &[1, 0]),
        Err(ModelError::VectorLength { got: 2, expected: 3 })
    ));
    assert!(matches!(
        is_partial_solution(&exact, &[2, 0, 0]),
        Err(ModelError::NotZeroOne { index: 0, value: 2 })
    ));
}

#[test]
fn selection_recourse_picks_cheapest_remaining() {
    let inst = selection_instance(
        2,
        FeasibleMode::Exact,
        vec![0.0; 3],
        vec![1.0],
        vec![vec![9.0, 3.0, 1.0]],
    );
    let (cost, y) = recourse_cost(&inst, &[1, 0, 0], 0).unwrap();
    assert_eq!(cost, 1.0);
    assert_eq!(y, vec![0, 0, 1]);
}

#[test]
fn tree_recourse_matches_the_catalog_minimum() {
    // 4-node graph with 5 edges; x buys edge (0,1).
    let inst = tree_instance(
        4,
        vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)],
        vec![0.0; 5],
        vec![0.5, 0.5],
        vec![
            vec![4.0, 1.0, 7.0, 3.0, 2.0],
            vec![1.0, 9.0, 2.0, 8.0, 1.0],
        ],
    );
    let x = [1u8, 0, 0, 0, 0];
    let catalog = enumerate_feasible(&inst).unwrap();
    assert_eq!(catalog.len(), 8, "spanning trees of the 5-edge graph");
    for j in 0..2 {
        let (cost, y) = recourse_cost(&inst, &x, j).unwrap();
        let oracle = catalog
            .members
            .iter()
            .map(|z| {
                z.iter()
                    .enumerate()
                    .filter(|&(i, &zi)| zi == 1 && x[i] == 0)
                    .map(|(i, _)| inst.cost(j, i))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((cost - oracle).abs() < TOL, "scenario {j}: {cost} vs {oracle}");
        // The recourse must complete x to a superset of some tree.
        let full: Vec<u8> = x.iter().zip(&y).map(|(&a, &b)| a | b).collect();
        assert!(catalog
            .members
            .iter()
            .any(|z| z.iter().zip(&full).all(|(&zi, &fi)| zi <= fi)));
    }
}

#[test]
fn path_recourse_ignores_a_detour_arc() {
    // Arc 3 is a detour (1 -> 2) lying on no shortest continuation; x buys it.
    let inst = sp_instance(
        4,
        vec![(0, 1), (1, 3), (0, 3), (1, 2)],
        FeasibleMode::Superset,
        vec![0.0; 4],
        vec![1.0],
        vec![vec![5.0, 5.0, 20.0, 1.0]],
    );
    let x = [0u8, 0, 0, 1];
    let (cost, y) = recourse_cost(&inst, &x, 0).unwrap();
    // Cheapest path is 0 -> 1 -> 3 at 10; the bought detour is unused but kept.
    assert_eq!(cost, 10.0);
    assert_eq!(y, vec![1, 1, 0, 0]);
}

#[test]
fn recourse_is_scenario_separable() {
    let base = selection_instance(
        2,
        FeasibleMode::Exact,
        vec![0.0; 4],
        vec![0.5, 0.5],
        vec![vec![4.0, 1.0, 7.0, 3.0], vec![2.0, 2.0, 2.0, 2.0]],
    );
    let mut bumped = base.clone();
    bumped.scenarios.costs[1] = vec![100.0, 0.0, 55.0, 3.5];
    bumped.validate().unwrap();
    let x = [0u8, 1, 0, 0];
    let before = recourse_cost(&base, &x, 0).unwrap();
    let after = recourse_cost(&bumped, &x, 0).unwrap();
    assert_eq!(before, after);
}

#[test]
fn induced_distribution_atoms_and_complete_solutions() {
    // K=1: a single atom.
    let single = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![0.0, 0.0],
        vec![1.0],
        vec![vec![5.0, 7.0]],
    );
    let d = induced_distribution(&single, &[0, 0]).unwrap();
    assert_eq!(d.atoms(), &[(5.0, 1.0)]);

    // A complete member of X needs no recourse: all atoms are 0.
    let complete = selection_instance(
        2,
        FeasibleMode::Exact,
        vec![1.0; 3],
        vec![0.25, 0.75],
        vec![vec![9.0, 9.0, 9.0], vec![5.0, 5.0, 5.0]],
    );
    let d = induced_distribution(&complete, &[1, 0, 1]).unwrap();
    assert_eq!(d.atoms(), &[(0.0, 0.25), (0.0, 0.75)]);
}

#[test]
fn induced_atoms_match_a_direct_selection_oracle() {
    let mut rng = SplitMix64::new(0xA11CE);
    for _ in 0..30 {
        let n = rng.int_in(2, 7) as usize;
        let p = rng.int_in(1, n as u64) as usize;
        let k = rng.int_in(1, 4) as usize;
        let probs = random_probs(&mut rng, k);
        let costs: Vec<Vec<f64>> = (0..k).map(|_| random_costs(&mut rng, n)).collect();
        let inst = selection_instance(
            p,
            FeasibleMode::Exact,
            vec![0.0; n],
            probs.clone(),
            costs.clone(),
        );
        // Random partial first stage of size <= p.
        let mut x = vec![0u8; n];
        let picks = rng.int_in(0, p as u64) as usize;
        while x.iter().filter(|&&b| b == 1).count() < picks {
            x[rng.index(n)] = 1;
        }
        let d = induced_distribution(&inst, &x).unwrap();
        for (j, &(value, prob)) in d.atoms().iter().enumerate() {
            let mut remaining: Vec<f64> = (0..n)
                .filter(|&i| x[i] == 0)
                .map(|i| costs[j][i])
                .collect();
            remaining.sort_by(f64::total_cmp);
            let need = p - x.iter().filter(|&&b| b == 1).count();
            let oracle: f64 = remaining[..need].iter().sum();
            assert!((value - oracle).abs() < TOL);
            assert!((prob - probs[j]).abs() < TOL);
        }
    }
}

#[test]
fn evaluation_identities_and_objective_ordering() {
    let mut rng = SplitMix64::new(0xBEEF);
    for _ in 0..40 {
        let n = rng.int_in(2, 6) as usize;
        let p = rng.int_in(1, n as u64) as usize;
        let k = rng.int_in(1, 4) as usize;
        let inst = selection_instance(
            p,
            FeasibleMode::Exact,
            random_costs(&mut rng, n),
            random_probs(&mut rng, k),
            (0..k).map(|_| random_costs(&mut rng, n)).collect(),
        );
        let x = vec![0u8; n];
        let expectation = evaluate_first_stage(&inst, &x, Objective::Expectation).unwrap();
        let cvar0 = evaluate_first_stage(&inst, &x, Objective::Cvar(0.0)).unwrap();
        let cvar = evaluate_first_stage(&inst, &x, Objective::Cvar(0.6)).unwrap();
        let robust = evaluate_first_stage(&inst, &x, Objective::Robust).unwrap();
        assert_eq!(expectation, cvar0, "CVaR at level 0 is the expectation");
        assert!(expectation <= cvar + TOL);
        assert!(cvar <= robust + TOL);
        // Determinism: a second evaluation is bit-identical.
        assert_eq!(
            evaluate_first_stage(&inst, &x, Objective::Cvar(0.6)).unwrap(),
            cvar
        );
    }
}

#[test]
fn zero_first_stage_is_the_pure_second_stage_plan() {
    let inst = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![100.0, 100.0],
        vec![0.5, 0.5],
        vec![vec![5.0, 7.0], vec![3.0, 8.0]],
    );
    let value = evaluate_first_stage(&inst, &[0, 0], Objective::Expectation).unwrap();
    assert!((value - (0.5 * 5.0 + 0.5 * 3.0)).abs() < TOL);
}

#[test]
fn redundant_arcs_pay_off_only_in_superset_mode() {
    // Diamond with two arc-disjoint s-t paths {0,2} and {1,3}. Heads are
    // expensive up front; each scenario makes exactly one head cheap later.
    // Committing to a single path costs M+1; buying both tails up front and
    // finishing with whichever head is cheap costs 3.
    let m = 10.0;
    let arcs = vec![(0usize, 1usize), (0, 2), (1, 3), (2, 3)];
    let first = vec![1.0, 1.0, m, m];
    let probs = vec![0.5, 0.5];
    let costs = vec![vec![m, m, 1.0, m], vec![m, m, m, 1.0]];
    let exact = sp_instance(
        4,
        arcs.clone(),
        FeasibleMode::Exact,
        first.clone(),
        probs.clone(),
        costs.clone(),
    );
    let superset = sp_instance(4, arcs, FeasibleMode::Superset, first, probs, costs);

    let exact_report = brute_force_optimum(&exact, Objective::Robust).unwrap();
    let superset_report = brute_force_optimum(&superset, Objective::Robust).unwrap();
    assert!((exact_report.value - (m + 1.0)).abs() < TOL);
    assert!((superset_report.value - 3.0).abs() < TOL);
    assert_eq!(superset_report.x, vec![1, 1, 0, 0]);
}

#[test]
fn superset_mode_never_beats_exact_mode_the_other_way() {
    let mut rng = SplitMix64::new(0xD1CE);
    let objectives = [Objective::Expectation, Objective::Robust, Objective::Cvar(0.3)];
    let mut trials = 0;
    while trials < 20 {
        let (n, arcs) = random_dag(&mut rng, 5);
        if arcs.len() > 8 {
            continue;
        }
        let k = rng.int_in(1, 3) as usize;
        let first = random_costs(&mut rng, arcs.len());
        let probs = random_probs(&mut rng, k);
        let costs: Vec<Vec<f64>> = (0..k).map(|_| random_costs(&mut rng, arcs.len())).collect();
        let exact = sp_instance(
            n,
            arcs.clone(),
            FeasibleMode::Exact,
            first.clone(),
            probs.clone(),
            costs.clone(),
        );
        let superset = sp_instance(
            n,
            arcs.clone(),
            FeasibleMode::Superset,
            first,
            probs,
            costs,
        );
        for objective in objectives {
            let tight = brute_force_optimum(&exact, objective).unwrap().value;
            let relaxed = brute_force_optimum(&superset, objective).unwrap().value;
            assert!(
                relaxed <= tight + TOL,
                "superset {relaxed} above exact {tight} for {objective:?}"
            );
        }
        trials += 1;
    }
}

#[test]
fn plan_validation_rejects_malformed_plans() {
    let inst = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![1.0, 1.0],
        vec![0.5, 0.5],
        vec![vec![1.0, 2.0], vec![2.0, 1.0]],
    );

    let overlap = TwoStagePlan {
        x: vec![1, 0],
        recourse: vec![vec![1, 0], vec![0, 0]],
    };
    assert!(matches!(
        validate_plan(&inst, &overlap),
        Err(ModelError::PlanOverlap { scenario: 0, element: 0 })
    ));

    let short = TwoStagePlan {
        x: vec![1, 0],
        recourse: vec![vec![0, 0]],
    };
    assert!(matches!(
        validate_plan(&inst, &short),
        Err(ModelError::RecourseCount { got: 1, expected: 2 })
    ));

    let infeasible = TwoStagePlan {
        x: vec![0, 0],
        recourse: vec![vec![0, 0], vec![0, 1]],
    };
    assert!(matches!(
        validate_plan(&inst, &infeasible),
        Err(ModelError::PlanInfeasible { scenario: 0 })
    ));

    let triangle = tree_instance(
        3,
        vec![(0, 1), (1, 2), (0, 2)],
        vec![0.0; 3],
        vec![1.0],
        vec![vec![1.0; 3]],
    );
    let cyclic = TwoStagePlan {
        x: vec![1, 1, 1],
        recourse: vec![vec![0, 0, 0]],
    };
    assert!(matches!(
        validate_plan(&triangle, &cyclic),
        Err(ModelError::CyclicFirstStage)
    ));
}

#[test]
fn evaluate_plan_uses_the_given_recourse() {
    let inst = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![100.0, 100.0],
        vec![1.0],
        vec![vec![5.0, 7.0]],
    );
    let lazy = TwoStagePlan {
        x: vec![0, 0],
        recourse: vec![vec![0, 1]],
    };
    let value = evaluate_plan(&inst, &lazy, Objective::Expectation).unwrap();
    assert!((value - 7.0).abs() < TOL, "plan pays for its own recourse");
    let best = evaluate_first_stage(&inst, &[0, 0], Objective::Expectation).unwrap();
    assert!((best - 5.0).abs() < TOL);
}

#[test]
fn solve_reports_hold_their_invariants() {
    let inst = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![1.0, 4.0],
        vec![0.5, 0.5],
        vec![vec![9.0, 2.0], vec![1.0, 6.0]],
    );
    let plan = TwoStagePlan {
        x: vec![0, 0],
        recourse: vec![vec![0, 1], vec![1, 0]],
    };
    let report = SolveReport::from_plan(
        &inst,
        Objective::Expectation,
        plan,
        Some(1.0),
        "brute",
        Some(7),
    )
    .unwrap();
    assert!((report.value - 1.5).abs() < TOL);
    assert_eq!(report.per_scenario_cost, vec![2.0, 1.0]);
    report.validate(&inst).unwrap();

    // A tampered value is caught.
    let mut tampered = report.clone();
    tampered.value += 1.0;
    assert!(matches!(
        tampered.validate(&inst),
        Err(ModelError::ReportValueMismatch { .. })
    ));

    // A lower bound above the value is rejected at build time and on re-check.
    let optimistic = SolveReport::from_plan(
        &inst,
        Objective::Expectation,
        TwoStagePlan {
            x: vec![0, 0],
            recourse: vec![vec![0, 1], vec![1, 0]],
        },
        Some(2.0),
        "brute",
        None,
    );
    assert!(matches!(
        optimistic,
        Err(ModelError::ReportBoundExceedsValue { .. })
    ));
    let mut inflated = report.clone();
    inflated.lower_bound = Some(report.value + 1.0);
    assert!(matches!(
        inflated.validate(&inst),
        Err(ModelError::ReportBoundExceedsValue { .. })
    ));
}

#[test]
fn solve_report_json_round_trips_all_objective_forms() {
    let inst = selection_instance(
        1,
        FeasibleMode::Exact,
        vec![1.0, 4.0],
        vec![0.5, 0.5],
        vec![vec![9.0, 2.0], vec![1.0, 6.0]],
    );
    for objective in [Objective::Expectation, Objective::Robust, Objective::Cvar(0.25)] {
        let report =
            SolveReport::from_first_stage(&inst, objective, vec![0, 0], None, "brute", None)
                .unwrap();
        let text = report.to_json();
        let back = SolveReport::from_json(&text).unwrap();
        assert_eq!(back, report);
        back.validate(&inst).unwrap();
    }
    let cvar_text = SolveReport::from_first_stage(
        &inst,
        Objective::Cvar(0.25),
        vec![0, 0],
        None,
        "brute",
        None,
    )
    .unwrap()
    .to_json();
    assert!(cvar_text.contains("\"cvar\": 0.25"));
    let robust_text =
        SolveReport::from_first_stage(&inst, Objective::Robust, vec![0, 0], None, "brute", None)
            .unwrap()
            .to_json();
    assert!(robust_text.contains("\"objective\": \"robust\""));
}
