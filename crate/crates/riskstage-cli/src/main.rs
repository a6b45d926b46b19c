//! `riskstage` — command-line front end for the two-stage optimization
//! library.
//!
//! Subcommands:
//!
//! * `solve` — run a solver on an instance file and print a solve report.
//! * `eval` — evaluate a given first-stage vector with optimal recourse.
//! * `gen` — write instances: seeded random corpora and the set-cover,
//!   Hamiltonian-path, and SAT gadgets.
//! * `transform` — optimum-preserving instance maps (zero-scenario
//!   augmentation, chain reduction).
//! * `reduce` — family-changing reductions (shortest path → assignment).
//! * `bench` — compare an algorithm against brute force over seeded random
//!   instances and tabulate approximation ratios.
//!
//! Exit codes: 0 on success; 1 on a usage error (bad flags, malformed input,
//! or an algorithm/instance mismatch); 2 on an algorithm failure (enumeration
//! guard, LP failure, or a randomized rounding run that stays infeasible).
//! There is no wall-clock seeding: every randomized path requires `--seed`,
//! so repeated invocations produce byte-identical output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskstage::exact::brute_force_optimum;
use riskstage::gadgets::{
    gen_chain, gen_random, gen_rs_setcover, gen_sp_hamiltonian, gen_sp_sat, gen_sp_setcover,
    ChainTarget, CnfInput, SetCoverInput,
};
use riskstage::model::{
    parse_instance, serialize_instance, Digraph, Family, ModelError, Objective, SolveReport,
    TwoStageInstance,
};
use riskstage::networks::{
    connectivity_solve, mst_randomized_rounding, sp_dp_expectation, sp_to_assignment, MstVariant,
};
use riskstage::risk::{augment_with_zero_scenario, cvar_ratio_sigma};
use riskstage::selection::{
    rs_lp_round_cvar, rs_lp_round_robust, rs_solve_expectation, selection_dp_expectation,
    selection_randomized_rounding,
};

#[derive(Parser)]
#[command(
    name = "riskstage",
    version,
    about = "Two-stage combinatorial optimization under risk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print a solve report (JSON).
    Solve(SolveArgs),
    /// Evaluate a first-stage vector with optimal recourse per scenario.
    Eval(EvalArgs),
    /// Generate an instance and print it (JSON).
    Gen(GenArgs),
    /// Apply an optimum-preserving instance transform.
    Transform(TransformArgs),
    /// Apply a family-changing reduction.
    Reduce(ReduceArgs),
    /// Compare an algorithm against brute force over random instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Algorithm to run; family compatibility is checked up front.
    #[arg(long, value_enum)]
    algorithm: AlgorithmId,
    /// Objective functional applied to the recourse-cost distribution.
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Expectation)]
    objective: ObjectiveKind,
    /// CVaR level in [0, 1); required with --objective cvar.
    #[arg(long)]
    alpha: Option<f64>,
    /// Seed for the randomized algorithms (selection-rr, mst-rr-*).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Instance JSON file.
    #[arg(long)]
    input: PathBuf,
    /// First-stage vector as a comma-separated 0/1 list, e.g. "1,0,1".
    #[arg(long)]
    x: String,
    /// Objective functional.
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Expectation)]
    objective: ObjectiveKind,
    /// CVaR level in [0, 1); required with --objective cvar.
    #[arg(long)]
    alpha: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Seeded random instance with uniform integer costs.
    Random {
        /// Combinatorial family of the feasible set.
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Tools/items for rs and selection, nodes for the network families,
        /// one side of the bipartition for assignment.
        #[arg(long)]
        n: usize,
        /// Number of scenarios.
        #[arg(long)]
        k: usize,
        /// Generator seed; same arguments, same instance — bit for bit.
        #[arg(long)]
        seed: u64,
        /// Smallest cost (inclusive).
        #[arg(long, default_value_t = 0)]
        cost_lo: u64,
        /// Largest cost (inclusive).
        #[arg(long, default_value_t = 20)]
        cost_hi: u64,
        /// Write the instance here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Representative-selection set-cover gadget: the robust optimum is
    /// (m+1)·M + L, where L is the minimum cover size.
    RsSetcover {
        /// Universe size; elements are 0..universe.
        #[arg(long)]
        universe: usize,
        /// JSON file holding the sets: a list of lists of element indices.
        #[arg(long)]
        sets: PathBuf,
        /// Write the instance here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Series-parallel shortest-path set-cover gadget: the robust optimum is
    /// the minimum cover size.
    SpSetcover {
        /// Universe size; elements are 0..universe.
        #[arg(long)]
        universe: usize,
        /// JSON file holding the sets: a list of lists of element indices.
        #[arg(long)]
        sets: PathBuf,
        /// Write the instance here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Shortest-path Hamiltonian-path gadget: the robust optimum is at most
    /// the node count exactly when the digraph has a Hamiltonian path.
    SpHamiltonian {
        /// JSON file holding the digraph:
        /// {"node_count":…,"arcs":[[tail,head],…],"source":…,"sink":…}.
        #[arg(long)]
        graph: PathBuf,
        /// Write the instance here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Shortest-path SAT gadget: the robust optimum is at most m·n exactly
    /// when the formula is satisfiable.
    SpSat {
        /// Number of variables; literals are ±1..=variables.
        #[arg(long)]
        variables: usize,
        /// JSON file holding the clauses: a list of lists of nonzero
        /// integers, negative for negated literals.
        #[arg(long)]
        clauses: PathBuf,
        /// Write the instance here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TransformArgs {
    #[command(subcommand)]
    kind: TransformKind,
}

#[derive(Subcommand)]
enum TransformKind {
    /// Zero-scenario augmentation: expectation-optimal solutions of the input
    /// are exactly the CVaR-optimal solutions of the image.
    EToCvar {
        /// Instance JSON file.
        #[arg(long)]
        input: PathBuf,
        /// CVaR level in (0, 1).
        #[arg(long)]
        alpha: f64,
        /// Write the image here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Chain reduction: a singleton-group rs instance becomes a path (or
    /// path-shaped tree) network with identical costs and optima.
    Chain {
        /// Instance JSON file (rs family, singleton groups).
        #[arg(long)]
        input: PathBuf,
        /// Image family.
        #[arg(long, value_enum)]
        target: ChainTargetArg,
        /// Write the image here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReduceArgs {
    #[command(subcommand)]
    kind: ReduceKind,
}

#[derive(Subcommand)]
enum ReduceKind {
    /// Shortest path → assignment: dummy edges let perfect matchings encode
    /// s–t paths; the optimum value is preserved.
    SpToAssignment {
        /// Instance JSON file (shortest-path family, no arcs into the source
        /// or out of the sink).
        #[arg(long)]
        input: PathBuf,
        /// Write the image here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Algorithm to benchmark against brute force.
    #[arg(long, value_enum)]
    algorithm: AlgorithmId,
    /// Family of the generated instances; must suit the algorithm.
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Number of trials; trial t uses seed --seed + t for generation and
    /// rounding alike.
    #[arg(long, default_value_t = 20)]
    trials: u64,
    /// Base seed.
    #[arg(long)]
    seed: u64,
    /// Elements per generated instance (see `gen random --n`).
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Scenarios per generated instance.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Objective to compare under. Passing cvar with an exact expectation
    /// algorithm benchmarks its expectation-optimal solution under CVaR
    /// against the sigma-ratio bound.
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Expectation)]
    objective: ObjectiveKind,
    /// CVaR level in [0, 1); required with --objective cvar.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Write the table here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmId {
    /// Exhaustive search over all partial solutions; any family, any
    /// objective, desk scale only.
    Brute,
    /// Independent per-group minimum under expectation (rs family).
    RsExpectation,
    /// Factor-2 LP rounding for the robust objective (rs family).
    RsLp2Robust,
    /// Factor-min(2, 1/(1-alpha)) LP rounding for CVaR (rs family).
    RsLp2Cvar,
    /// Exact expectation DP (selection family).
    SelectionDp,
    /// Seeded randomized LP rounding under expectation (selection family).
    SelectionRr,
    /// Series-parallel expectation DP (shortest-path family, exact mode).
    SpDp,
    /// Path-shaped first-stage CVaR solver on DAGs (shortest-path family);
    /// --objective expectation runs it at alpha = 0.
    Connectivity,
    /// Seeded cut-set LP rounding, per-scenario budgets (spanning-tree
    /// family, robust objective).
    MstRrRobust,
    /// Seeded cut-set LP rounding, expected budget (spanning-tree family,
    /// expectation objective).
    MstRrExpectation,
}

impl AlgorithmId {
    fn id(self) -> &'static str {
        match self {
            AlgorithmId::Brute => "brute",
            AlgorithmId::RsExpectation => "rs-expectation",
            AlgorithmId::RsLp2Robust => "rs-lp2-robust",
            AlgorithmId::RsLp2Cvar => "rs-lp2-cvar",
            AlgorithmId::SelectionDp => "selection-dp",
            AlgorithmId::SelectionRr => "selection-rr",
            AlgorithmId::SpDp => "sp-dp",
            AlgorithmId::Connectivity => "connectivity",
            AlgorithmId::MstRrRobust => "mst-rr-robust",
            AlgorithmId::MstRrExpectation => "mst-rr-expectation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveKind {
    Expectation,
    Robust,
    Cvar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Rs,
    Selection,
    ShortestPath,
    SpanningTree,
    Assignment,
}

impl FamilyArg {
    fn family(self) -> Family {
        match self {
            FamilyArg::Rs => Family::Rs,
            FamilyArg::Selection => Family::Selection,
            FamilyArg::ShortestPath => Family::ShortestPath,
            FamilyArg::SpanningTree => Family::SpanningTree,
            FamilyArg::Assignment => Family::Assignment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChainTargetArg {
    ShortestPath,
    SpanningTree,
}

impl ChainTargetArg {
    fn target(self) -> ChainTarget {
        match self {
            ChainTargetArg::ShortestPath => ChainTarget::ShortestPath,
            ChainTargetArg::SpanningTree => ChainTarget::SpanningTree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Table,
}

/// A failed command. Usage failures exit 1; algorithm failures exit 2.
enum Failure {
    Usage(String),
    Algorithm(String),
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure::Usage(message.into())
    }

    fn algorithm(message: impl Into<String>) -> Self {
        Failure::Algorithm(message.into())
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Algorithm(m) => m,
        }
    }

    fn exit(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Algorithm(_) => 2,
        }
    }
}

/// Maps a library error to an exit class. Errors that mean "the request or
/// its input is malformed or incompatible" are usage errors; errors that mean
/// "the algorithm ran but produced no solution" are algorithm failures.
fn classify(err: ModelError) -> Failure {
    let algorithmic = matches!(
        err,
        ModelError::EnumerationGuard { .. }
            | ModelError::NoFeasibleSolution
            | ModelError::CutGenerationExceeded { .. }
            | ModelError::ReportValueMismatch { .. }
            | ModelError::ReportBoundExceedsValue { .. }
            | ModelError::Lp(_)
    );
    if algorithmic {
        Failure::Algorithm(err.to_string())
    } else {
        Failure::Usage(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gen(args) => cmd_gen(args.kind),
        Command::Transform(args) => cmd_transform(args.kind),
        Command::Reduce(args) => cmd_reduce(args.kind),
        Command::Bench(args) => cmd_bench(args),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<TwoStageInstance, Failure> {
    parse_instance(&read_text(path)?).map_err(|e| Failure::usage(e.to_string()))
}

fn write_text(target: Option<&Path>, text: &str) -> Result<(), Failure> {
    match target {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_instance(target: Option<&Path>, inst: &TwoStageInstance) -> Result<(), Failure> {
    let text = serialize_instance(inst).map_err(|e| Failure::usage(e.to_string()))?;
    write_text(target, &text)
}

fn resolve_objective(kind: ObjectiveKind, alpha: Option<f64>) -> Result<Objective, Failure> {
    match (kind, alpha) {
        (ObjectiveKind::Expectation, None) => Ok(Objective::Expectation),
        (ObjectiveKind::Robust, None) => Ok(Objective::Robust),
        (ObjectiveKind::Cvar, Some(alpha)) => {
            if alpha.is_finite() && (0.0..1.0).contains(&alpha) {
                Ok(Objective::Cvar(alpha))
            } else {
                Err(Failure::usage(format!("alpha {alpha} outside [0, 1)")))
            }
        }
        (ObjectiveKind::Cvar, None) => Err(Failure::usage("--objective cvar requires --alpha")),
        (_, Some(_)) => Err(Failure::usage("--alpha only applies to --objective cvar")),
    }
}

fn required_family(alg: AlgorithmId) -> Option<Family> {
    match alg {
        AlgorithmId::Brute => None,
        AlgorithmId::RsExpectation | AlgorithmId::RsLp2Robust | AlgorithmId::RsLp2Cvar => {
            Some(Family::Rs)
        }
        AlgorithmId::SelectionDp | AlgorithmId::SelectionRr => Some(Family::Selection),
        AlgorithmId::SpDp | AlgorithmId::Connectivity => Some(Family::ShortestPath),
        AlgorithmId::MstRrRobust | AlgorithmId::MstRrExpectation => Some(Family::SpanningTree),
    }
}

fn needs_seed(alg: AlgorithmId) -> bool {
    matches!(
        alg,
        AlgorithmId::SelectionRr | AlgorithmId::MstRrRobust | AlgorithmId::MstRrExpectation
    )
}

fn objective_ok(alg: AlgorithmId, objective: Objective) -> bool {
    match alg {
        AlgorithmId::Brute => true,
        AlgorithmId::RsExpectation
        | AlgorithmId::SelectionDp
        | AlgorithmId::SelectionRr
        | AlgorithmId::SpDp
        | AlgorithmId::MstRrExpectation => matches!(objective, Objective::Expectation),
        AlgorithmId::RsLp2Robust | AlgorithmId::MstRrRobust => {
            matches!(objective, Objective::Robust)
        }
        AlgorithmId::RsLp2Cvar => matches!(objective, Objective::Cvar(_)),
        AlgorithmId::Connectivity => {
            matches!(objective, Objective::Expectation | Objective::Cvar(_))
        }
    }
}

fn supported_objectives(alg: AlgorithmId) -> &'static str {
    match alg {
        AlgorithmId::Brute => "expectation, robust, or cvar",
        AlgorithmId::RsExpectation
        | AlgorithmId::SelectionDp
        | AlgorithmId::SelectionRr
        | AlgorithmId::SpDp
        | AlgorithmId::MstRrExpectation => "expectation",
        AlgorithmId::RsLp2Robust | AlgorithmId::MstRrRobust => "robust",
        AlgorithmId::RsLp2Cvar => "cvar",
        AlgorithmId::Connectivity => "expectation or cvar",
    }
}

fn check_objective(alg: AlgorithmId, objective: Objective) -> Result<(), Failure> {
    if objective_ok(alg, objective) {
        Ok(())
    } else {
        Err(Failure::usage(format!(
            "algorithm {} supports objective {}; got {}",
            alg.id(),
            supported_objectives(alg),
            objective.describe()
        )))
    }
}

fn check_family(alg: AlgorithmId, family: Family) -> Result<(), Failure> {
    if let Some(required) = required_family(alg) {
        if family != required {
            return Err(Failure::usage(format!(
                "algorithm {} expects a {} instance, got {}",
                alg.id(),
                required.name(),
                family.name()
            )));
        }
    }
    Ok(())
}

fn check_seed(alg: AlgorithmId, seed: Option<u64>) -> Result<(), Failure> {
    if needs_seed(alg) && seed.is_none() {
        return Err(Failure::usage(format!(
            "algorithm {} is randomized and needs --seed",
            alg.id()
        )));
    }
    if !needs_seed(alg) && seed.is_some() {
        return Err(Failure::usage(format!(
            "--seed only applies to the randomized algorithms \
             (selection-rr, mst-rr-robust, mst-rr-expectation); {} is deterministic",
            alg.id()
        )));
    }
    Ok(())
}

/// Dispatches to the library. Objective, family, and seed compatibility must
/// already be checked; randomized algorithms receive `seed`.
fn run_algorithm(
    alg: AlgorithmId,
    inst: &TwoStageInstance,
    objective: Objective,
    seed: Option<u64>,
) -> Result<SolveReport, Failure> {
    let result = match alg {
        AlgorithmId::Brute => brute_force_optimum(inst, objective),
        AlgorithmId::RsExpectation => rs_solve_expectation(inst),
        AlgorithmId::RsLp2Robust => rs_lp_round_robust(inst),
        AlgorithmId::RsLp2Cvar => match objective {
            Objective::Cvar(alpha) => rs_lp_round_cvar(inst, alpha),
            _ => unreachable!("objective compatibility is checked before dispatch"),
        },
        AlgorithmId::SelectionDp => selection_dp_expectation(inst),
        AlgorithmId::SpDp => sp_dp_expectation(inst),
        AlgorithmId::Connectivity => {
            let alpha = match objective {
                Objective::Cvar(alpha) => alpha,
                Objective::Expectation => 0.0,
                Objective::Robust => {
                    unreachable!("objective compatibility is checked before dispatch")
                }
            };
            connectivity_solve(inst, alpha)
        }
        AlgorithmId::SelectionRr => {
            let seed = seed.expect("seed presence is checked before dispatch");
            return match selection_randomized_rounding(inst, seed) {
                Ok(rounding) => rounding.report.ok_or_else(|| {
                    Failure::algorithm(format!(
                        "randomized rounding failed (seed {seed}): some scenario is \
                         still below cardinality after repair"
                    ))
                }),
                Err(err) => Err(classify(err)),
            };
        }
        AlgorithmId::MstRrRobust | AlgorithmId::MstRrExpectation => {
            let seed = seed.expect("seed presence is checked before dispatch");
            let variant = if alg == AlgorithmId::MstRrRobust {
                MstVariant::Robust
            } else {
                MstVariant::Expectation
            };
            return match mst_randomized_rounding(inst, seed, variant) {
                Ok(rounding) => rounding.report.ok_or_else(|| {
                    Failure::algorithm(format!(
                        "randomized rounding failed (seed {seed}): some scenario is \
                         still disconnected after repair"
                    ))
                }),
                Err(err) => Err(classify(err)),
            };
        }
    };
    result.map_err(classify)
}

// ---------------------------------------------------------------------------
// solve / eval
// ---------------------------------------------------------------------------

fn cmd_solve(args: SolveArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.input)?;
    let objective = resolve_objective(args.objective, args.alpha)?;
    check_family(args.algorithm, inst.family)?;
    check_objective(args.algorithm, objective)?;
    check_seed(args.algorithm, args.seed)?;
    let report = run_algorithm(args.algorithm, &inst, objective, args.seed)?;
    write_text(args.output.as_deref(), &report.to_json())
}

fn parse_vector(text: &str, expected: usize) -> Result<Vec<u8>, Failure> {
    let mut x = Vec::new();
    for part in text.split(',') {
        match part.trim() {
            "0" => x.push(0u8),
            "1" => x.push(1u8),
            other => {
                return Err(Failure::usage(format!(
                    "--x entries must be 0 or 1, got {other:?}"
                )))
            }
        }
    }
    if x.len() != expected {
        return Err(Failure::usage(format!(
            "--x has {} entries, the instance has {expected} elements",
            x.len()
        )));
    }
    Ok(x)
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.input)?;
    let objective = resolve_objective(args.objective, args.alpha)?;
    let x = parse_vector(&args.x, inst.element_count())?;
    let report = SolveReport::from_first_stage(&inst, objective, x, None, "eval", None)
        .map_err(classify)?;
    write_text(args.output.as_deref(), &report.to_json())
}

// ---------------------------------------------------------------------------
// gen / transform / reduce
// ---------------------------------------------------------------------------

fn read_setcover(universe: usize, path: &Path) -> Result<SetCoverInput, Failure> {
    let text = read_text(path)?;
    let sets: Vec<Vec<usize>> = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid set list in {}: {e}", path.display())))?;
    SetCoverInput::new(universe, sets).map_err(|e| Failure::usage(e.to_string()))
}

fn cmd_gen(kind: GenKind) -> Result<(), Failure> {
    match kind {
        GenKind::Random {
            family,
            n,
            k,
            seed,
            cost_lo,
            cost_hi,
            output,
        } => {
            let inst = gen_random(family.family(), n, k, seed, (cost_lo, cost_hi))
                .map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &inst)
        }
        GenKind::RsSetcover {
            universe,
            sets,
            output,
        } => {
            let sc = read_setcover(universe, &sets)?;
            let inst = gen_rs_setcover(&sc).map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &inst)
        }
        GenKind::SpSetcover {
            universe,
            sets,
            output,
        } => {
            let sc = read_setcover(universe, &sets)?;
            let inst = gen_sp_setcover(&sc).map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &inst)
        }
        GenKind::SpHamiltonian { graph, output } => {
            let text = read_text(&graph)?;
            let g: Digraph = serde_json::from_str(&text).map_err(|e| {
                Failure::usage(format!("invalid digraph in {}: {e}", graph.display()))
            })?;
            let inst = gen_sp_hamiltonian(&g).map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &inst)
        }
        GenKind::SpSat {
            variables,
            clauses,
            output,
        } => {
            let text = read_text(&clauses)?;
            let clause_list: Vec<Vec<i32>> = serde_json::from_str(&text).map_err(|e| {
                Failure::usage(format!("invalid clause list in {}: {e}", clauses.display()))
            })?;
            let cnf = CnfInput::new(variables, clause_list)
                .map_err(|e| Failure::usage(e.to_string()))?;
            let inst = gen_sp_sat(&cnf).map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &inst)
        }
    }
}

fn cmd_transform(kind: TransformKind) -> Result<(), Failure> {
    match kind {
        TransformKind::EToCvar {
            input,
            alpha,
            output,
        } => {
            let inst = read_instance(&input)?;
            let image = augment_with_zero_scenario(&inst, alpha)
                .map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &image)
        }
        TransformKind::Chain {
            input,
            target,
            output,
        } => {
            let inst = read_instance(&input)?;
            let image =
                gen_chain(&inst, target.target()).map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &image)
        }
    }
}

fn cmd_reduce(kind: ReduceKind) -> Result<(), Failure> {
    match kind {
        ReduceKind::SpToAssignment { input, output } => {
            let inst = read_instance(&input)?;
            let image = sp_to_assignment(&inst).map_err(|e| Failure::usage(e.to_string()))?;
            write_instance(output.as_deref(), &image)
        }
    }
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

const BENCH_COST_RANGE: (u64, u64) = (0, 20);
const BENCH_TOL: f64 = 1e-9;

enum BenchRow {
    Ok {
        trial: u64,
        value: f64,
        opt: f64,
        ratio: Option<f64>,
        bound: Option<f64>,
        bound_satisfied: bool,
    },
    Failed {
        trial: u64,
        error: String,
    },
}

/// True for the exact expectation minimizers whose solutions the sigma-ratio
/// chain covers when they are evaluated under CVaR.
fn exact_expectation(alg: AlgorithmId) -> bool {
    matches!(
        alg,
        AlgorithmId::RsExpectation | AlgorithmId::SelectionDp | AlgorithmId::SpDp
    )
}

/// Runs the benchmarked algorithm on one instance and returns its achieved
/// value together with the guaranteed multiple of the optimum (None when the
/// algorithm carries no finite a-priori factor).
fn bench_value(
    alg: AlgorithmId,
    inst: &TwoStageInstance,
    objective: Objective,
    seed: u64,
) -> Result<(f64, Option<f64>), Failure> {
    if let Objective::Cvar(alpha) = objective {
        if exact_expectation(alg) {
            // Sigma chain: solve under expectation, price the solution under
            // CVaR, and compare against sigma times the CVaR optimum.
            let report = run_algorithm(alg, inst, Objective::Expectation, None)?;
            let value = riskstage::model::evaluate_first_stage(inst, &report.x, objective)
                .map_err(classify)?;
            let pr_min = inst
                .probabilities()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let sigma =
                cvar_ratio_sigma(alpha, pr_min).map_err(|e| Failure::algorithm(e.to_string()))?;
            return Ok((value, Some(sigma)));
        }
    }
    let report = run_algorithm(alg, inst, objective, Some(seed).filter(|_| needs_seed(alg)))?;
    let factor = match alg {
        AlgorithmId::Brute
        | AlgorithmId::RsExpectation
        | AlgorithmId::SelectionDp
        | AlgorithmId::SpDp => Some(1.0),
        AlgorithmId::RsLp2Robust => Some(2.0),
        AlgorithmId::RsLp2Cvar => match objective {
            Objective::Cvar(alpha) => Some((1.0 / (1.0 - alpha)).min(2.0)),
            _ => unreachable!("objective compatibility is checked before dispatch"),
        },
        AlgorithmId::SelectionRr
        | AlgorithmId::Connectivity
        | AlgorithmId::MstRrRobust
        | AlgorithmId::MstRrExpectation => None,
    };
    Ok((report.value, factor))
}

fn bench_trial(args: &BenchArgs, objective: Objective, trial: u64) -> BenchRow {
    let seed = args.seed.wrapping_add(trial);
    let inst = match gen_random(args.family.family(), args.n, args.k, seed, BENCH_COST_RANGE) {
        Ok(inst) => inst,
        Err(err) => {
            return BenchRow::Failed {
                trial,
                error: err.to_string(),
            }
        }
    };
    let (value, factor) = match bench_value(args.algorithm, &inst, objective, seed) {
        Ok(pair) => pair,
        Err(failure) => {
            return BenchRow::Failed {
                trial,
                error: failure.message().to_string(),
            }
        }
    };
    let opt = match brute_force_optimum(&inst, objective) {
        Ok(report) => report.value,
        Err(err) => {
            return BenchRow::Failed {
                trial,
                error: format!("brute force: {err}"),
            }
        }
    };
    let ratio = if opt.abs() > BENCH_TOL {
        Some(value / opt)
    } else if value.abs() <= BENCH_TOL {
        Some(1.0)
    } else {
        None
    };
    let bound = factor.map(|f| f * opt);
    let bound_satisfied = bound.map_or(true, |b| value <= b + BENCH_TOL);
    BenchRow::Ok {
        trial,
        value,
        opt,
        ratio,
        bound,
        bound_satisfied,
    }
}

fn bench_json(args: &BenchArgs, objective: Objective, rows: &[BenchRow]) -> String {
    let row_values: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| match row {
            BenchRow::Ok {
                trial,
                value,
                opt,
                ratio,
                bound,
                bound_satisfied,
            } => serde_json::json!({
                "trial": trial,
                "value": value,
                "opt": opt,
                "ratio": ratio,
                "bound": bound,
                "bound_satisfied": bound_satisfied,
            }),
            BenchRow::Failed { trial, error } => serde_json::json!({
                "trial": trial,
                "error": error,
            }),
        })
        .collect();
    let document = serde_json::json!({
        "algorithm": args.algorithm.id(),
        "family": args.family.family().name(),
        "objective": objective.describe(),
        "trials": args.trials,
        "rows": row_values,
        "summary": summary_json(rows),
    });
    let mut text = serde_json::to_string_pretty(&document).expect("bench serialization");
    text.push('\n');
    text
}

fn summarize(rows: &[BenchRow]) -> (Option<f64>, usize, usize) {
    let mut max_ratio: Option<f64> = None;
    let mut violations = 0usize;
    let mut errors = 0usize;
    for row in rows {
        match row {
            BenchRow::Ok {
                ratio,
                bound_satisfied,
                ..
            } => {
                if let Some(r) = ratio {
                    max_ratio = Some(max_ratio.map_or(*r, |m| m.max(*r)));
                }
                if !bound_satisfied {
                    violations += 1;
                }
            }
            BenchRow::Failed { .. } => errors += 1,
        }
    }
    (max_ratio, violations, errors)
}

fn summary_json(rows: &[BenchRow]) -> serde_json::Value {
    let (max_ratio, violations, errors) = summarize(rows);
    serde_json::json!({
        "max_ratio": max_ratio,
        "violations": violations,
        "errors": errors,
    })
}

fn bench_table(args: &BenchArgs, objective: Objective, rows: &[BenchRow]) -> String {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# bench algorithm={} family={} objective={} trials={} seed={}",
        args.algorithm.id(),
        args.family.family().name(),
        objective.describe(),
        args.trials,
        args.seed
    );
    let _ = writeln!(
        text,
        "{:>5}  {:>14}  {:>14}  {:>10}  {:>14}  {}",
        "trial", "value", "opt", "ratio", "bound", "ok"
    );
    for row in rows {
        match row {
            BenchRow::Ok {
                trial,
                value,
                opt,
                ratio,
                bound,
                bound_satisfied,
            } => {
                let ratio_text = ratio.map_or("-".to_string(), |r| format!("{r:.6}"));
                let bound_text = bound.map_or("-".to_string(), |b| format!("{b:.6}"));
                let _ = writeln!(
                    text,
                    "{trial:>5}  {value:>14.6}  {opt:>14.6}  {ratio_text:>10}  {bound_text:>14}  {}",
                    if *bound_satisfied { "yes" } else { "NO" }
                );
            }
            BenchRow::Failed { trial, error } => {
                let _ = writeln!(text, "{trial:>5}  error: {error}");
            }
        }
    }
    let (max_ratio, violations, errors) = summarize(rows);
    let max_text = max_ratio.map_or("-".to_string(), |r| format!("{r:.6}"));
    let _ = writeln!(
        text,
        "summary: max_ratio {max_text}  violations {violations}  errors {errors}"
    );
    text
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let objective = resolve_objective(args.objective, args.alpha)?;
    check_family(args.algorithm, args.family.family())?;
    // The sigma chain is the one objective pairing beyond solve's rules:
    // an exact expectation algorithm evaluated under CVaR.
    if !(matches!(objective, Objective::Cvar(_)) && exact_expectation(args.algorithm)) {
        check_objective(args.algorithm, objective)?;
    }
    let rows: Vec<BenchRow> = (0..args.trials)
        .map(|trial| bench_trial(&args, objective, trial))
        .collect();
    let text = match args.format {
        FormatArg::Json => bench_json(&args, objective, &rows),
        FormatArg::Table => bench_table(&args, objective, &rows),
    };
    write_text(args.output.as_deref(), &text)
}
