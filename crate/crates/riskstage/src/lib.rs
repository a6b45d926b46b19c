//! Two-stage combinatorial optimization under risk.
//!
//! A two-stage instance consists of first-stage costs `C`, a finite set of
//! second-stage cost scenarios `c_1..c_K` with probabilities `p_1..p_K`, and a
//! combinatorial feasible set `X` (p-element selections, representatives of a
//! partition, simple s–t paths, spanning trees, or perfect matchings). A solver
//! picks a partial solution `x` now, observes the scenario, and completes `x`
//! at second-stage prices; the goal is to minimize
//!
//! ```text
//! C·x + F[ second-stage completion cost ]
//! ```
//!
//! where `F` is the expectation, the worst case, or `CVaR_α`.
//!
//! Modules:
//!
//! * [`risk`] — risk functionals on finite discrete distributions and the
//!   zero-scenario transform relating expectation to CVaR.
//! * [`model`] — instance/plan data model, feasible-set semantics, objective
//!   evaluation, JSON I/O.
//! * [`lp`] — a self-contained bounded-variable simplex and the monotone budget
//!   bisection used by every LP relaxation in the crate.
//! * [`exact`] — brute-force oracles: feasible-set enumeration, exact recourse,
//!   and globally optimal two-stage solves at desk scale.
//! * [`selection`] — exact and approximate algorithms for the representatives
//!   and cardinality-selection families, including LP rounding and seeded
//!   randomized rounding.
//! * [`networks`] — series-parallel DP, DAG connectivity, the spanning-tree
//!   cut-set LP with min-cut separation and randomized rounding, and the
//!   path-to-assignment reduction.
//! * [`gadgets`] — instance generators: set-cover, Hamiltonian-path, and SAT
//!   gadgets whose optima encode the underlying witness problem, plus seeded
//!   random instances.
//!
//! Everything is deterministic: randomized algorithms take an explicit seed and
//! consume a documented SplitMix64 stream, ties are broken by fixed rules, and
//! repeated runs produce byte-identical reports.

pub mod exact;
pub mod gadgets;
pub mod lp;
pub mod model;
pub mod networks;
pub mod risk;
pub mod selection;
pub mod util;
