//! Risk functionals on finite discrete cost distributions.
//!
//! Fixing a first-stage decision of a two-stage instance induces a finite
//! nonnegative random cost: the optimal completion cost under scenario `j`,
//! taken with probability `p_j`. This module evaluates the three objectives
//! supported repo-wide on such distributions — expectation, worst case, and
//! `CVaR_α` — and provides two bridges between them:
//!
//! * [`cvar_ratio_sigma`], the factor `σ = min{1/Pr_min, 1/(1−α)}` by which
//!   `CVaR_α` can exceed the expectation (and therefore by which an
//!   expectation-optimal decision can be suboptimal under `CVaR_α`);
//! * [`augment_with_zero_scenario`], which prepends an all-zero cost scenario
//!   of probability `α` so that the expectation objective on the original
//!   instance equals the `CVaR_α` objective on the augmented one, for every
//!   first-stage decision.
//!
//! `CVaR_α[Y] = inf_γ { γ + E[(Y−γ)⁺]/(1−α) }`. For a finite distribution the
//! infimand is piecewise linear and convex in `γ` with breakpoints at the atom
//! values, so the minimum is attained at an atom; evaluation is exact, not a
//! numerical search.

use thiserror::Error;

use crate::model::TwoStageInstance;

/// Tolerance for the probability-sum invariant.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("distribution needs at least one atom")]
    Empty,
    #[error("atom {index} has invalid value {value} (must be finite and >= 0)")]
    BadValue { index: usize, value: f64 },
    #[error("atom {index} has probability {probability} outside (0, 1]")]
    BadProbability { index: usize, probability: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error("alpha {alpha} outside [0, 1)")]
    AlphaOutOfRange { alpha: f64 },
    #[error("pr_min {pr_min} outside (0, 1]")]
    PrMinOutOfRange { pr_min: f64 },
    #[error("zero-scenario augmentation needs alpha in (0, 1); with alpha = 0 use the expectation objective directly")]
    ZeroAlphaAugmentation,
}

/// A finite distribution of nonnegative costs.
///
/// Atoms are `(value, probability)` pairs in a fixed order; duplicate values
/// are allowed (they arise naturally as per-scenario recourse costs).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    /// Validates and wraps the atom list: values finite and nonnegative,
    /// probabilities in `(0, 1]` summing to 1 within 1e-9.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, RiskError> {
        if atoms.is_empty() {
            return Err(RiskError::Empty);
        }
        for (index, &(value, probability)) in atoms.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(RiskError::BadValue { index, value });
            }
            if !probability.is_finite() || probability <= 0.0 || probability > 1.0 {
                return Err(RiskError::BadProbability { index, probability });
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.1).sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(RiskError::ProbabilitySum { sum });
        }
        Ok(DiscreteDistribution { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Smallest atom probability (`Pr_min`).
    pub fn min_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).fold(f64::INFINITY, f64::min)
    }

    /// `E[Y] = Σ_k p_k b_k`, summed in atom order.
    pub fn expectation(&self) -> f64 {
        self.atoms.iter().map(|&(value, p)| p * value).sum()
    }

    /// Largest atom value; probabilities are ignored.
    pub fn worst_case(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `CVaR_α[Y] = min_γ { γ + E[(Y−γ)⁺]/(1−α) }`, evaluated exactly over the
    /// atom values. `alpha = 0` returns [`Self::expectation`] verbatim (same
    /// summation order), so the identity `CVaR_0 = E` holds to the bit.
    pub fn cvar(&self, alpha: f64) -> Result<f64, RiskError> {
        if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
            return Err(RiskError::AlphaOutOfRange { alpha });
        }
        if alpha == 0.0 {
            return Ok(self.expectation());
        }
        let scale = 1.0 / (1.0 - alpha);
        let mut best = f64::INFINITY;
        for &(gamma, _) in &self.atoms {
            let tail: f64 = self
                .atoms
                .iter()
                .map(|&(value, p)| p * (value - gamma).max(0.0))
                .sum();
            best = best.min(gamma + scale * tail);
        }
        Ok(best)
    }
}

/// The ratio `σ = min{1/pr_min, 1/(1−alpha)}` bounding `CVaR_α / E`.
///
/// An expectation-optimal first stage is therefore within factor `σ` of the
/// `CVaR_α` optimum; the same factor transfers any `ρ`-approximation for the
/// expectation objective to a `ρσ`-approximation for `CVaR_α`.
pub fn cvar_ratio_sigma(alpha: f64, pr_min: f64) -> Result<f64, RiskError> {
    if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
        return Err(RiskError::AlphaOutOfRange { alpha });
    }
    if !pr_min.is_finite() || pr_min <= 0.0 || pr_min > 1.0 {
        return Err(RiskError::PrMinOutOfRange { pr_min });
    }
    Ok((1.0 / pr_min).min(1.0 / (1.0 - alpha)))
}

/// Prepends an all-zero cost scenario of probability `alpha` and rescales the
/// original scenario probabilities by `1 − alpha`.
///
/// For every first-stage vector `x`, the expectation objective on `inst`
/// equals the `CVaR_α` objective on the returned instance: the zero scenario
/// absorbs exactly the `α` probability mass that `CVaR_α` discards, because
/// recourse costs are nonnegative and the zero scenario is never in the tail.
///
/// `alpha = 0` is rejected — scenarios must carry positive probability; the
/// caller wanting `α = 0` should evaluate the expectation objective directly.
pub fn augment_with_zero_scenario(
    inst: &TwoStageInstance,
    alpha: f64,
) -> Result<TwoStageInstance, RiskError> {
    if !alpha.is_finite() || alpha < 0.0 || alpha >= 1.0 {
        return Err(RiskError::AlphaOutOfRange { alpha });
    }
    if alpha == 0.0 {
        return Err(RiskError::ZeroAlphaAugmentation);
    }
    let mut out = inst.clone();
    let mut probabilities = Vec::with_capacity(inst.scenario_count() + 1);
    probabilities.push(alpha);
    probabilities.extend(inst.probabilities().iter().map(|p| p * (1.0 - alpha)));
    let mut costs = Vec::with_capacity(inst.scenario_count() + 1);
    costs.push(vec![0.0; inst.element_count()]);
    costs.extend(inst.scenario_costs().iter().cloned());
    out.scenarios.probabilities = probabilities;
    out.scenarios.costs = costs;
    out.alpha = Some(alpha);
    out.validate()
        .expect("augmenting a valid instance preserves validity");
    Ok(out)
}
