//! The per-state expert update: optimistic follow-the-regularized-leader
//! over the action simplex.
//!
//! The update maximizes `score · wᵀ + R(w)/ε` over the simplex, where the
//! score is the window's accumulated Q rows with the most recent row counted
//! twice (the recency prediction is hard-coded; it is the analyzed variant).
//! The shipped regularizer is the entropy seam: `−R` is 1-strongly convex
//! w.r.t. ‖·‖₁, the maximizer has the closed softmax form, and
//! `Δ_R = ln |A1|`.

use serde::{Deserialize, Serialize};

use crate::simplex::{softmax, uniform};
use crate::{Error, Result};

/// Regularizer choices for the expert update. Only the entropic one ships;
/// the enum is the seam for alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    NegativeEntropy,
}

impl Regularizer {
    /// `Δ_R = sup R − inf R` over the `n`-point simplex.
    pub fn delta_r(&self, n_actions: usize) -> f64 {
        match self {
            Regularizer::NegativeEntropy => (n_actions as f64).ln(),
        }
    }

    /// Objective value `score · wᵀ + R(w)/ε` being maximized.
    pub fn objective(&self, score: &[f64], epsilon: f64, w: &[f64]) -> f64 {
        let dot: f64 = score.iter().zip(w).map(|(a, b)| a * b).sum();
        match self {
            Regularizer::NegativeEntropy => dot + crate::simplex::entropy(w) / epsilon,
        }
    }
}

/// One expert update: accumulated score row and learning rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OftrlInput {
    pub score: Vec<f64>,
    pub epsilon: f64,
}

/// `argmax_{w ∈ simplex} score · wᵀ + R(w)/ε`.
///
/// For the entropic regularizer this is `w(a) ∝ exp(ε · score(a))`,
/// computed with max subtraction.
pub fn oftrl_argmax(input: &OftrlInput, reg: &Regularizer) -> Result<Vec<f64>> {
    if input.epsilon <= 0.0 || input.epsilon.is_nan() {
        return Err(Error::InvalidInput(format!(
            "learning rate must be positive, got {}",
            input.epsilon
        )));
    }
    if input.score.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("OFTRL score"));
    }
    match reg {
        Regularizer::NegativeEntropy => {
            let scaled: Vec<f64> = input.score.iter().map(|v| v * input.epsilon).collect();
            Ok(softmax(&scaled))
        }
    }
}

/// The episode-1 update with no history: the regularizer's interior
/// maximizer, i.e. the uniform distribution.
pub fn cold_start(reg: &Regularizer, n_a1: usize) -> Vec<f64> {
    match reg {
        Regularizer::NegativeEntropy => uniform(n_a1),
    }
}
