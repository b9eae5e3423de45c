//! Agent 1's episode-level algorithms, driving one OFTRL expert per state.
//!
//! Two variants ship:
//!
//! * restart experts: the horizon is cut into segments of length Γ and the
//!   experts restart cold at each segment boundary;
//! * double-recency-bias experts: at every episode the experts are run for
//!   each window size τ = 1..Γ over the last τ Q-tables and the Γ outputs
//!   are averaged, which keeps consecutive policies close.
//!
//! Both are deterministic functions of the observed Q history, so replaying
//! a logged run reproduces the policy sequence bit-identically.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bias_q::QTable;
use crate::mdp::{AgentRole, Policy};
use crate::oftrl::{cold_start, oftrl_argmax, OftrlInput, Regularizer};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "exp_restart")]
    ExpRestart,
    #[serde(rename = "exp_drbias")]
    ExpDrBias,
}

/// Window length, learning rate and algorithm choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// Window / segment length Γ ≥ 1.
    pub gamma: usize,
    /// Learning rate; `None` uses the analyzed default `Γ^{-1/4}`.
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub regularizer: Regularizer,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, gamma: usize, epsilon: Option<f64>) -> Result<Self> {
        let cfg = LearnerConfig { algorithm, gamma, epsilon, regularizer: Regularizer::default() };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.gamma < 1 {
            return Err(Error::InvalidInput("gamma must be >= 1".into()));
        }
        if let Some(e) = self.epsilon {
            if e <= 0.0 || e.is_nan() {
                return Err(Error::InvalidInput(format!("epsilon must be positive, got {e}")));
            }
        }
        Ok(())
    }

    /// Effective learning rate.
    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| (self.gamma as f64).powf(-0.25))
    }
}

/// Per-state weight matrices for window sizes 1..Γ, as produced by one
/// double-recency-bias step. `weights[tau-1][s]` is a distribution over A1.
pub type WindowWeights = Vec<Vec<Vec<f64>>>;

/// One committed policy, plus the window weights when the algorithm has
/// them.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub policy: Policy,
    pub weights: Option<WindowWeights>,
}

/// The learner's mutable state: the Γ-deep window of past Q-tables and the
/// episode counter.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub cfg: LearnerConfig,
    n_states: usize,
    n_a1: usize,
    /// Most recent Γ observed tables, oldest first.
    window: VecDeque<QTable>,
    /// Episodes observed so far; the next step computes the policy for
    /// episode `observed + 1`.
    observed: usize,
}

impl LearnerState {
    pub fn new(cfg: LearnerConfig, n_states: usize, n_a1: usize) -> Result<Self> {
        cfg.check()?;
        Ok(LearnerState { cfg, n_states, n_a1, window: VecDeque::new(), observed: 0 })
    }

    /// Episode index the next `step` commits for (1-based).
    pub fn episode(&self) -> usize {
        self.observed + 1
    }

    /// The stored table for absolute episode `k`, if still in the window.
    fn q_of(&self, k: usize) -> Option<&QTable> {
        if k == 0 || k > self.observed {
            return None;
        }
        let back = self.observed - k; // 0 = most recent
        if back >= self.window.len() {
            return None;
        }
        Some(&self.window[self.window.len() - 1 - back])
    }

    /// Record episode `t`'s Q-table; drops the oldest entry beyond Γ.
    pub fn observe(&mut self, q: QTable) {
        self.window.push_back(q);
        while self.window.len() > self.cfg.gamma {
            self.window.pop_front();
        }
        self.observed += 1;
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Commit the policy for the current episode.
    pub fn step(&self) -> Result<StepOutput> {
        match self.cfg.algorithm {
            Algorithm::ExpRestart => Ok(StepOutput {
                policy: exp_restart_step(self)?,
                weights: None,
            }),
            Algorithm::ExpDrBias => {
                let (policy, weights) = exp_drbias_step(self)?;
                Ok(StepOutput { policy, weights: Some(weights) })
            }
        }
    }

    fn uniform_policy(&self) -> Policy {
        let row = cold_start(&self.cfg.regularizer, self.n_a1);
        Policy { role: AgentRole::Agent1, probs: vec![row; self.n_states] }
    }
}

/// First episode of the segment containing `t`, for segments
/// {1..Γ}, {Γ+1..2Γ}, …
pub fn segment_start(t: usize, gamma: usize) -> usize {
    ((t - 1) / gamma) * gamma + 1
}

/// Inclusive window `max(1, t−τ) ..= t−1` of Q indices consumed by the
/// double-recency-bias update for window size τ at episode t ≥ 2.
pub fn drbias_window(t: usize, tau: usize) -> (usize, usize) {
    (t.saturating_sub(tau).max(1), t - 1)
}

/// Restart experts: cold start at segment boundaries, otherwise OFTRL over
/// the scores accumulated since the segment start.
pub fn exp_restart_step(state: &LearnerState) -> Result<Policy> {
    let t = state.episode();
    let gamma = state.cfg.gamma;
    let start = segment_start(t, gamma);
    if t == start {
        return Ok(state.uniform_policy());
    }
    let eps = state.cfg.epsilon();
    let last = state
        .q_of(t - 1)
        .ok_or_else(|| Error::InvalidInput(format!("missing Q history for episode {}", t - 1)))?;
    let mut probs = Vec::with_capacity(state.n_states);
    for s in 0..state.n_states {
        let mut score = last.row(s).to_vec();
        for k in start..t {
            let q = state.q_of(k).ok_or_else(|| {
                Error::InvalidInput(format!("missing Q history for episode {k}"))
            })?;
            for (acc, v) in score.iter_mut().zip(q.row(s)) {
                *acc += v;
            }
        }
        probs.push(oftrl_argmax(&OftrlInput { score, epsilon: eps }, &state.cfg.regularizer)?);
    }
    Ok(Policy { role: AgentRole::Agent1, probs })
}

/// Double-recency-bias experts: average of the OFTRL outputs over window
/// sizes τ = 1..Γ, each window clipped at episode 1.
pub fn exp_drbias_step(state: &LearnerState) -> Result<(Policy, WindowWeights)> {
    let t = state.episode();
    let gamma = state.cfg.gamma;
    if t == 1 {
        let uniform = state.uniform_policy();
        let weights = vec![uniform.probs.clone(); gamma];
        return Ok((uniform, weights));
    }
    let eps = state.cfg.epsilon();
    let reg = &state.cfg.regularizer;
    let last = state
        .q_of(t - 1)
        .ok_or_else(|| Error::InvalidInput(format!("missing Q history for episode {}", t - 1)))?;
    let mut weights: WindowWeights = vec![vec![Vec::new(); state.n_states]; gamma];
    let mut probs = vec![vec![0.0; state.n_a1]; state.n_states];
    for s in 0..state.n_states {
        let mut cum = vec![0.0; state.n_a1];
        for tau in 1..=gamma {
            let k = t as i64 - tau as i64;
            if k >= 1 {
                let q = state.q_of(k as usize).ok_or_else(|| {
                    Error::InvalidInput(format!("missing Q history for episode {k}"))
                })?;
                for (acc, v) in cum.iter_mut().zip(q.row(s)) {
                    *acc += v;
                }
            }
            let score: Vec<f64> = cum.iter().zip(last.row(s)).map(|(c, o)| c + o).collect();
            let w = oftrl_argmax(&OftrlInput { score, epsilon: eps }, reg)?;
            for (acc, v) in probs[s].iter_mut().zip(&w) {
                *acc += v / gamma as f64;
            }
            weights[tau - 1][s] = w;
        }
    }
    Ok((Policy { role: AgentRole::Agent1, probs }, weights))
}
