//! Two-agent MDP data model: the joint transition/reward tensors, per-agent
//! policies, and the single-chain objects a fixed policy pair induces.
//!
//! Everything is dense; the intended scale is |S| ≤ 12 and |A| ≤ 6, where
//! the exhaustive enumerations elsewhere in the crate are feasible anyway.
//! All types are immutable after construction and all operations are pure.

use serde::{Deserialize, Serialize};

use crate::norms::l1_norm;
use crate::{Error, Result, PROB_TOL_INPUT};

/// Which agent a policy belongs to. Determines the action-set axis it is
/// checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentRole {
    Agent1,
    Agent2,
}

/// A stationary policy: one distribution over the owning agent's actions
/// per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub role: AgentRole,
    /// Row-stochastic matrix indexed (state, action).
    pub probs: Vec<Vec<f64>>,
}

impl Policy {
    /// Builds a policy, rejecting rows that are not probability
    /// distributions within `1e-12`.
    pub fn new(role: AgentRole, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("policy with zero states".into()));
        }
        let width = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != width {
                return Err(Error::DimensionMismatch(format!(
                    "policy row {s} has {} actions, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < -PROB_TOL_INPUT) {
                return Err(Error::InvalidInput(format!("policy row {s} has negative mass")));
            }
            if (l1_norm(row) - 1.0).abs() > PROB_TOL_INPUT {
                return Err(Error::InvalidInput(format!(
                    "policy row {s} sums to {}, expected 1",
                    row.iter().sum::<f64>()
                )));
            }
        }
        Ok(Policy { role, probs })
    }

    /// Deterministic policy that plays `actions[s]` in state `s`.
    pub fn deterministic(role: AgentRole, actions: &[usize], n_actions: usize) -> Self {
        let probs = actions
            .iter()
            .map(|&a| {
                assert!(a < n_actions);
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Policy { role, probs }
    }

    /// Uniform policy on `n_actions` actions at each of `n_states` states.
    pub fn uniform(role: AgentRole, n_states: usize, n_actions: usize) -> Self {
        Policy {
            role,
            probs: vec![crate::simplex::uniform(n_actions); n_states],
        }
    }

    /// The same matrix tagged with a different role. Used when an agent
    /// reasons about the game with the action axes swapped.
    pub fn reroled(&self, role: AgentRole) -> Self {
        Policy { role, probs: self.probs.clone() }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }
}

/// The two-agent MDP: joint transition tensor, joint reward and initial
/// state distribution.
///
/// The serialized form is the on-disk JSON schema:
/// `{ "n_states", "n_a1", "n_a2", "trans": [S][A1][A2][S],
///    "reward": [S][A1][A2], "d1": [S] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mdp {
    pub n_states: usize,
    pub n_a1: usize,
    pub n_a2: usize,
    /// `trans[s][a1][a2][s']` = P(s' | s, a1, a2).
    pub trans: Vec<Vec<Vec<Vec<f64>>>>,
    /// `reward[s][a1][a2]` ∈ [0, 1], shared by both agents.
    pub reward: Vec<Vec<Vec<f64>>>,
    /// Initial state distribution, shared by all episodes.
    pub d1: Vec<f64>,
}

impl Mdp {
    /// Builds and validates in one step.
    pub fn new(
        trans: Vec<Vec<Vec<Vec<f64>>>>,
        reward: Vec<Vec<Vec<f64>>>,
        d1: Vec<f64>,
    ) -> Result<Self> {
        let n_states = trans.len();
        if n_states == 0 {
            return Err(Error::InvalidInput("MDP with zero states".into()));
        }
        let n_a1 = trans[0].len();
        let n_a2 = if n_a1 > 0 { trans[0][0].len() } else { 0 };
        let mdp = Mdp { n_states, n_a1, n_a2, trans, reward, d1 };
        let report = validate(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidInput(report.violations.join("; ")))
        }
    }

    /// Parses the JSON schema and rejects invalid instances.
    pub fn from_json(text: &str) -> Result<Self> {
        let mdp: Mdp = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("MDP JSON: {e}")))?;
        let report = validate(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidInput(report.violations.join("; ")))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MDP serializes")
    }
}

/// Outcome of structural validation; `violations` names every broken
/// invariant together with the offending indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural checks: tensor shapes, transition rows summing to 1 within
/// 1e-12, rewards inside [0, 1], `d1` a distribution.
pub fn validate(mdp: &Mdp) -> ValidationReport {
    let mut violations = Vec::new();
    let (ns, na1, na2) = (mdp.n_states, mdp.n_a1, mdp.n_a2);
    if ns == 0 || na1 == 0 || na2 == 0 {
        violations.push("empty state or action set".into());
        return ValidationReport { violations };
    }
    if mdp.trans.len() != ns {
        violations.push(format!("trans has {} states, header says {ns}", mdp.trans.len()));
    }
    if mdp.reward.len() != ns {
        violations.push(format!("reward has {} states, header says {ns}", mdp.reward.len()));
    }
    if mdp.d1.len() != ns {
        violations.push(format!("d1 has {} entries, header says {ns}", mdp.d1.len()));
    }
    for (s, per_a1) in mdp.trans.iter().enumerate() {
        if per_a1.len() != na1 {
            violations.push(format!("trans[{s}] has {} a1 slices", per_a1.len()));
            continue;
        }
        for (a1, per_a2) in per_a1.iter().enumerate() {
            if per_a2.len() != na2 {
                violations.push(format!("trans[{s}][{a1}] has {} a2 slices", per_a2.len()));
                continue;
            }
            for (a2, row) in per_a2.iter().enumerate() {
                if row.len() != ns {
                    violations.push(format!("trans[{s}][{a1}][{a2}] has {} entries", row.len()));
                    continue;
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    violations.push(format!("trans[{s}][{a1}][{a2}] has a negative entry"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL_INPUT {
                    violations.push(format!("trans[{s}][{a1}][{a2}] sums to {sum}"));
                }
            }
        }
    }
    for (s, per_a1) in mdp.reward.iter().enumerate() {
        for (a1, per_a2) in per_a1.iter().enumerate() {
            if per_a2.len() != na2 {
                violations.push(format!("reward[{s}][{a1}] has {} entries", per_a2.len()));
                continue;
            }
            for (a2, r) in per_a2.iter().enumerate() {
                if !r.is_finite() || *r < 0.0 || *r > 1.0 {
                    violations.push(format!("reward out of [0,1] at [{s}][{a1}][{a2}]: {r}"));
                }
            }
        }
    }
    if mdp.d1.iter().any(|p| !p.is_finite() || *p < 0.0) {
        violations.push("d1 has a negative entry".into());
    } else if (mdp.d1.iter().sum::<f64>() - 1.0).abs() > PROB_TOL_INPUT {
        violations.push(format!("d1 sums to {}", mdp.d1.iter().sum::<f64>()));
    }
    ValidationReport { violations }
}

/// State-to-state kernel induced by a policy pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedKernel {
    /// Row-stochastic matrix indexed (s, s').
    pub rows: Vec<Vec<f64>>,
}

impl InducedKernel {
    pub fn n_states(&self) -> usize {
        self.rows.len()
    }
}

/// Per-(state, a1) next-state distributions with agent 2 marginalized out.
#[derive(Debug, Clone)]
pub struct ActionKernel {
    /// `dist[s][a1]` is a probability vector over next states.
    pub dist: Vec<Vec<Vec<f64>>>,
}

/// Agent 1's expected reward per (state, a1) with agent 2 marginalized out.
#[derive(Debug, Clone)]
pub struct RewardMatrix1 {
    pub values: Vec<Vec<f64>>,
}

fn check_pair_dims(mdp: &Mdp, p1: &Policy, p2: &Policy) -> Result<()> {
    check_p2_dims(mdp, p2)?;
    if p1.n_states() != mdp.n_states || p1.n_actions() != mdp.n_a1 {
        return Err(Error::DimensionMismatch(format!(
            "agent-1 policy is {}x{}, MDP wants {}x{}",
            p1.n_states(),
            p1.n_actions(),
            mdp.n_states,
            mdp.n_a1
        )));
    }
    Ok(())
}

fn check_p2_dims(mdp: &Mdp, p2: &Policy) -> Result<()> {
    if p2.n_states() != mdp.n_states || p2.n_actions() != mdp.n_a2 {
        return Err(Error::DimensionMismatch(format!(
            "agent-2 policy is {}x{}, MDP wants {}x{}",
            p2.n_states(),
            p2.n_actions(),
            mdp.n_states,
            mdp.n_a2
        )));
    }
    Ok(())
}

/// `P(s,s') = Σ_{a1,a2} π1(s,a1) π2(s,a2) P(s,a1,a2,s')`.
pub fn induce_kernel(mdp: &Mdp, p1: &Policy, p2: &Policy) -> Result<InducedKernel> {
    check_pair_dims(mdp, p1, p2)?;
    let mut rows = vec![vec![0.0; mdp.n_states]; mdp.n_states];
    for s in 0..mdp.n_states {
        let row = &mut rows[s];
        for a1 in 0..mdp.n_a1 {
            let w1 = p1.probs[s][a1];
            if w1 == 0.0 {
                continue;
            }
            for a2 in 0..mdp.n_a2 {
                let w = w1 * p2.probs[s][a2];
                if w == 0.0 {
                    continue;
                }
                for (sp, t) in mdp.trans[s][a1][a2].iter().enumerate() {
                    row[sp] += w * t;
                }
            }
        }
    }
    Ok(InducedKernel { rows })
}

/// `P_{π2}(s,a1)` — next-state distribution per (s, a1).
pub fn induce_action_kernel(mdp: &Mdp, p2: &Policy) -> Result<ActionKernel> {
    check_p2_dims(mdp, p2)?;
    let mut dist = vec![vec![vec![0.0; mdp.n_states]; mdp.n_a1]; mdp.n_states];
    for s in 0..mdp.n_states {
        for a1 in 0..mdp.n_a1 {
            let out = &mut dist[s][a1];
            for a2 in 0..mdp.n_a2 {
                let w = p2.probs[s][a2];
                if w == 0.0 {
                    continue;
                }
                for (sp, t) in mdp.trans[s][a1][a2].iter().enumerate() {
                    out[sp] += w * t;
                }
            }
        }
    }
    Ok(ActionKernel { dist })
}

/// `r_t(s,a1) = Σ_{a2} π2(s,a2) r(s,a1,a2)`.
pub fn induce_reward_matrix(mdp: &Mdp, p2: &Policy) -> Result<RewardMatrix1> {
    check_p2_dims(mdp, p2)?;
    let values = (0..mdp.n_states)
        .map(|s| {
            (0..mdp.n_a1)
                .map(|a1| {
                    (0..mdp.n_a2)
                        .map(|a2| p2.probs[s][a2] * mdp.reward[s][a1][a2])
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(RewardMatrix1 { values })
}

/// Row-wise dot product `⟨π, M⟩`: one expectation per state.
pub fn row_dot(policy: &Policy, m: &[Vec<f64>]) -> Vec<f64> {
    policy
        .probs
        .iter()
        .zip(m)
        .map(|(p, row)| p.iter().zip(row).map(|(a, b)| a * b).sum())
        .collect()
}

/// Iterates every deterministic policy (action per state); `|A|^|S|` items.
pub fn deterministic_policies(
    role: AgentRole,
    n_states: usize,
    n_actions: usize,
) -> impl Iterator<Item = Policy> {
    let total = (n_actions as u128).pow(n_states as u32);
    (0..total).map(move |mut idx| {
        let actions: Vec<usize> = (0..n_states)
            .map(|_| {
                let a = (idx % n_actions as u128) as usize;
                idx /= n_actions as u128;
                a
            })
            .collect();
        Policy::deterministic(role, &actions, n_actions)
    })
}
