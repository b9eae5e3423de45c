//! Average-reward Q-values.
//!
//! The table satisfies the Bellman equation
//! `Q(s,a1) = r(s,a1) − η + P_{π2}(s,a1) · Q^{π1}` and is pinned to the
//! infinite-series definition by the normalization `d · Q^{π1} = 0`: the
//! series telescopes to a bias function whose stationary-weighted mean is
//! zero, so one (|S|+1)-row linear solve reproduces it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::stationary_distribution;
use crate::mdp::{
    induce_action_kernel, induce_kernel, induce_reward_matrix, row_dot, Mdp, Policy,
};
use crate::{Error, Result};

/// Residual accepted from the bias solve and the Bellman identity.
const SOLVE_TOL: f64 = 1e-8;

/// A Q-value table together with the `(η, π1, π2)` context that defines it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QTable {
    /// Matrix indexed (state, a1).
    pub q: Vec<Vec<f64>>,
    /// Average reward `η(π1)` under the context pair.
    pub eta: f64,
    pub pi1: Policy,
    pub pi2: Policy,
    /// `max_{s,a1} |Q − (r − η + P_{π2}·Q^{π1})|` at construction.
    pub bellman_residual: f64,
    /// `|d · Q^{π1}|` at construction.
    pub normalization_residual: f64,
}

impl QTable {
    pub fn n_states(&self) -> usize {
        self.q.len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s]
    }

    /// The policy-wise vector for the table's own context policy.
    pub fn own_policy_vector(&self) -> Vec<f64> {
        row_dot(&self.pi1, &self.q)
    }
}

/// Policy-wise Q-value column vector `Q^π(s) = E_{a1∼π(s)}[Q(s,a1)]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QPolicyVector {
    pub values: Vec<f64>,
}

/// Solves for the Q-table of `(p1, p2)`.
///
/// The bias `h` solves `h = ⟨π1, r⟩ − η·1 + P_{π1,π2} h` subject to
/// `d·h = 0`; `(I − P)` is rank-deficient by exactly one for a mixing chain,
/// so the system is solved least-squares with the normalization row
/// appended and the residual is checked against `1e-8`.
pub fn q_values(mdp: &Mdp, p1: &Policy, p2: &Policy) -> Result<QTable> {
    let kernel = induce_kernel(mdp, p1, p2)?;
    let sd = stationary_distribution(&kernel)?;
    let rmat = induce_reward_matrix(mdp, p2)?;
    let akern = induce_action_kernel(mdp, p2)?;
    let g = row_dot(p1, &rmat.values);
    let eta: f64 = sd.dist.iter().zip(&g).map(|(d, v)| d * v).sum();

    let n = mdp.n_states;
    let mut a = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = if i == j { 1.0 } else { 0.0 } - kernel.rows[i][j];
        }
        a[(n, i)] = sd.dist[i];
    }
    let mut b = DVector::zeros(n + 1);
    for i in 0..n {
        b[i] = g[i] - eta;
    }
    let svd = a.clone().svd(true, true);
    let h = svd
        .solve(&b, 1e-14)
        .map_err(|_| Error::SingularSystem { residual: f64::INFINITY })?;
    let solve_residual = (&a * &h - &b).abs().max();
    if !solve_residual.is_finite() || solve_residual > SOLVE_TOL {
        return Err(Error::SingularSystem { residual: solve_residual });
    }

    let q: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..mdp.n_a1)
                .map(|a1| {
                    let cont: f64 =
                        akern.dist[s][a1].iter().zip(h.iter()).map(|(p, hv)| p * hv).sum();
                    rmat.values[s][a1] - eta + cont
                })
                .collect()
        })
        .collect();

    let qpi = row_dot(p1, &q);
    let mut bellman_residual: f64 = 0.0;
    for s in 0..n {
        for a1 in 0..mdp.n_a1 {
            let cont: f64 =
                akern.dist[s][a1].iter().zip(&qpi).map(|(p, hv)| p * hv).sum();
            bellman_residual =
                bellman_residual.max((q[s][a1] - (rmat.values[s][a1] - eta + cont)).abs());
        }
    }
    let normalization_residual: f64 =
        sd.dist.iter().zip(&qpi).map(|(d, v)| d * v).sum::<f64>().abs();
    if bellman_residual > SOLVE_TOL || normalization_residual > SOLVE_TOL {
        return Err(Error::SingularSystem {
            residual: bellman_residual.max(normalization_residual),
        });
    }

    Ok(QTable {
        q,
        eta,
        pi1: p1.clone(),
        pi2: p2.clone(),
        bellman_residual,
        normalization_residual,
    })
}

/// Row-wise expectation of the table under an arbitrary agent-1 policy.
pub fn q_policy(q: &QTable, p: &Policy) -> Result<QPolicyVector> {
    if p.n_states() != q.n_states() || p.n_actions() != q.q[0].len() {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}, table is {}x{}",
            p.n_states(),
            p.n_actions(),
            q.n_states(),
            q.q[0].len()
        )));
    }
    Ok(QPolicyVector { values: row_dot(p, &q.q) })
}
