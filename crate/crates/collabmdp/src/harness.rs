//! The episodic protocol and everything needed to judge a run: the
//! commit → return → observe → update loop, certified regret against the
//! best fixed policy, the joint optimum, influence, policy-space diameters,
//! κ factors, and (λ, μ)-smoothness certificates.

use serde::{Deserialize, Serialize};

use crate::bias_q::q_values;
use crate::chain::{finite_return, mixing_estimate, stationary_from, MixingEstimate};
use crate::learners::{Algorithm, LearnerConfig, LearnerState, WindowWeights};
use crate::mdp::{
    deterministic_policies, induce_kernel, induce_reward_matrix, row_dot, AgentRole, Mdp, Policy,
};
use crate::norms::{l1_diff, max_abs_norm, op_inf_diff};
use crate::opponents::{Opponent, OpponentSpec};
use crate::simplex::project_to_simplex;
use crate::{Error, Result};

/// Deterministic enumerations (joint optimum, comparator vertices) refuse
/// to run past this many policies.
pub const ENUM_CAP: u128 = 1_000_000;
/// Grid pairs evaluated by a smoothness certificate.
const GRID_PAIR_CAP: usize = 10_000;
/// Local refinement of the comparator: projected finite-difference ascent.
const REFINE_ITERS: usize = 200;
const REFINE_STEP: f64 = 0.05;
const REFINE_FD: f64 = 1e-5;

/// Per-episode record. The Q-table carries the committed policy pair as its
/// context, so the log stores each policy exactly once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Episode index, 1-based.
    pub t: usize,
    pub q: crate::bias_q::QTable,
    /// Exact M-round return of the committed pair.
    pub v: f64,
    /// `‖π1_t − π1_{t−1}‖_∞`; 0 at t = 1.
    pub rho1_step: f64,
    /// `‖π2_t − π2_{t−1}‖_∞`; 0 at t = 1.
    pub rho2_step: f64,
    /// Window weights for double-recency-bias runs, when requested.
    pub weights: Option<WindowWeights>,
}

impl EpisodeRecord {
    pub fn pi1(&self) -> &Policy {
        &self.q.pi1
    }

    pub fn pi2(&self) -> &Policy {
        &self.q.pi2
    }

    /// `η_t(π1_t)`.
    pub fn eta(&self) -> f64 {
        self.q.eta
    }
}

/// A full episodic run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub mdp: Mdp,
    pub algorithm: Algorithm,
    pub gamma: usize,
    pub epsilon: f64,
    pub t_episodes: usize,
    pub m_rounds: usize,
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
}

impl EpisodeLog {
    pub fn pi2_sequence(&self) -> Vec<Policy> {
        self.records.iter().map(|r| r.pi2().clone()).collect()
    }

    /// Measured `ρ1 = max_{t>1} ‖π1_t − π1_{t−1}‖_∞`.
    pub fn rho1_hat(&self) -> f64 {
        self.records.iter().map(|r| r.rho1_step).fold(0.0, f64::max)
    }

    pub fn rho2_hat(&self) -> f64 {
        self.records.iter().map(|r| r.rho2_step).fold(0.0, f64::max)
    }

    /// Measured ρ1 restricted to steps that do not cross a segment
    /// boundary (restart runs change abruptly there by design).
    pub fn rho1_within_segment(&self) -> f64 {
        self.records
            .iter()
            .filter(|r| r.t > 1 && (r.t - 1) % self.gamma != 0)
            .map(|r| r.rho1_step)
            .fold(0.0, f64::max)
    }

    /// `Σ_t η_t(π1_t)`.
    pub fn learner_value(&self) -> f64 {
        self.records.iter().map(|r| r.eta()).sum()
    }

    /// `V̄ = (1/T) Σ_t V_t`.
    pub fn v_bar(&self) -> f64 {
        self.records.iter().map(|r| r.v).sum::<f64>() / self.records.len() as f64
    }
}

/// Knobs for [`run`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Store the per-window weight matrices in each record (needed by the
    /// RVU and weight-stability checks; sizable for long runs).
    pub log_weights: bool,
}

/// Runs the episodic protocol for `t_episodes` episodes of `m_rounds`
/// rounds: agent 1 commits from its expert state, the opponent commits from
/// its spec, the exact return and the Q-table are computed, then both sides
/// observe. Returns are exact distribution propagations; nothing is sampled.
pub fn run(
    mdp: &Mdp,
    learner_cfg: &LearnerConfig,
    opp_spec: &OpponentSpec,
    t_episodes: usize,
    m_rounds: usize,
    seed: u64,
    opts: &RunOptions,
) -> Result<EpisodeLog> {
    if t_episodes == 0 || m_rounds == 0 {
        return Err(Error::InvalidInput("need t_episodes >= 1 and m_rounds >= 1".into()));
    }
    learner_cfg.check()?;
    let mut learner = LearnerState::new(learner_cfg.clone(), mdp.n_states, mdp.n_a1)?;
    let mut opponent = Opponent::new(opp_spec.clone(), mdp, t_episodes)?;
    let mut records: Vec<EpisodeRecord> = Vec::with_capacity(t_episodes);

    for t in 1..=t_episodes {
        let step = learner.step()?;
        let pi1 = step.policy;
        let pi2 = opponent.current().clone();
        let q = q_values(mdp, &pi1, &pi2)?;
        let v = finite_return(mdp, &pi1, &pi2, m_rounds)?;
        let (rho1_step, rho2_step) = match records.last() {
            Some(prev) => (
                op_inf_diff(&pi1.probs, &prev.pi1().probs),
                op_inf_diff(&pi2.probs, &prev.pi2().probs),
            ),
            None => (0.0, 0.0),
        };
        learner.observe(q.clone());
        opponent.advance(&pi1)?;
        records.push(EpisodeRecord {
            t,
            q,
            v,
            rho1_step,
            rho2_step,
            weights: if opts.log_weights { step.weights } else { None },
        });
    }

    Ok(EpisodeLog {
        mdp: mdp.clone(),
        algorithm: learner_cfg.algorithm,
        gamma: learner_cfg.gamma,
        epsilon: learner_cfg.epsilon(),
        t_episodes,
        m_rounds,
        seed,
        records,
    })
}

/// `η_t(π1)` for every episode of a π2 sequence, warm-starting each
/// stationary solve from the previous episode's distribution.
pub fn sequence_etas(mdp: &Mdp, p1: &Policy, pi2s: &[Policy]) -> Result<Vec<f64>> {
    let mut etas = Vec::with_capacity(pi2s.len());
    let mut warm = crate::simplex::uniform(mdp.n_states);
    for p2 in pi2s {
        let kernel = induce_kernel(mdp, p1, p2)?;
        let sd = stationary_from(&kernel, &warm)?;
        let r = induce_reward_matrix(mdp, p2)?;
        let g = row_dot(p1, &r.values);
        etas.push(sd.dist.iter().zip(&g).map(|(d, v)| d * v).sum());
        warm = sd.dist;
    }
    Ok(etas)
}

/// `Σ_t η_t(π1)` over a π2 sequence.
pub fn sequence_value(mdp: &Mdp, p1: &Policy, pi2s: &[Policy]) -> Result<f64> {
    Ok(sequence_etas(mdp, p1, pi2s)?.iter().sum())
}

/// Best fixed agent-1 policy found for a π2 sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparatorResult {
    pub policy: Policy,
    /// `Σ_t η_t(policy)` — a certified lower bound on the comparator sup.
    pub value: f64,
    pub method: String,
}

/// Exhaustive deterministic enumeration followed by projected
/// finite-difference ascent from the best vertex (200 iterations, step
/// 0.05, forward differences on simplex-projected perturbations).
///
/// `Σ_t η_t(π1)` is not concave in π1 in general, so the sup may be
/// unattainable exactly; every evaluated point is a genuine policy, so the
/// returned value is a certified lower bound, improved but never
/// invalidated by the refinement.
pub fn best_fixed_comparator(mdp: &Mdp, pi2s: &[Policy]) -> Result<ComparatorResult> {
    if pi2s.is_empty() {
        return Err(Error::InvalidInput("empty opponent sequence".into()));
    }
    let size = (mdp.n_a1 as u128)
        .checked_pow(mdp.n_states as u32)
        .ok_or(Error::ScaleCap { size: u128::MAX, cap: ENUM_CAP })?;
    if size > ENUM_CAP {
        return Err(Error::ScaleCap { size, cap: ENUM_CAP });
    }

    let mut best_policy = None;
    let mut best_value = f64::NEG_INFINITY;
    for p1 in deterministic_policies(AgentRole::Agent1, mdp.n_states, mdp.n_a1) {
        let value = sequence_value(mdp, &p1, pi2s)?;
        if value > best_value {
            best_value = value;
            best_policy = Some(p1);
        }
    }
    let vertex_value = best_value;
    let mut current = best_policy.expect("at least one deterministic policy").probs;
    let mut current_value = best_value;
    let mut best_probs = current.clone();

    for _ in 0..REFINE_ITERS {
        // Forward differences along simplex-projected coordinate bumps.
        let mut grad = vec![vec![0.0; mdp.n_a1]; mdp.n_states];
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_a1 {
                let mut probe = current.clone();
                let mut row = probe[s].clone();
                row[a] += REFINE_FD;
                probe[s] = project_to_simplex(&row);
                let p = Policy { role: AgentRole::Agent1, probs: probe };
                let v = sequence_value(mdp, &p, pi2s)?;
                grad[s][a] = (v - current_value) / REFINE_FD;
            }
        }
        let next: Vec<Vec<f64>> = current
            .iter()
            .zip(&grad)
            .map(|(row, g)| {
                let bumped: Vec<f64> =
                    row.iter().zip(g).map(|(x, d)| x + REFINE_STEP * d).collect();
                project_to_simplex(&bumped)
            })
            .collect();
        let next_policy = Policy { role: AgentRole::Agent1, probs: next.clone() };
        let next_value = sequence_value(mdp, &next_policy, pi2s)?;
        current = next;
        current_value = next_value;
        if next_value > best_value {
            best_value = next_value;
            best_probs = current.clone();
        }
    }

    let method = if best_value > vertex_value {
        "enumeration+local-refine"
    } else {
        "enumeration"
    };
    Ok(ComparatorResult {
        policy: Policy { role: AgentRole::Agent1, probs: best_probs },
        value: best_value,
        method: method.to_string(),
    })
}

/// Regret of a run against the comparator, plus the smoothness-adjusted
/// return lower bound when a certificate is supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretReport {
    pub comparator: Policy,
    pub comparator_value: f64,
    pub learner_value: f64,
    /// Certified lower bound on the sup-regret.
    pub regret: f64,
    pub comparator_method: String,
    pub v_bar: f64,
    pub opt: Option<f64>,
    /// `(λ/(1+μ))·Opt − R/((1+μ)T) − 2(1+λ/(1+μ))/(M(1−ê))`, the value V̄
    /// must dominate.
    pub smooth_lower_bound: Option<f64>,
}

/// Assembles the report. When a smoothness certificate and the mixing
/// estimate are supplied, the anchor policy is also charged against the
/// learner so that the quoted regret upper-bounds the anchor's advantage —
/// exactly what the return bound consumes.
pub fn regret_report(
    mdp: &Mdp,
    log: &EpisodeLog,
    comparator: &ComparatorResult,
    opt: Option<f64>,
    cert: Option<&SmoothnessCertificate>,
    mix: Option<&MixingEstimate>,
) -> Result<RegretReport> {
    let learner_value = log.learner_value();
    let regret = comparator.value - learner_value;
    let smooth_lower_bound = match (cert, mix, opt) {
        (Some(cert), Some(mix), Some(opt)) => {
            let pi2s = log.pi2_sequence();
            let anchor_value = sequence_value(mdp, &cert.anchor_pi1, &pi2s)?;
            let r_used = regret.max(anchor_value - learner_value);
            let t = log.t_episodes as f64;
            let m = log.m_rounds as f64;
            let lam = cert.lambda / (1.0 + cert.mu);
            Some(lam * opt - r_used / ((1.0 + cert.mu) * t) - 2.0 * (1.0 + lam) / (m * mix.gap()))
        }
        _ => None,
    };
    Ok(RegretReport {
        comparator: comparator.policy.clone(),
        comparator_value: comparator.value,
        learner_value,
        regret,
        comparator_method: comparator.method.clone(),
        v_bar: log.v_bar(),
        opt,
        smooth_lower_bound,
    })
}

/// Maximum M-round return over all deterministic stationary joint policy
/// pairs. At desk scale deterministic stationary pairs attain the
/// average-reward optimum as M grows.
pub fn opt_value(mdp: &Mdp, m_rounds: usize) -> Result<f64> {
    let size = (mdp.n_a1 as u128)
        .checked_pow(mdp.n_states as u32)
        .and_then(|a| a.checked_mul((mdp.n_a2 as u128).pow(mdp.n_states as u32)))
        .ok_or(Error::ScaleCap { size: u128::MAX, cap: ENUM_CAP })?;
    if size > ENUM_CAP {
        return Err(Error::ScaleCap { size, cap: ENUM_CAP });
    }
    let mut best = f64::NEG_INFINITY;
    for p1 in deterministic_policies(AgentRole::Agent1, mdp.n_states, mdp.n_a1) {
        for p2 in deterministic_policies(AgentRole::Agent2, mdp.n_states, mdp.n_a2) {
            best = best.max(finite_return(mdp, &p1, &p2, m_rounds)?);
        }
    }
    Ok(best)
}

/// Influence of one agent on the transition dynamics: the worst ratio of
/// induced-kernel change to policy change.
///
/// Row s of a vertex kernel depends only on the actions at s, so the
/// deterministic-vertex maximum reduces to single-state action swaps:
/// `max_{s,a1,a2≠a2'} ‖P(s,a1,a2,·) − P(s,a1,a2',·)‖₁ / 2` for agent 2 (a
/// pair differing only at s attains it, and no vertex pair exceeds it).
/// The result is a certified lower bound on the sup over all policies and
/// always lands in [0, 1].
pub fn influence(mdp: &Mdp, which: AgentRole) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..mdp.n_states {
        match which {
            AgentRole::Agent2 => {
                for a1 in 0..mdp.n_a1 {
                    for a2 in 0..mdp.n_a2 {
                        for a2b in (a2 + 1)..mdp.n_a2 {
                            worst =
                                worst.max(l1_diff(&mdp.trans[s][a1][a2], &mdp.trans[s][a1][a2b]));
                        }
                    }
                }
            }
            AgentRole::Agent1 => {
                for a2 in 0..mdp.n_a2 {
                    for a1 in 0..mdp.n_a1 {
                        for a1b in (a1 + 1)..mdp.n_a1 {
                            worst =
                                worst.max(l1_diff(&mdp.trans[s][a1][a2], &mdp.trans[s][a1b][a2]));
                        }
                    }
                }
            }
        }
    }
    worst / 2.0
}

/// ℓ1 diameters of the two policy spaces; the full simplex has diameter 2,
/// degenerating to 0 for single-action agents. Restricted policy sets are
/// not representable here.
pub fn diameters(mdp: &Mdp) -> (f64, f64) {
    let d = |n: usize| if n >= 2 { 2.0 } else { 0.0 };
    (d(mdp.n_a1), d(mdp.n_a2))
}

/// A grid-certified (λ, μ) smoothness witness: an anchor pair and
/// constants such that on every grid point
/// `η_{π2}(π1*) ≥ λ·η* − μ·η_{π2}(π1)` and `η* ≥ η_{π2}(π1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub lambda: f64,
    pub mu: f64,
    pub anchor_pi1: Policy,
    pub anchor_pi2: Policy,
    /// `η* = η_{π2*}(π1*)`, the grid argmax.
    pub eta_star: f64,
    /// Certified lower bound on the optimal average reward (the measured
    /// anchor value).
    pub eta_hat: f64,
    pub grid: String,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub diam_pi1: f64,
    pub diam_pi2: f64,
}

fn policy_grid(role: AgentRole, ns: usize, na: usize, resolution: usize, cap: usize) -> Vec<Policy> {
    let mut grid: Vec<Policy> = Vec::new();
    for p in deterministic_policies(role, ns, na) {
        if grid.len() >= cap {
            return grid;
        }
        grid.push(p);
    }
    let vertices = grid.len();
    'outer: for i in 0..vertices {
        for j in (i + 1)..vertices {
            for k in 1..=resolution {
                if grid.len() >= cap {
                    break 'outer;
                }
                let w = k as f64 / (resolution + 1) as f64;
                let probs: Vec<Vec<f64>> = grid[i]
                    .probs
                    .iter()
                    .zip(&grid[j].probs)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect())
                    .collect();
                grid.push(Policy { role, probs });
            }
        }
    }
    grid
}

/// Searches a policy grid (deterministic vertices plus pairwise mixtures at
/// `resolution` interior weights) for the anchor pair maximizing η, then
/// sweeps μ over a log grid and takes the feasible (λ, μ) maximizing
/// `λ/(1+μ)`. Ties in the anchor go to the lowest grid index.
pub fn smoothness_certificate(mdp: &Mdp, resolution: usize) -> Result<SmoothnessCertificate> {
    // Per-agent caps sized so the pair grid stays within budget.
    let per_agent_cap = (GRID_PAIR_CAP as f64).sqrt() as usize;
    let g1 = policy_grid(AgentRole::Agent1, mdp.n_states, mdp.n_a1, resolution, per_agent_cap);
    let g2 = policy_grid(AgentRole::Agent2, mdp.n_states, mdp.n_a2, resolution, per_agent_cap);

    let mut eta = vec![vec![0.0; g2.len()]; g1.len()];
    let mut warm = crate::simplex::uniform(mdp.n_states);
    for (i, p1) in g1.iter().enumerate() {
        for (j, p2) in g2.iter().enumerate() {
            let kernel = induce_kernel(mdp, p1, p2)?;
            let sd = stationary_from(&kernel, &warm)?;
            let r = induce_reward_matrix(mdp, p2)?;
            let g = row_dot(p1, &r.values);
            eta[i][j] = sd.dist.iter().zip(&g).map(|(d, v)| d * v).sum();
            warm = sd.dist;
        }
    }

    let (mut ai, mut aj, mut eta_star) = (0, 0, f64::NEG_INFINITY);
    for (i, row) in eta.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > eta_star {
                (ai, aj, eta_star) = (i, j, v);
            }
        }
    }
    if eta_star <= 0.0 {
        return Err(Error::InvalidInput(
            "degenerate instance: optimal average reward is 0, certificate refused".into(),
        ));
    }

    // λ(μ) = min over grid pairs of (η_{π2}(π1*) + μ·η_{π2}(π1)) / η*.
    let mut mus = vec![0.0];
    let steps = 60;
    for k in 0..=steps {
        mus.push(10f64.powf(-3.0 + 6.0 * k as f64 / steps as f64));
    }
    let mut best: Option<(f64, f64)> = None;
    for &mu in &mus {
        let mut lam = f64::INFINITY;
        for i in 0..g1.len() {
            for j in 0..g2.len() {
                lam = lam.min((eta[ai][j] + mu * eta[i][j]) / eta_star);
            }
        }
        if lam > 0.0 {
            let better = match best {
                Some((bl, bm)) => lam / (1.0 + mu) > bl / (1.0 + bm),
                None => true,
            };
            if better {
                best = Some((lam, mu));
            }
        }
    }
    let (lambda, mu) = best.ok_or_else(|| {
        Error::InvalidInput("no positive λ is feasible on the grid".into())
    })?;

    // Re-verify both inequalities on every grid point.
    for i in 0..g1.len() {
        for j in 0..g2.len() {
            debug_assert!(eta[ai][j] >= lambda * eta_star - mu * eta[i][j] - 1e-9);
            debug_assert!(eta_star >= eta[i][j] - 1e-9);
        }
    }

    let (d1, d2) = diameters(mdp);
    Ok(SmoothnessCertificate {
        lambda,
        mu,
        anchor_pi1: g1[ai].clone(),
        anchor_pi2: g2[aj].clone(),
        eta_star,
        eta_hat: eta_star,
        grid: format!(
            "{}x{} policies: deterministic vertices plus pairwise mixtures at {} interior weights",
            g1.len(),
            g2.len(),
            resolution
        ),
        kappa1: None,
        kappa2: None,
        p1: None,
        p2: None,
        diam_pi1: d1,
        diam_pi2: d2,
    })
}

/// The influence-based κ factors for state-only-reward instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaFactors {
    /// `κ_i = (1 − ê) · η̂ / (2 · I_i · Δ_{π_i})`; +∞ when the agent has no
    /// influence or no diameter.
    pub kappa1: f64,
    pub kappa2: f64,
    pub influence1: f64,
    pub influence2: f64,
    pub eta_hat: f64,
    pub contraction: f64,
}

/// Computes κ factors. Requires a state-only reward (`r` constant across
/// actions per state) and `eta_hat` not exceeding the best deterministic
/// average reward.
pub fn kappa_factors(mdp: &Mdp, eta_hat: f64) -> Result<KappaFactors> {
    for (s, per_a1) in mdp.reward.iter().enumerate() {
        let r0 = per_a1[0][0];
        for per_a2 in per_a1 {
            for &r in per_a2 {
                if (r - r0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "reward depends on actions at state {s}; κ factors need a state-only reward"
                    )));
                }
            }
        }
    }
    let size = (mdp.n_a1 as u128)
        .checked_pow(mdp.n_states as u32)
        .and_then(|a| a.checked_mul((mdp.n_a2 as u128).pow(mdp.n_states as u32)))
        .ok_or(Error::ScaleCap { size: u128::MAX, cap: ENUM_CAP })?;
    if size > ENUM_CAP {
        return Err(Error::ScaleCap { size, cap: ENUM_CAP });
    }
    let mut eta_star_det = f64::NEG_INFINITY;
    for p1 in deterministic_policies(AgentRole::Agent1, mdp.n_states, mdp.n_a1) {
        for p2 in deterministic_policies(AgentRole::Agent2, mdp.n_states, mdp.n_a2) {
            eta_star_det = eta_star_det.max(crate::chain::average_reward(mdp, &p1, &p2)?);
        }
    }
    if eta_hat > eta_star_det + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "eta_hat {eta_hat} exceeds the best deterministic average reward {eta_star_det}"
        )));
    }
    let mix = mixing_estimate(mdp)?;
    let (d1, d2) = diameters(mdp);
    let i1 = influence(mdp, AgentRole::Agent1);
    let i2 = influence(mdp, AgentRole::Agent2);
    let kappa = |inf: f64, diam: f64| {
        if inf * diam == 0.0 {
            f64::INFINITY
        } else {
            mix.gap() * eta_hat / (2.0 * inf * diam)
        }
    };
    Ok(KappaFactors {
        kappa1: kappa(i1, d1),
        kappa2: kappa(i2, d2),
        influence1: i1,
        influence2: i2,
        eta_hat,
        contraction: mix.contraction,
    })
}

/// The (λ, μ) bounds implied by κ factors for free parameters
/// `p1 > p2 ≥ 0`: `λ ≤ (p1/(p1−p2))·(2κ2−1)/(2κ2)` and
/// `μ ≥ (p2/(p1−p2))·(2κ1−1)/(2κ1−2)`. Requires `κ2 ≥ κ1 > 1`.
pub fn smoothness_bounds_from_kappa(
    kappa1: f64,
    kappa2: f64,
    p1: f64,
    p2: f64,
) -> Result<(f64, f64)> {
    if !(p1 > p2 && p2 >= 0.0) {
        return Err(Error::InvalidInput(format!("need p1 > p2 >= 0, got p1={p1}, p2={p2}")));
    }
    if !(kappa2 >= kappa1 && kappa1 > 1.0) {
        return Err(Error::InvalidInput(format!(
            "need kappa2 >= kappa1 > 1, got kappa1={kappa1}, kappa2={kappa2}"
        )));
    }
    let f2 = if kappa2.is_infinite() { 1.0 } else { (2.0 * kappa2 - 1.0) / (2.0 * kappa2) };
    let f1 = if kappa1.is_infinite() { 1.0 } else { (2.0 * kappa1 - 1.0) / (2.0 * kappa1 - 2.0) };
    let lambda_max = p1 / (p1 - p2) * f2;
    let mu_min = p2 / (p1 - p2) * f1;
    Ok((lambda_max, mu_min))
}

/// Renders a run as the episode CSV: one row per episode with the
/// comparator's per-episode value and the cumulative certified regret.
pub fn episode_csv(log: &EpisodeLog, comparator_etas: &[f64]) -> String {
    assert_eq!(comparator_etas.len(), log.records.len());
    let mut out = String::from(
        "t,eta_learner,eta_comparator_best,cum_regret,V_t,rho1_step,rho2_step,q_maxnorm\n",
    );
    let mut cum = 0.0;
    for (r, &ce) in log.records.iter().zip(comparator_etas) {
        cum += ce - r.eta();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.t,
            r.eta(),
            ce,
            cum,
            r.v,
            r.rho1_step,
            r.rho2_step,
            max_abs_norm(&r.q.q),
        ));
    }
    out
}
