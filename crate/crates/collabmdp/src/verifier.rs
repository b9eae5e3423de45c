//! Executable checks for every quantitative inequality the analysis rests
//! on, evaluated over generated instances and logged runs.
//!
//! Each check produces a [`BoundCheck`] record with the measured left side,
//! the formula right side and the slack. Bounds are loose in practice, so
//! the uniform slack tolerance is tight (−1e−8): any near-violation is a
//! bug signal, not noise. The η/Q difference identity is an exact equality
//! and serves as the suite's canary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{
    average_reward, dobrushin, evolve_distribution, mixing_estimate, stationary_from,
    MixingEstimate,
};
use crate::harness::{
    best_fixed_comparator, influence, opt_value, run, sequence_value, smoothness_certificate,
    EpisodeLog, RunOptions, SmoothnessCertificate,
};
use crate::learners::{Algorithm, LearnerConfig};
use crate::mdp::{
    induce_action_kernel, induce_kernel, induce_reward_matrix, row_dot, AgentRole, Mdp, Policy,
};
use crate::norms::{l1_diff, max_abs_diff, max_abs_norm, op_inf_diff, sup_diff, sup_norm};
use crate::oftrl::Regularizer;
use crate::opponents::OpponentSpec;
use crate::seeding::derive_rng;
use crate::simplex::{dirichlet_ones, uniform};
use crate::Result;

/// Uniform pass tolerance: a check passes iff `slack = rhs − lhs ≥ −1e−8`.
pub const SLACK_TOL: f64 = -1e-8;
/// Tolerance for exact-identity checks (their lhs is `|difference|`).
pub const EQ_TOL: f64 = 1e-8;

/// One evaluated inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub context: String,
}

impl BoundCheck {
    pub fn new(name: &str, lhs: f64, rhs: f64, context: String) -> Self {
        let slack = rhs - lhs;
        BoundCheck { name: name.to_string(), lhs, rhs, slack, pass: slack >= SLACK_TOL, context }
    }

    /// Re-evaluates `pass` under a different tolerance (test hook for the
    /// CLI's failure paths).
    pub fn apply_tolerance(&mut self, tolerance: f64) {
        self.pass = self.slack >= tolerance;
    }
}

/// Random-instance generation shared by the suite, the tests and the CLI.
pub mod gen {
    use super::*;

    /// A random mixing MDP: Dirichlet(1) transition rows smoothed toward
    /// uniform by `smoothing`, i.i.d. uniform rewards, Dirichlet(1) initial
    /// distribution. Any `smoothing > 0` bounds the contraction estimate
    /// away from 1.
    pub fn random_mixing_mdp<R: Rng>(
        rng: &mut R,
        n_states: usize,
        n_a1: usize,
        n_a2: usize,
        smoothing: f64,
    ) -> Mdp {
        let u = smoothing / n_states as f64;
        let trans: Vec<Vec<Vec<Vec<f64>>>> = (0..n_states)
            .map(|_| {
                (0..n_a1)
                    .map(|_| {
                        (0..n_a2)
                            .map(|_| {
                                dirichlet_ones(rng, n_states)
                                    .into_iter()
                                    .map(|p| (1.0 - smoothing) * p + u)
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let reward: Vec<Vec<Vec<f64>>> = (0..n_states)
            .map(|_| {
                (0..n_a1)
                    .map(|_| (0..n_a2).map(|_| rng.gen_range(0.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let d1 = dirichlet_ones(rng, n_states);
        Mdp::new(trans, reward, d1).expect("generated instance is valid")
    }

    /// A policy with Dirichlet(1) rows.
    pub fn random_policy<R: Rng>(
        rng: &mut R,
        role: AgentRole,
        n_states: usize,
        n_actions: usize,
    ) -> Policy {
        let probs = (0..n_states).map(|_| dirichlet_ones(rng, n_actions)).collect();
        Policy { role, probs }
    }

    /// The pinned 3-state, 2x2-action mixing instance used for logged-run
    /// checks and the regret experiments.
    pub fn fixed_instance() -> Mdp {
        let mut rng = derive_rng(42, "fixed-instance", 0);
        random_mixing_mdp(&mut rng, 3, 2, 2, 0.1)
    }

    /// The deterministic drift endpoints used by the logged runs: all mass
    /// on action 0 drifting toward all mass on the last action.
    pub fn drift_endpoints(mdp: &Mdp) -> (Policy, Policy) {
        let zeros = vec![0usize; mdp.n_states];
        let lasts = vec![mdp.n_a2 - 1; mdp.n_states];
        (
            Policy::deterministic(AgentRole::Agent2, &zeros, mdp.n_a2),
            Policy::deterministic(AgentRole::Agent2, &lasts, mdp.n_a2),
        )
    }
}

// ---------------------------------------------------------------------------
// Instance-level checks
// ---------------------------------------------------------------------------

/// Exact identity: `η(π1) − η(π1_alt) = d_{π1,π2} · (Q^{π1} − Q^{π1_alt})`
/// with Q computed under `(π1_alt, π2)`. Checked as an equality.
pub fn check_eta_q_identity(
    mdp: &Mdp,
    p1: &Policy,
    p1_alt: &Policy,
    p2: &Policy,
    context: String,
) -> Result<BoundCheck> {
    let qt = crate::bias_q::q_values(mdp, p1_alt, p2)?;
    let lhs_val = average_reward(mdp, p1, p2)? - average_reward(mdp, p1_alt, p2)?;
    let kernel = induce_kernel(mdp, p1, p2)?;
    let d = stationary_from(&kernel, &uniform(mdp.n_states))?.dist;
    let qa = row_dot(p1, &qt.q);
    let qb = row_dot(p1_alt, &qt.q);
    let rhs_val: f64 = d.iter().zip(qa.iter().zip(&qb)).map(|(w, (x, y))| w * (x - y)).sum();
    Ok(BoundCheck::new(
        "eta-q-identity",
        (lhs_val - rhs_val).abs(),
        EQ_TOL,
        format!("{context}; eta-diff {lhs_val} vs weighted Q-diff {rhs_val}"),
    ))
}

/// `‖Q‖_max ≤ 3/(1−ê)` and `‖Q^{π1}‖_∞ ≤ 2/(1−ê)`.
pub fn check_q_bound(
    mdp: &Mdp,
    p1: &Policy,
    p2: &Policy,
    mix: &MixingEstimate,
    context: String,
) -> Result<Vec<BoundCheck>> {
    let qt = crate::bias_q::q_values(mdp, p1, p2)?;
    Ok(vec![
        BoundCheck::new(
            "q-table-bound",
            max_abs_norm(&qt.q),
            3.0 / mix.gap(),
            context.clone(),
        ),
        BoundCheck::new(
            "q-policy-bound",
            sup_norm(&qt.own_policy_vector()),
            2.0 / mix.gap(),
            context,
        ),
    ])
}

/// `‖d_{t,m} − d_stat‖₁ ≤ 2ê^{m−1}` for m = 1..m_max.
pub fn check_dist_convergence(
    mdp: &Mdp,
    p1: &Policy,
    p2: &Policy,
    mix: &MixingEstimate,
    m_max: usize,
    context: String,
) -> Result<Vec<BoundCheck>> {
    let kernel = induce_kernel(mdp, p1, p2)?;
    let stat = stationary_from(&kernel, &uniform(mdp.n_states))?.dist;
    let mut d = mdp.d1.clone();
    let mut out = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        if m > 1 {
            d = evolve_distribution(&kernel, &d, 2);
        }
        out.push(BoundCheck::new(
            "dist-convergence",
            l1_diff(&d, &stat),
            2.0 * mix.contraction.powi(m as i32 - 1),
            format!("{context}; m={m}"),
        ));
    }
    Ok(out)
}

/// The generic policy/reward/kernel inequalities on a random policy
/// quadruple, each as a named check.
pub fn generic_bound_checks<R: Rng>(
    mdp: &Mdp,
    rng: &mut R,
    context: String,
) -> Result<Vec<BoundCheck>> {
    let (ns, na1, na2) = (mdp.n_states, mdp.n_a1, mdp.n_a2);
    let p1 = gen::random_policy(rng, AgentRole::Agent1, ns, na1);
    let p1b = gen::random_policy(rng, AgentRole::Agent1, ns, na1);
    let p2 = gen::random_policy(rng, AgentRole::Agent2, ns, na2);
    let p2b = gen::random_policy(rng, AgentRole::Agent2, ns, na2);
    let dp1 = op_inf_diff(&p1.probs, &p1b.probs);
    let dp2 = op_inf_diff(&p2.probs, &p2b.probs);

    let ra = induce_reward_matrix(mdp, &p2)?;
    let rb = induce_reward_matrix(mdp, &p2b)?;
    let mut checks = vec![
        BoundCheck::new(
            "policy-reward-dot-bound",
            sup_norm(&row_dot(&p1, &ra.values)),
            1.0,
            context.clone(),
        ),
        BoundCheck::new(
            "reward-shift",
            max_abs_diff(&ra.values, &rb.values),
            dp2,
            context.clone(),
        ),
        BoundCheck::new(
            "reward-dot-shift-opponent",
            sup_diff(&row_dot(&p1, &ra.values), &row_dot(&p1, &rb.values)),
            dp2,
            context.clone(),
        ),
        BoundCheck::new(
            "reward-dot-shift-self",
            sup_diff(&row_dot(&p1, &rb.values), &row_dot(&p1b, &rb.values)),
            dp1,
            context.clone(),
        ),
    ];

    // ‖⟨p − p', M⟩‖_∞ ≤ 2‖M‖_max for an arbitrary matrix.
    let m: Vec<Vec<f64>> =
        (0..ns).map(|_| (0..na1).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    checks.push(BoundCheck::new(
        "matrix-dot-shift",
        sup_diff(&row_dot(&p1, &m), &row_dot(&p1b, &m)),
        2.0 * max_abs_norm(&m),
        context.clone(),
    ));

    let kaa = induce_kernel(mdp, &p1, &p2)?;
    let kab = induce_kernel(mdp, &p1, &p2b)?;
    let kba = induce_kernel(mdp, &p1b, &p2)?;
    checks.push(BoundCheck::new(
        "kernel-shift-opponent",
        op_inf_diff(&kaa.rows, &kab.rows),
        dp2,
        context.clone(),
    ));
    checks.push(BoundCheck::new(
        "kernel-shift-self",
        op_inf_diff(&kaa.rows, &kba.rows),
        dp1,
        context.clone(),
    ));

    let aka = induce_action_kernel(mdp, &p2)?;
    let akb = induce_action_kernel(mdp, &p2b)?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_rhs = 0.0;
    for s in 0..ns {
        let row_change = l1_diff(p2.row(s), p2b.row(s));
        for a1 in 0..na1 {
            let change = l1_diff(&aka.dist[s][a1], &akb.dist[s][a1]);
            if change - row_change > worst {
                worst = change - row_change;
                worst_rhs = row_change;
            }
        }
    }
    checks.push(BoundCheck::new(
        "action-kernel-shift",
        worst + worst_rhs,
        worst_rhs,
        context.clone(),
    ));

    for (name, role) in
        [("influence-range-1", AgentRole::Agent1), ("influence-range-2", AgentRole::Agent2)]
    {
        checks.push(BoundCheck::new(name, influence(mdp, role), 1.0, context.clone()));
    }

    // Dobrushin contraction certified on random distribution pairs.
    let delta = dobrushin(&kaa);
    let mut worst_lhs = 0.0;
    let mut worst_rhs = f64::INFINITY;
    for _ in 0..1000 {
        let a = dirichlet_ones(rng, ns);
        let b = dirichlet_ones(rng, ns);
        let va = evolve_distribution(&kaa, &a, 2);
        let vb = evolve_distribution(&kaa, &b, 2);
        let lhs = l1_diff(&va, &vb);
        let rhs = delta * l1_diff(&a, &b);
        if rhs - lhs < worst_rhs - worst_lhs {
            worst_lhs = lhs;
            worst_rhs = rhs;
        }
    }
    checks.push(BoundCheck::new(
        "dobrushin-contraction",
        worst_lhs,
        worst_rhs,
        format!("{context}; 1000 random distribution pairs"),
    ));

    Ok(checks)
}

// ---------------------------------------------------------------------------
// Logged-run checks
// ---------------------------------------------------------------------------

fn stationary_sequence(log: &EpisodeLog) -> Result<Vec<Vec<f64>>> {
    let mut warm = uniform(log.mdp.n_states);
    let mut out = Vec::with_capacity(log.records.len());
    for r in &log.records {
        let kernel = induce_kernel(&log.mdp, r.pi1(), r.pi2())?;
        let sd = stationary_from(&kernel, &warm)?;
        warm = sd.dist.clone();
        out.push(sd.dist);
    }
    Ok(out)
}

/// Consecutive stationary distributions move by at most
/// `(ρ1 + I2·ρ2)/(1−ê)` per episode, with per-step measured magnitudes.
pub fn check_stat_dist_step(
    log: &EpisodeLog,
    mix: &MixingEstimate,
    i2: f64,
) -> Result<Vec<BoundCheck>> {
    let stats = stationary_sequence(log)?;
    Ok(log
        .records
        .windows(2)
        .zip(stats.windows(2))
        .map(|(rs, ds)| {
            let r = &rs[1];
            BoundCheck::new(
                "stationary-step",
                l1_diff(&ds[1], &ds[0]),
                (r.rho1_step + i2 * r.rho2_step) / mix.gap(),
                format!("t={}", r.t),
            )
        })
        .collect())
}

fn c_q_pi(rho1: f64, rho2: f64, i2: f64, gap: f64) -> f64 {
    3.0 * (rho1 + i2 * rho2) / (gap * gap) + 2.0 * (rho1 + rho2) / gap
}

fn c_q(rho1: f64, rho2: f64, i2: f64, gap: f64) -> f64 {
    c_q_pi(rho1, rho2, i2, gap) + (3.0 / gap + 1.0) * rho1 + 2.0 * rho2 + (rho1 + i2 * rho2) / gap
}

/// Consecutive Q differences: the policy-wise vector and the full table,
/// against their respective constants built from per-step magnitudes.
pub fn check_qdiff_bounds(
    log: &EpisodeLog,
    mix: &MixingEstimate,
    i2: f64,
) -> Result<Vec<BoundCheck>> {
    let gap = mix.gap();
    let mut out = Vec::new();
    for rs in log.records.windows(2) {
        let (prev, cur) = (&rs[0], &rs[1]);
        let bound_pi = c_q_pi(cur.rho1_step, cur.rho2_step, i2, gap);
        out.push(BoundCheck::new(
            "qdiff-policy-vector",
            sup_diff(&cur.q.own_policy_vector(), &prev.q.own_policy_vector()),
            bound_pi,
            format!("t={}", cur.t),
        ));
        out.push(BoundCheck::new(
            "qdiff-table",
            max_abs_diff(&cur.q.q, &prev.q.q),
            c_q(cur.rho1_step, cur.rho2_step, i2, gap),
            format!("t={}", cur.t),
        ));
    }
    Ok(out)
}

/// The table-difference constant normalized by the step magnitude never
/// exceeds `18/(1−ê)²`.
pub fn check_ratio_constant(log: &EpisodeLog, mix: &MixingEstimate, i2: f64) -> Vec<BoundCheck> {
    let gap = mix.gap();
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0;
    for rs in log.records.windows(2) {
        let cur = &rs[1];
        let denom = cur.rho1_step.max(cur.rho2_step);
        if denom > 0.0 {
            let ratio = c_q(cur.rho1_step, cur.rho2_step, i2, gap) / denom;
            if ratio > worst {
                worst = ratio;
                at = cur.t;
            }
        }
    }
    if worst.is_finite() {
        vec![BoundCheck::new(
            "qdiff-ratio-constant",
            worst,
            18.0 / (gap * gap),
            format!("worst episode t={at}"),
        )]
    } else {
        Vec::new()
    }
}

/// Weight-level and policy-level gradualness.
///
/// Double-recency-bias: `‖w_{t,τ} − w_{t−1,τ−1}‖_∞ ≤ min{2, 9ε/(1−ê)}` for
/// τ ≥ 2, and the per-step policy change obeys the same bound plus `2/Γ`.
/// Restart: the policy-level bound holds within segments.
pub fn check_weight_stability(log: &EpisodeLog, mix: &MixingEstimate) -> Vec<BoundCheck> {
    let eps = log.epsilon;
    let weight_bound = 2.0_f64.min(9.0 * eps / mix.gap());
    let mut out = Vec::new();
    match log.algorithm {
        Algorithm::ExpDrBias => {
            for rs in log.records.windows(2) {
                let (prev, cur) = (&rs[0], &rs[1]);
                if let (Some(wp), Some(wc)) = (&prev.weights, &cur.weights) {
                    let mut worst: f64 = 0.0;
                    for tau in 2..=log.gamma {
                        worst = worst.max(op_inf_diff(&wc[tau - 1], &wp[tau - 2]));
                    }
                    out.push(BoundCheck::new(
                        "weight-stability",
                        worst,
                        weight_bound,
                        format!("t={}, max over tau=2..{}", cur.t, log.gamma),
                    ));
                }
                out.push(BoundCheck::new(
                    "policy-gradualness",
                    cur.rho1_step,
                    2.0_f64.min(9.0 * eps / mix.gap() + 2.0 / log.gamma as f64),
                    format!("t={}", cur.t),
                ));
            }
        }
        Algorithm::ExpRestart => {
            for rs in log.records.windows(2) {
                let cur = &rs[1];
                if (cur.t - 1) % log.gamma == 0 {
                    continue; // segment boundary; abrupt by design
                }
                out.push(BoundCheck::new(
                    "policy-gradualness-segment",
                    cur.rho1_step,
                    weight_bound,
                    format!("t={}", cur.t),
                ));
            }
        }
    }
    out
}

fn q_row<'a>(log: &'a EpisodeLog, t: i64, s: usize, zero: &'a [f64]) -> &'a [f64] {
    if t < 1 {
        zero
    } else {
        log.records[t as usize - 1].q.row(s)
    }
}

fn weight_row<'a>(
    log: &'a EpisodeLog,
    t: i64,
    tau: i64,
    s: usize,
    cold: &'a [f64],
) -> &'a [f64] {
    if t < 1 || tau < 1 {
        return cold;
    }
    match &log.records[t as usize - 1].weights {
        Some(w) => &w[tau as usize - 1][s],
        None => cold,
    }
}

/// The per-window regret inequality for double-recency-bias runs, boundary
/// windows included: for each start t in [−Γ+2, T], each state and each
/// comparator distribution,
/// `Σ_τ Q(s)·(π(s) − w)ᵀ ≤ Δ_R/ε + ε·Σ‖ΔQ(s)‖²_∞ − (1/4ε)·Σ‖Δw(s)‖²₁`
/// over τ = θ(t)..Θ(t). Comparators: all vertices plus `extra` random
/// points. A record carries the worst (state, comparator) cell per t.
pub fn check_rvu(log: &EpisodeLog, extra_comparators: usize, seed: u64) -> Vec<BoundCheck> {
    assert!(matches!(log.algorithm, Algorithm::ExpDrBias));
    assert!(
        log.records.iter().all(|r| r.weights.is_some()),
        "per-window checks need a run logged with window weights"
    );
    let (t_total, gamma, eps) = (log.t_episodes as i64, log.gamma as i64, log.epsilon);
    let n_a1 = log.mdp.n_a1;
    let delta_r = Regularizer::NegativeEntropy.delta_r(n_a1);
    let zero = vec![0.0; n_a1];
    let cold = uniform(n_a1);
    let mut rng = derive_rng(seed, "rvu-comparators", 0);
    let mut comparators: Vec<Vec<f64>> = (0..n_a1)
        .map(|a| {
            let mut v = vec![0.0; n_a1];
            v[a] = 1.0;
            v
        })
        .collect();
    comparators.extend((0..extra_comparators).map(|_| dirichlet_ones(&mut rng, n_a1)));

    let mut out = Vec::new();
    for t in (2 - gamma)..=t_total {
        let theta = 1.max(2 - t);
        let theta_cap = gamma.min(t_total - t + 1);
        if theta > theta_cap {
            continue;
        }
        let mut worst: Option<(f64, f64, usize, usize)> = None;
        for s in 0..log.mdp.n_states {
            // The comparator-independent parts of the window.
            let mut rhs = delta_r / eps;
            let mut base = 0.0; // Σ Q·wᵀ
            let mut qsum = vec![0.0; n_a1];
            for tau in theta..=theta_cap {
                let e = t + tau - 1;
                let q = q_row(log, e, s, &zero);
                let q_prev = q_row(log, e - 1, s, &zero);
                let w = weight_row(log, e, tau, s, &cold);
                let w_prev = weight_row(log, e - 1, tau - 1, s, &cold);
                rhs += eps * sup_diff(q, q_prev).powi(2);
                rhs -= l1_diff(w, w_prev).powi(2) / (4.0 * eps);
                base += q.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                for (acc, v) in qsum.iter_mut().zip(q) {
                    *acc += v;
                }
            }
            for (ci, comp) in comparators.iter().enumerate() {
                let lhs =
                    qsum.iter().zip(comp).map(|(a, b)| a * b).sum::<f64>() - base;
                let replace = match worst {
                    Some((wl, wr, _, _)) => wr - wl > rhs - lhs,
                    None => true,
                };
                if replace {
                    worst = Some((lhs, rhs, s, ci));
                }
            }
        }
        let (lhs, rhs, s, ci) = worst.expect("nonempty window");
        out.push(BoundCheck::new(
            "rvu-window",
            lhs,
            rhs,
            format!("window start t={t}, worst state {s}, comparator {ci}"),
        ));
    }
    out
}

/// The segment version of the per-window inequality for restart runs, with
/// the pre-segment step standing in as episode 0 (zero Q, uniform policy).
pub fn check_rvu_restart(log: &EpisodeLog, extra_comparators: usize, seed: u64) -> Vec<BoundCheck> {
    assert!(matches!(log.algorithm, Algorithm::ExpRestart));
    let n_a1 = log.mdp.n_a1;
    let delta_r = Regularizer::NegativeEntropy.delta_r(n_a1);
    let eps = log.epsilon;
    let zero = vec![0.0; n_a1];
    let cold = uniform(n_a1);
    let mut rng = derive_rng(seed, "rvu-restart-comparators", 0);
    let mut comparators: Vec<Vec<f64>> = (0..n_a1)
        .map(|a| {
            let mut v = vec![0.0; n_a1];
            v[a] = 1.0;
            v
        })
        .collect();
    comparators.extend((0..extra_comparators).map(|_| dirichlet_ones(&mut rng, n_a1)));

    let mut out = Vec::new();
    let mut seg_start_t = 1;
    while seg_start_t <= log.t_episodes {
        let seg_end = (seg_start_t + log.gamma - 1).min(log.t_episodes);
        let mut worst: Option<(f64, f64, usize, usize)> = None;
        for s in 0..log.mdp.n_states {
            let mut rhs = delta_r / eps;
            let mut base = 0.0;
            let mut qsum = vec![0.0; n_a1];
            for t in seg_start_t..=seg_end {
                let q = log.records[t - 1].q.row(s);
                let pi = &log.records[t - 1].pi1().probs[s];
                let (q_prev, pi_prev): (&[f64], &[f64]) = if t == seg_start_t {
                    (&zero, &cold)
                } else {
                    (log.records[t - 2].q.row(s), &log.records[t - 2].pi1().probs[s])
                };
                rhs += eps * sup_diff(q, q_prev).powi(2);
                rhs -= l1_diff(pi, pi_prev).powi(2) / (4.0 * eps);
                base += q.iter().zip(pi).map(|(a, b)| a * b).sum::<f64>();
                for (acc, v) in qsum.iter_mut().zip(q) {
                    *acc += v;
                }
            }
            for (ci, comp) in comparators.iter().enumerate() {
                let lhs = qsum.iter().zip(comp).map(|(a, b)| a * b).sum::<f64>() - base;
                let replace = match worst {
                    Some((wl, wr, _, _)) => wr - wl > rhs - lhs,
                    None => true,
                };
                if replace {
                    worst = Some((lhs, rhs, s, ci));
                }
            }
        }
        let (lhs, rhs, s, ci) = worst.expect("nonempty segment");
        out.push(BoundCheck::new(
            "rvu-segment",
            lhs,
            rhs,
            format!("segment start t={seg_start_t}, worst state {s}, comparator {ci}"),
        ));
        seg_start_t += log.gamma;
    }
    out
}

/// The end-to-end regret bound for a double-recency-bias run, with `k`
/// taken from the measured magnitudes.
pub fn check_regret_bound(
    log: &EpisodeLog,
    mix: &MixingEstimate,
    i2: f64,
    certified_regret: f64,
) -> BoundCheck {
    let gap = mix.gap();
    let (t, gamma, eps) = (log.t_episodes as f64, log.gamma as f64, log.epsilon);
    let delta_r = Regularizer::NegativeEntropy.delta_r(log.mdp.n_a1);
    let rho2 = log.rho2_hat();
    let (name, rho1, lead, drift_factor) = match log.algorithm {
        Algorithm::ExpDrBias => ("regret-bound-drbias", log.rho1_hat(), 2.0, 6.0),
        Algorithm::ExpRestart => {
            ("regret-bound-restart", log.rho1_within_segment(), 1.0, 3.0)
        }
    };
    // The analysis wants k·ε strictly above both magnitudes.
    let k = rho1.max(rho2) / eps + 1e-12;
    let c_omega = 18.0 / (gap * gap);
    let rhs = lead * (delta_r + k * k * c_omega * c_omega) * t * gamma.powf(-0.75)
        + drift_factor * i2 * rho2 * t * gamma / (gap * gap);
    BoundCheck::new(
        name,
        certified_regret,
        rhs,
        format!("T={}, gamma={}, eps={eps}, k={k}", log.t_episodes, log.gamma),
    )
}

/// Per-episode return floor: `V_t ≥ η_t − 2/(M(1−ê))`.
pub fn check_return_bound(log: &EpisodeLog, mix: &MixingEstimate) -> Vec<BoundCheck> {
    let slack_term = 2.0 / (log.m_rounds as f64 * mix.gap());
    log.records
        .iter()
        .map(|r| {
            BoundCheck::new("return-floor", r.eta() - slack_term, r.v, format!("t={}", r.t))
        })
        .collect()
}

/// The smoothness-adjusted return bound: measured V̄ dominates
/// `(λ/(1+μ))·Opt − R/((1+μ)T) − 2(1+λ/(1+μ))/(M(1−ê))`. The regret charged
/// includes the certificate's anchor as a comparator, which any sup-regret
/// dominates.
pub fn check_smooth_return(
    log: &EpisodeLog,
    mix: &MixingEstimate,
    cert: &SmoothnessCertificate,
    opt: f64,
    certified_regret: f64,
) -> Result<BoundCheck> {
    let pi2s = log.pi2_sequence();
    let anchor_value = sequence_value(&log.mdp, &cert.anchor_pi1, &pi2s)?;
    let r_used = certified_regret.max(anchor_value - log.learner_value());
    let t = log.t_episodes as f64;
    let m = log.m_rounds as f64;
    let lam = cert.lambda / (1.0 + cert.mu);
    let bound = lam * opt - r_used / ((1.0 + cert.mu) * t) - 2.0 * (1.0 + lam) / (m * mix.gap());
    Ok(BoundCheck::new(
        "smooth-return-floor",
        bound,
        log.v_bar(),
        format!("lambda={}, mu={}, opt={opt}, regret charged {r_used}", cert.lambda, cert.mu),
    ))
}

/// Cumulative deviation drift across consecutive episodes under a fixed
/// agent-1 policy, truncated at the first M* with tail allowance below
/// 1e−9 (the allowance is added to the measured side, keeping a pass
/// conclusive), plus the per-episode stationary shift from the opponent
/// alone.
pub fn check_cumulative_drift(
    mdp: &Mdp,
    p1: &Policy,
    pi2s: &[Policy],
    mix: &MixingEstimate,
    i2: f64,
) -> Result<Vec<BoundCheck>> {
    let gap = mix.gap();
    let e_hat = mix.contraction;
    let m_star = {
        let mut m = 1usize;
        while 4.0 * e_hat.powi(m as i32) / gap > 1e-9 && m < 5000 {
            m += 1;
        }
        m
    };
    let tail = 4.0 * e_hat.powi(m_star as i32) / gap;
    let mut out = Vec::new();
    let mut prev: Option<(crate::mdp::InducedKernel, Vec<f64>)> = None;
    for (idx, p2) in pi2s.iter().enumerate() {
        let kernel = induce_kernel(mdp, p1, p2)?;
        let stat = stationary_from(&kernel, &uniform(mdp.n_states))?.dist;
        if let Some((prev_kernel, prev_stat)) = &prev {
            let rho2_step = op_inf_diff(&p2.probs, &pi2s[idx - 1].probs);
            out.push(BoundCheck::new(
                "stationary-shift-opponent",
                l1_diff(&stat, prev_stat),
                i2 * rho2_step / gap,
                format!("t={}", idx + 1),
            ));
            let mut d_cur = mdp.d1.clone();
            let mut d_prev = mdp.d1.clone();
            let mut total = 0.0;
            for _ in 0..m_star {
                let dev: f64 = d_cur
                    .iter()
                    .zip(&stat)
                    .zip(d_prev.iter().zip(prev_stat))
                    .map(|((a, b), (c, d))| ((a - b) - (c - d)).abs())
                    .sum();
                total += dev;
                d_cur = evolve_distribution(&kernel, &d_cur, 2);
                d_prev = evolve_distribution(prev_kernel, &d_prev, 2);
            }
            out.push(BoundCheck::new(
                "cumulative-drift",
                total + tail,
                3.0 * i2 * rho2_step / (gap * gap),
                format!("t={}, truncated at {m_star} rounds", idx + 1),
            ));
        }
        prev = Some((kernel, stat));
    }
    Ok(out)
}

/// Least-squares slope of `ln regret` against `ln T`, checked against a
/// cap. Non-positive regrets clamp to 1e−12 before the log.
pub fn check_rate(points: &[(f64, f64)], slope_cap: f64, context: String) -> (f64, BoundCheck) {
    assert!(points.len() >= 2, "need at least two sweep points");
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, r)| r.max(1e-12).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = cov / var;
    (slope, BoundCheck::new("rate-exponent", slope, slope_cap, context))
}

// ---------------------------------------------------------------------------
// The default suite
// ---------------------------------------------------------------------------

/// Configuration of [`run_default_suite`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Random instances in the battery.
    pub instances: usize,
    pub seed: u64,
    /// Pass tolerance on the slack; the default is [`SLACK_TOL`]. Raising
    /// it is the CLI's failure-injection hook.
    pub slack_tolerance: f64,
    /// Episodes in each logged run.
    pub run_t: usize,
    /// Window length of the logged runs.
    pub run_gamma: usize,
    pub m_rounds: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            instances: 50,
            seed: 1,
            slack_tolerance: SLACK_TOL,
            run_t: 500,
            run_gamma: 32,
            m_rounds: 100,
        }
    }
}

fn instance_checks(
    mdp: &Mdp,
    mix: &MixingEstimate,
    rng: &mut impl Rng,
    context: &str,
) -> Result<Vec<BoundCheck>> {
    let (ns, na1, na2) = (mdp.n_states, mdp.n_a1, mdp.n_a2);
    let mut checks = Vec::new();
    for pair in 0..3 {
        let p1 = gen::random_policy(rng, AgentRole::Agent1, ns, na1);
        let p1_alt = gen::random_policy(rng, AgentRole::Agent1, ns, na1);
        let p2 = gen::random_policy(rng, AgentRole::Agent2, ns, na2);
        checks.push(check_eta_q_identity(
            mdp,
            &p1,
            &p1_alt,
            &p2,
            format!("{context}, pair {pair}"),
        )?);
    }
    let p1 = gen::random_policy(rng, AgentRole::Agent1, ns, na1);
    let p2 = gen::random_policy(rng, AgentRole::Agent2, ns, na2);
    checks.extend(check_q_bound(mdp, &p1, &p2, mix, context.to_string())?);
    checks.extend(check_dist_convergence(mdp, &p1, &p2, mix, 20, context.to_string())?);
    checks.extend(generic_bound_checks(mdp, rng, context.to_string())?);

    // On the state-only-reward variant (same transitions, so the same ê and
    // influence), a unilateral opponent change moves η by at most
    // I2·Δ_{π2}/(1−ê).
    let mut flat = mdp.clone();
    for per_a1 in &mut flat.reward {
        let r = per_a1[0][0];
        for per_a2 in per_a1 {
            per_a2.iter_mut().for_each(|x| *x = r);
        }
    }
    let i2 = influence(&flat, AgentRole::Agent2);
    let (_, d2) = crate::harness::diameters(&flat);
    let p2b = gen::random_policy(rng, AgentRole::Agent2, ns, na2);
    let lhs = (crate::chain::average_reward(&flat, &p1, &p2)?
        - crate::chain::average_reward(&flat, &p1, &p2b)?)
    .abs();
    checks.push(BoundCheck::new(
        "eta-shift-influence",
        lhs,
        i2 * d2 / mix.gap(),
        format!("{context}, state-only reward variant"),
    ));
    Ok(checks)
}

fn logged_run_checks(mdp: &Mdp, algorithm: Algorithm, cfg: &SuiteConfig) -> Result<Vec<BoundCheck>> {
    let mix = mixing_estimate(mdp)?;
    let i2 = influence(mdp, AgentRole::Agent2);
    let learner = LearnerConfig::new(algorithm, cfg.run_gamma, None)?;
    let (start, end) = gen::drift_endpoints(mdp);
    let opponent = OpponentSpec::Drift { start, end, alpha: 1.0, scale: 1.0 };
    let log = run(
        mdp,
        &learner,
        &opponent,
        cfg.run_t,
        cfg.m_rounds,
        cfg.seed,
        &RunOptions { log_weights: matches!(algorithm, Algorithm::ExpDrBias) },
    )?;

    let mut checks = Vec::new();
    checks.extend(check_stat_dist_step(&log, &mix, i2)?);
    checks.extend(check_qdiff_bounds(&log, &mix, i2)?);
    checks.extend(check_ratio_constant(&log, &mix, i2));
    checks.extend(check_weight_stability(&log, &mix));
    checks.extend(check_return_bound(&log, &mix));
    match algorithm {
        Algorithm::ExpDrBias => checks.extend(check_rvu(&log, 100, cfg.seed)),
        Algorithm::ExpRestart => checks.extend(check_rvu_restart(&log, 100, cfg.seed)),
    }

    let comparator = best_fixed_comparator(mdp, &log.pi2_sequence())?;
    let certified_regret = comparator.value - log.learner_value();
    checks.push(check_regret_bound(&log, &mix, i2, certified_regret));

    let cert = smoothness_certificate(mdp, 3)?;
    let opt = opt_value(mdp, cfg.m_rounds)?;
    checks.push(check_smooth_return(&log, &mix, &cert, opt, certified_regret)?);

    let fixed_p1 = Policy::uniform(AgentRole::Agent1, mdp.n_states, mdp.n_a1);
    checks.extend(check_cumulative_drift(mdp, &fixed_p1, &log.pi2_sequence(), &mix, i2)?);
    Ok(checks)
}

/// The full battery: `instances` random mixing MDPs put through the
/// instance-level checks, then one logged run per algorithm on the pinned
/// instance put through the run-level checks.
pub fn run_default_suite(cfg: &SuiteConfig) -> Result<Vec<BoundCheck>> {
    let mut checks = Vec::new();
    for i in 0..cfg.instances {
        let mut rng = derive_rng(cfg.seed, "battery", i as u64);
        let ns = rng.gen_range(2..=5);
        let na1 = rng.gen_range(2..=3);
        let na2 = rng.gen_range(2..=3);
        let mdp = gen::random_mixing_mdp(&mut rng, ns, na1, na2, 0.1);
        let mix = mixing_estimate(&mdp)?;
        checks.extend(instance_checks(
            &mdp,
            &mix,
            &mut rng,
            &format!("instance {i} ({ns} states, {na1}x{na2} actions)"),
        )?);
    }
    let mdp = gen::fixed_instance();
    checks.extend(logged_run_checks(&mdp, Algorithm::ExpDrBias, cfg)?);
    checks.extend(logged_run_checks(&mdp, Algorithm::ExpRestart, cfg)?);
    if cfg.slack_tolerance != SLACK_TOL {
        for c in &mut checks {
            c.apply_tolerance(cfg.slack_tolerance);
        }
    }
    Ok(checks)
}

/// Convenience view: (passed, failed) counts.
pub fn tally(checks: &[BoundCheck]) -> (usize, usize) {
    let passed = checks.iter().filter(|c| c.pass).count();
    (passed, checks.len() - passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Everything derives from a QTable with known context, so build small
    /// real runs rather than mocks.
    fn small_suite() -> SuiteConfig {
        SuiteConfig { instances: 4, seed: 7, run_t: 40, run_gamma: 8, m_rounds: 25, ..Default::default() }
    }

    #[test]
    fn small_battery_passes_everything() {
        let checks = run_default_suite(&small_suite()).unwrap();
        let failures: Vec<&BoundCheck> = checks.iter().filter(|c| !c.pass).collect();
        assert!(
            failures.is_empty(),
            "{} failing checks, first: {:?}",
            failures.len(),
            failures.first()
        );
        // The suite exercises every named family at least once.
        for family in [
            "eta-q-identity",
            "q-table-bound",
            "dist-convergence",
            "dobrushin-contraction",
            "stationary-step",
            "qdiff-table",
            "weight-stability",
            "rvu-window",
            "rvu-segment",
            "regret-bound-drbias",
            "regret-bound-restart",
            "return-floor",
            "smooth-return-floor",
            "cumulative-drift",
        ] {
            assert!(checks.iter().any(|c| c.name == family), "missing family {family}");
        }
    }

    #[test]
    fn tolerance_hook_forces_failures() {
        let cfg = SuiteConfig { slack_tolerance: 1e9, ..small_suite() };
        let checks = run_default_suite(&cfg).unwrap();
        let (_, failed) = tally(&checks);
        assert!(failed > 0);
    }

    #[test]
    fn rate_fit_recovers_power_laws() {
        let points: Vec<(f64, f64)> =
            [250.0, 500.0, 1000.0, 2000.0].iter().map(|&t: &f64| (t, 3.0 * t.powf(0.4))).collect();
        let (slope, check) = check_rate(&points, 0.5, "synthetic".into());
        assert!((slope - 0.4).abs() < 1e-9);
        assert!(check.pass);
        let (_, check) = check_rate(&points, 0.3, "synthetic".into());
        assert!(!check.pass);
    }

    #[test]
    fn bound_check_slack_sign_convention() {
        let ok = BoundCheck::new("x", 1.0, 2.0, String::new());
        assert!(ok.pass && ok.slack == 1.0);
        let bad = BoundCheck::new("x", 2.0, 1.0, String::new());
        assert!(!bad.pass);
        let borderline = BoundCheck::new("x", 1.0 + 5e-9, 1.0, String::new());
        assert!(borderline.pass, "violations inside 1e-8 are float drift");
    }
}
