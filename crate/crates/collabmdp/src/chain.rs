//! Induced-chain analysis: stationary distributions, Dobrushin coefficients,
//! the uniform mixing estimate, average rewards and finite-round returns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::mdp::{induce_kernel, induce_reward_matrix, row_dot, InducedKernel, Mdp, Policy};
use crate::norms::l1_diff;
use crate::{AgentRole, Error, Result};

/// Power-iteration residual target; the fallback solve accepts up to
/// [`RESIDUAL_ACCEPT`]. The gap separates float drift from genuine
/// non-convergence.
const POWER_TARGET: f64 = 1e-12;
const RESIDUAL_ACCEPT: f64 = 1e-10;
const POWER_ITER_CAP: usize = 1_000_000;
/// ω substituted when the contraction estimate is exactly 0, keeping
/// `1/(1-e^{-1/ω})` finite in bound formulas. Conservative.
const OMEGA_FLOOR: f64 = 1e-9;
/// A contraction estimate this close to 1 is treated as non-mixing.
const MIXING_MARGIN: f64 = 1e-9;

/// A stationary distribution together with its fixed-point residual
/// `‖dP − d‖₁`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryDist {
    pub dist: Vec<f64>,
    pub residual: f64,
}

fn step(kernel: &InducedKernel, d: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (s, row) in kernel.rows.iter().enumerate() {
        let w = d[s];
        if w == 0.0 {
            continue;
        }
        for (sp, p) in row.iter().enumerate() {
            out[sp] += w * p;
        }
    }
}

/// Power iteration from the uniform distribution.
pub fn stationary_distribution(kernel: &InducedKernel) -> Result<StationaryDist> {
    stationary_from(kernel, &crate::simplex::uniform(kernel.n_states()))
}

/// Power iteration from a caller-supplied start, falling back to a direct
/// linear solve when iteration stalls. Warm starts make repeated solves for
/// nearby policy pairs cheap.
pub fn stationary_from(kernel: &InducedKernel, start: &[f64]) -> Result<StationaryDist> {
    let n = kernel.n_states();
    if start.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "start distribution has {} entries, kernel has {n} states",
            start.len()
        )));
    }
    let mut d = start.to_vec();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut checkpoint = f64::INFINITY;
    let mut iters = 0;
    while iters < POWER_ITER_CAP {
        step(kernel, &d, &mut next);
        residual = l1_diff(&next, &d);
        std::mem::swap(&mut d, &mut next);
        iters += 1;
        if residual <= POWER_TARGET {
            return Ok(StationaryDist { dist: d, residual });
        }
        // Stalled chains (contraction numerically at 1) go to the solver.
        if iters % 1024 == 0 {
            if residual > 0.5 * checkpoint {
                break;
            }
            checkpoint = residual;
        }
    }
    match solve_stationary(kernel) {
        Ok(sd) if sd.residual <= RESIDUAL_ACCEPT => Ok(sd),
        _ if residual <= RESIDUAL_ACCEPT => Ok(StationaryDist { dist: d, residual }),
        Ok(sd) => Err(Error::NoConvergence {
            target: RESIDUAL_ACCEPT,
            achieved: sd.residual.min(residual),
        }),
        Err(e) => Err(e),
    }
}

/// Direct route: least-squares solve of `(Pᵀ − I) x = 0` with a
/// normalization row appended.
fn solve_stationary(kernel: &InducedKernel) -> Result<StationaryDist> {
    let n = kernel.n_states();
    let mut a = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            // row i of (Pᵀ − I): coefficient of x_j is P(j,i) − δ_ij
            a[(i, j)] = kernel.rows[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n, j)] = 1.0;
    }
    let mut b = DVector::zeros(n + 1);
    b[n] = 1.0;
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|_| Error::SingularSystem { residual: f64::INFINITY })?;
    let mut dist: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let z: f64 = dist.iter().sum();
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::SingularSystem { residual: f64::INFINITY });
    }
    for v in &mut dist {
        *v /= z;
    }
    let mut out = vec![0.0; n];
    step(kernel, &dist, &mut out);
    let residual = l1_diff(&out, &dist);
    Ok(StationaryDist { dist, residual })
}

/// Dobrushin coefficient `δ(P) = ½ max_{i,j} ‖P(i,·) − P(j,·)‖₁`: the exact
/// ℓ1 contraction constant of a row-stochastic matrix.
pub fn dobrushin(kernel: &InducedKernel) -> f64 {
    let n = kernel.n_states();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max(l1_diff(&kernel.rows[i], &kernel.rows[j]));
        }
    }
    0.5 * worst
}

/// Uniform contraction estimate `ê` over all policy pairs, with the mixing
/// time `ω = −1/ln ê` it implies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingEstimate {
    /// Estimate of `e^{-1/ω}`: the worst Dobrushin coefficient over all
    /// deterministic joint policies.
    pub contraction: f64,
    pub omega: f64,
    /// Which policy set the estimate was maximized over.
    pub certified_over: String,
}

impl MixingEstimate {
    /// `1 − ê`, the quantity every bound formula divides by.
    pub fn gap(&self) -> f64 {
        1.0 - self.contraction
    }
}

/// Worst-case Dobrushin coefficient over every deterministic policy pair.
///
/// δ of an induced kernel is convex in each policy argument (a max of norms
/// of affine maps), so the max over the product of policy polytopes is
/// attained at deterministic vertices. Row i of a vertex kernel depends only
/// on the actions chosen at state i, so the vertex maximum decomposes into a
/// per-state-pair enumeration and stays cheap at any |S|, |A| the crate
/// targets, while being equal to the full `|A1|^|S|·|A2|^|S|` enumeration.
pub fn mixing_estimate(mdp: &Mdp) -> Result<MixingEstimate> {
    let (ns, na1, na2) = (mdp.n_states, mdp.n_a1, mdp.n_a2);
    let mut worst = 0.0;
    let mut arg: Option<(usize, usize, usize, usize, usize, usize)> = None;
    for i in 0..ns {
        for j in (i + 1)..ns {
            for a1i in 0..na1 {
                for a2i in 0..na2 {
                    for a1j in 0..na1 {
                        for a2j in 0..na2 {
                            let d =
                                0.5 * l1_diff(&mdp.trans[i][a1i][a2i], &mdp.trans[j][a1j][a2j]);
                            if d > worst {
                                worst = d;
                                arg = Some((i, j, a1i, a2i, a1j, a2j));
                            }
                        }
                    }
                }
            }
        }
    }
    if worst >= 1.0 - MIXING_MARGIN {
        let (i, j, a1i, a2i, a1j, a2j) = arg.expect("worst > 0 implies a witness");
        let mut acts1 = vec![0usize; ns];
        let mut acts2 = vec![0usize; ns];
        acts1[i] = a1i;
        acts1[j] = a1j;
        acts2[i] = a2i;
        acts2[j] = a2j;
        return Err(Error::NonMixing {
            contraction: worst,
            pair: Box::new((
                Policy::deterministic(AgentRole::Agent1, &acts1, na1),
                Policy::deterministic(AgentRole::Agent2, &acts2, na2),
            )),
        });
    }
    let omega = if worst <= 0.0 { OMEGA_FLOOR } else { -1.0 / worst.ln() };
    let count = (na1 as f64 * na2 as f64).powi(ns as i32);
    Ok(MixingEstimate {
        contraction: worst,
        omega,
        certified_over: format!(
            "{count:.0} deterministic joint policies, maximized per state pair"
        ),
    })
}

/// Average reward `η = d_{π1,π2} · ⟨π1, r_{π2}⟩` of a stationary policy pair.
pub fn average_reward(mdp: &Mdp, p1: &Policy, p2: &Policy) -> Result<f64> {
    let kernel = induce_kernel(mdp, p1, p2)?;
    let sd = stationary_distribution(&kernel)?;
    let r = induce_reward_matrix(mdp, p2)?;
    let g = row_dot(p1, &r.values);
    Ok(sd.dist.iter().zip(&g).map(|(d, v)| d * v).sum())
}

/// State distribution after `m` rounds: `d_start · P^{m−1}`.
pub fn evolve_distribution(kernel: &InducedKernel, d_start: &[f64], m: usize) -> Vec<f64> {
    assert!(m >= 1, "rounds are 1-based");
    let mut d = d_start.to_vec();
    let mut next = vec![0.0; d.len()];
    for _ in 1..m {
        step(kernel, &d, &mut next);
        std::mem::swap(&mut d, &mut next);
    }
    d
}

/// Exact `M`-round return `V = (1/M) Σ_m d_{m} · ⟨π1, r⟩` by distribution
/// propagation from `d1`; no sampling.
pub fn finite_return(mdp: &Mdp, p1: &Policy, p2: &Policy, m_rounds: usize) -> Result<f64> {
    if m_rounds == 0 {
        return Err(Error::InvalidInput("m_rounds must be >= 1".into()));
    }
    let kernel = induce_kernel(mdp, p1, p2)?;
    let r = induce_reward_matrix(mdp, p2)?;
    let g = row_dot(p1, &r.values);
    let mut d = mdp.d1.clone();
    let mut next = vec![0.0; d.len()];
    let mut acc: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
    for _ in 1..m_rounds {
        step(&kernel, &d, &mut next);
        std::mem::swap(&mut d, &mut next);
        acc += d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(acc / m_rounds as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::deterministic_policies;
    use crate::seeding::derive_rng;
    use crate::simplex::dirichlet_ones;
    use crate::verifier::gen::{random_mixing_mdp, random_policy};
    use rand::Rng;

    fn kernel(rows: Vec<Vec<f64>>) -> InducedKernel {
        InducedKernel { rows }
    }

    #[test]
    fn symmetric_two_state_chain() {
        let k = kernel(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let sd = stationary_distribution(&k).unwrap();
        assert!((sd.dist[0] - 0.5).abs() < 1e-10);
        assert!(sd.residual <= RESIDUAL_ACCEPT);
    }

    #[test]
    fn identical_rows_absorb_in_one_step() {
        let rho = vec![0.2, 0.3, 0.5];
        let k = kernel(vec![rho.clone(); 3]);
        let sd = stationary_distribution(&k).unwrap();
        assert!(l1_diff(&sd.dist, &rho) < 1e-12);
        assert_eq!(dobrushin(&k), 0.0);
        // Identical rows: any start lands on the row after one application.
        let d2 = evolve_distribution(&k, &[1.0, 0.0, 0.0], 2);
        assert!(l1_diff(&d2, &rho) < 1e-15);
    }

    #[test]
    fn stationary_matches_linear_solve_oracle() {
        let mut rng = derive_rng(3, "chain-oracle", 0);
        for case in 0..20 {
            let n = 4;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let d = dirichlet_ones(&mut rng, n);
                    // smooth toward uniform so the chain is aperiodic
                    d.iter().map(|x| 0.9 * x + 0.1 / n as f64).collect()
                })
                .collect();
            let k = kernel(rows);
            let sd = stationary_distribution(&k).unwrap();
            let oracle = solve_stationary(&k).unwrap();
            assert!(
                l1_diff(&sd.dist, &oracle.dist) < 1e-8,
                "case {case}: power iteration and eigen-solve disagree"
            );
        }
    }

    #[test]
    fn dobrushin_trivia_and_contraction() {
        assert_eq!(dobrushin(&kernel(vec![vec![1.0, 0.0], vec![0.0, 1.0]])), 1.0);
        let mut rng = derive_rng(5, "chain-dobrushin", 0);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| dirichlet_ones(&mut rng, 4)).collect();
        let k = kernel(rows);
        let delta = dobrushin(&k);
        // Certify the contraction property on random signed pairs: the sup
        // over (d − d') is attained on the (e_i − e_j) pairs, so every random
        // pair must contract at least as well.
        for _ in 0..1000 {
            let a = dirichlet_ones(&mut rng, 4);
            let b = dirichlet_ones(&mut rng, 4);
            let va = evolve_distribution(&k, &a, 2);
            let vb = evolve_distribution(&k, &b, 2);
            assert!(l1_diff(&va, &vb) <= delta * l1_diff(&a, &b) + 1e-12);
        }
        // And the bound is attained on the vertex pair enumeration.
        let mut attained: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                attained = attained.max(0.5 * l1_diff(&k.rows[i], &k.rows[j]));
            }
        }
        assert!((attained - delta).abs() < 1e-15);
    }

    #[test]
    fn mixing_estimate_matches_exhaustive_enumeration() {
        let mut rng = derive_rng(7, "chain-mixing", 0);
        for _ in 0..10 {
            let mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.2);
            let est = mixing_estimate(&mdp).unwrap();
            let mut worst: f64 = 0.0;
            for p1 in deterministic_policies(AgentRole::Agent1, 3, 2) {
                for p2 in deterministic_policies(AgentRole::Agent2, 3, 2) {
                    let k = induce_kernel(&mdp, &p1, &p2).unwrap();
                    worst = worst.max(dobrushin(&k));
                }
            }
            assert!((est.contraction - worst).abs() < 1e-12);
            assert!(est.omega > 0.0);
        }
    }

    #[test]
    fn mixing_estimate_rejects_deterministic_two_cycle() {
        // One joint action swaps the two states deterministically.
        let trans = vec![
            vec![vec![vec![0.0, 1.0], vec![0.5, 0.5]]],
            vec![vec![vec![1.0, 0.0], vec![0.5, 0.5]]],
        ];
        let reward = vec![vec![vec![0.0, 0.0]]; 2];
        let mdp = Mdp::new(trans, reward, vec![1.0, 0.0]).unwrap();
        match mixing_estimate(&mdp) {
            Err(Error::NonMixing { contraction, pair }) => {
                assert!((contraction - 1.0).abs() < 1e-12);
                // The offending pair reproduces the 2-cycle.
                let k = induce_kernel(&mdp, &pair.0, &pair.1).unwrap();
                assert!((dobrushin(&k) - 1.0).abs() < 1e-12);
            }
            other => panic!("expected NonMixing, got {other:?}"),
        }
    }

    #[test]
    fn mixing_estimate_zero_when_rows_identical_everywhere() {
        let rho = vec![0.25, 0.75];
        let trans = vec![vec![vec![rho.clone(), rho.clone()]; 1]; 2];
        let reward = vec![vec![vec![0.5, 0.5]]; 2];
        let mdp = Mdp::new(trans, reward, vec![0.5, 0.5]).unwrap();
        let est = mixing_estimate(&mdp).unwrap();
        assert_eq!(est.contraction, 0.0);
        assert_eq!(est.omega, OMEGA_FLOOR);
    }

    #[test]
    fn single_state_average_reward() {
        // One state, two agent-1 actions, r = [1, 0].
        let trans = vec![vec![vec![vec![1.0]], vec![vec![1.0]]]];
        let reward = vec![vec![vec![1.0], vec![0.0]]];
        let mdp = Mdp::new(trans, reward, vec![1.0]).unwrap();
        let p1 = Policy::uniform(AgentRole::Agent1, 1, 2);
        let p2 = Policy::uniform(AgentRole::Agent2, 1, 1);
        assert!((average_reward(&mdp, &p1, &p2).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_reward_gives_constant_eta_and_return() {
        let mut rng = derive_rng(9, "chain-const", 0);
        let mut mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.1);
        for per_a1 in &mut mdp.reward {
            for per_a2 in per_a1 {
                for r in per_a2 {
                    *r = 0.7;
                }
            }
        }
        let p1 = random_policy(&mut rng, AgentRole::Agent1, 3, 2);
        let p2 = random_policy(&mut rng, AgentRole::Agent2, 3, 2);
        assert!((average_reward(&mdp, &p1, &p2).unwrap() - 0.7).abs() < 1e-10);
        for m in [1, 7, 50] {
            assert!((finite_return(&mdp, &p1, &p2, m).unwrap() - 0.7).abs() < 1e-12);
        }
    }

    fn sample<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
        let mut u: f64 = rng.gen();
        for (i, &p) in probs.iter().enumerate() {
            u -= p;
            if u <= 0.0 {
                return i;
            }
        }
        probs.len() - 1
    }

    #[test]
    fn average_reward_matches_monte_carlo() {
        let mut rng = derive_rng(13, "chain-mc-eta", 0);
        let mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.1);
        let p1 = random_policy(&mut rng, AgentRole::Agent1, 3, 2);
        let p2 = random_policy(&mut rng, AgentRole::Agent2, 3, 2);
        let eta = average_reward(&mdp, &p1, &p2).unwrap();

        let mut s = sample(&mut rng, &mdp.d1);
        let batches = 100;
        let batch_len = 10_000;
        let mut means = Vec::with_capacity(batches);
        for _ in 0..batches {
            let mut acc = 0.0;
            for _ in 0..batch_len {
                let a1 = sample(&mut rng, p1.row(s));
                let a2 = sample(&mut rng, p2.row(s));
                acc += mdp.reward[s][a1][a2];
                s = sample(&mut rng, &mdp.trans[s][a1][a2]);
            }
            means.push(acc / batch_len as f64);
        }
        let mean: f64 = means.iter().sum::<f64>() / batches as f64;
        let var: f64 =
            means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let sigma = (var / batches as f64).sqrt();
        assert!(
            (eta - mean).abs() <= 3.0 * sigma + 1e-4,
            "eta {eta} vs MC {mean} (sigma {sigma})"
        );
    }

    #[test]
    fn finite_return_matches_monte_carlo() {
        let mut rng = derive_rng(17, "chain-mc-v", 0);
        let mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.1);
        let p1 = random_policy(&mut rng, AgentRole::Agent1, 3, 2);
        let p2 = random_policy(&mut rng, AgentRole::Agent2, 3, 2);
        let m_rounds = 50;
        let v = finite_return(&mdp, &p1, &p2, m_rounds).unwrap();

        let trials = 100_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..trials {
            let mut s = sample(&mut rng, &mdp.d1);
            let mut ret = 0.0;
            for _ in 0..m_rounds {
                let a1 = sample(&mut rng, p1.row(s));
                let a2 = sample(&mut rng, p2.row(s));
                ret += mdp.reward[s][a1][a2];
                s = sample(&mut rng, &mdp.trans[s][a1][a2]);
            }
            let ret = ret / m_rounds as f64;
            acc += ret;
            acc2 += ret * ret;
        }
        let mean = acc / trials as f64;
        let var = (acc2 / trials as f64 - mean * mean).max(0.0);
        let sigma = (var / trials as f64).sqrt();
        assert!(
            (v - mean).abs() <= 3.0 * sigma + 1e-4,
            "V {v} vs MC {mean} (sigma {sigma})"
        );
    }

    #[test]
    fn evolve_trivia_and_naive_oracle() {
        let mut rng = derive_rng(19, "chain-evolve", 0);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| dirichlet_ones(&mut rng, 4)).collect();
        let k = kernel(rows);
        let d0 = dirichlet_ones(&mut rng, 4);
        assert_eq!(evolve_distribution(&k, &d0, 1), d0);
        let mut want = d0.clone();
        for _ in 0..4 {
            let mut next = vec![0.0; 4];
            for (s, row) in k.rows.iter().enumerate() {
                for (sp, p) in row.iter().enumerate() {
                    next[sp] += want[s] * p;
                }
            }
            want = next;
        }
        assert!(l1_diff(&evolve_distribution(&k, &d0, 5), &want) < 1e-14);
    }

    #[test]
    fn finite_return_near_average_reward_for_long_episodes() {
        // |V − η| ≤ 2/(M·(1−ê)) on random instances.
        let mut rng = derive_rng(29, "chain-v-eta", 0);
        for _ in 0..5 {
            let mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.1);
            let p1 = random_policy(&mut rng, AgentRole::Agent1, 3, 2);
            let p2 = random_policy(&mut rng, AgentRole::Agent2, 3, 2);
            let gap = mixing_estimate(&mdp).unwrap().gap();
            let eta = average_reward(&mdp, &p1, &p2).unwrap();
            for m in [1usize, 10, 100] {
                let v = finite_return(&mdp, &p1, &p2, m).unwrap();
                assert!(
                    (v - eta).abs() <= 2.0 / (m as f64 * gap) + 1e-12,
                    "M={m}: |{v} - {eta}| too large"
                );
            }
        }
    }

    #[test]
    fn finite_return_one_round_is_initial_expectation() {
        let mut rng = derive_rng(23, "chain-m1", 0);
        let mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.1);
        let p1 = random_policy(&mut rng, AgentRole::Agent1, 3, 2);
        let p2 = random_policy(&mut rng, AgentRole::Agent2, 3, 2);
        let r = induce_reward_matrix(&mdp, &p2).unwrap();
        let g = row_dot(&p1, &r.values);
        let want: f64 = mdp.d1.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!((finite_return(&mdp, &p1, &p2, 1).unwrap() - want).abs() < 1e-15);
    }
}
