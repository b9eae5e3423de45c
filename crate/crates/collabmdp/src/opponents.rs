//! Agent-2 policy generators with certified per-episode change magnitudes.
//!
//! The interesting regimes: a fixed partner (ρ2 = 0), a drifting partner
//! with `ρ2 = c·T^{−α}` per step, a mirror learner that runs the
//! double-recency-bias algorithm on its own Q-values, and a scripted
//! adversary whose jumps are clamped to a per-step cap.

use serde::{Deserialize, Serialize};

use crate::bias_q::q_values;
use crate::learners::{LearnerConfig, LearnerState};
use crate::mdp::{AgentRole, Mdp, Policy};
use crate::norms::op_inf_diff;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentSpec {
    /// Plays the same policy in every episode.
    Fixed { policy: Policy },
    /// Straight-line interpolation from `start` toward `end`, the per-step
    /// ∞-norm movement clamped to `scale · T^{−alpha}`. A line is the
    /// simplest generator with a certified magnitude; the cap uses the full
    /// horizon T, not the current episode.
    Drift { start: Policy, end: Policy, alpha: f64, scale: f64 },
    /// Agent 2 runs the double-recency-bias learner on its own Q-values,
    /// computed with the action axes swapped.
    MirrorLearner { config: LearnerConfig },
    /// Follows a per-episode schedule of target policies, each step clamped
    /// to `cap` in the ∞-norm.
    SegmentAdversary { schedule: Vec<Policy>, cap: f64 },
}

impl OpponentSpec {
    fn check(&self, mdp: &Mdp) -> Result<()> {
        let dims_ok = |p: &Policy| -> Result<()> {
            if p.n_states() != mdp.n_states || p.n_actions() != mdp.n_a2 {
                return Err(Error::DimensionMismatch(format!(
                    "opponent policy is {}x{}, MDP wants {}x{}",
                    p.n_states(),
                    p.n_actions(),
                    mdp.n_states,
                    mdp.n_a2
                )));
            }
            Policy::new(AgentRole::Agent2, p.probs.clone()).map(|_| ())
        };
        match self {
            OpponentSpec::Fixed { policy } => dims_ok(policy),
            OpponentSpec::Drift { start, end, alpha, scale } => {
                dims_ok(start)?;
                dims_ok(end)?;
                if *alpha < 0.0 {
                    return Err(Error::InvalidInput(format!("alpha must be >= 0, got {alpha}")));
                }
                if *scale <= 0.0 || scale.is_nan() {
                    return Err(Error::InvalidInput(format!("scale must be > 0, got {scale}")));
                }
                Ok(())
            }
            OpponentSpec::MirrorLearner { config } => config.check(),
            OpponentSpec::SegmentAdversary { schedule, cap } => {
                if schedule.is_empty() {
                    return Err(Error::InvalidInput("empty adversary schedule".into()));
                }
                if *cap <= 0.0 || cap.is_nan() {
                    return Err(Error::InvalidInput(format!("cap must be > 0, got {cap}")));
                }
                schedule.iter().try_for_each(dims_ok)
            }
        }
    }
}

/// Mirror learner internals: the same game with the action axes swapped, so
/// agent 2 can reuse the Q-value machinery as "player 1".
#[derive(Debug, Clone)]
struct MirrorState {
    swapped: Mdp,
    learner: LearnerState,
}

fn swap_axes(mdp: &Mdp) -> Mdp {
    let mut trans = vec![vec![vec![vec![0.0; mdp.n_states]; mdp.n_a1]; mdp.n_a2]; mdp.n_states];
    let mut reward = vec![vec![vec![0.0; mdp.n_a1]; mdp.n_a2]; mdp.n_states];
    for s in 0..mdp.n_states {
        for a1 in 0..mdp.n_a1 {
            for a2 in 0..mdp.n_a2 {
                trans[s][a2][a1] = mdp.trans[s][a1][a2].clone();
                reward[s][a2][a1] = mdp.reward[s][a1][a2];
            }
        }
    }
    Mdp {
        n_states: mdp.n_states,
        n_a1: mdp.n_a2,
        n_a2: mdp.n_a1,
        trans,
        reward,
        d1: mdp.d1.clone(),
    }
}

/// Live opponent: current policy, episode counter, and the running maximum
/// step magnitude (always recomputable from the emitted sequence).
#[derive(Debug, Clone)]
pub struct Opponent {
    spec: OpponentSpec,
    current: Policy,
    /// Episodes already committed.
    episode: usize,
    rho2_hat: f64,
    horizon: usize,
    mirror: Option<MirrorState>,
}

impl Opponent {
    pub fn new(spec: OpponentSpec, mdp: &Mdp, horizon: usize) -> Result<Self> {
        spec.check(mdp)?;
        let (current, mirror) = match &spec {
            OpponentSpec::Fixed { policy } => (policy.clone(), None),
            OpponentSpec::Drift { start, .. } => (start.clone(), None),
            OpponentSpec::SegmentAdversary { schedule, .. } => (schedule[0].clone(), None),
            OpponentSpec::MirrorLearner { config } => {
                let learner = LearnerState::new(config.clone(), mdp.n_states, mdp.n_a2)?;
                let first = learner.step()?.policy.reroled(AgentRole::Agent2);
                (first, Some(MirrorState { swapped: swap_axes(mdp), learner }))
            }
        };
        Ok(Opponent { spec, current, episode: 1, rho2_hat: 0.0, horizon, mirror })
    }

    /// The policy committed for the current episode.
    pub fn current(&self) -> &Policy {
        &self.current
    }

    /// Largest step observed so far.
    pub fn rho2_hat(&self) -> f64 {
        self.rho2_hat
    }

    fn clamp_toward(current: &Policy, target: &Policy, cap: f64) -> Policy {
        let norm = op_inf_diff(&current.probs, &target.probs);
        if norm <= cap {
            return target.clone();
        }
        let lambda = cap / norm;
        let probs = current
            .probs
            .iter()
            .zip(&target.probs)
            .map(|(c, t)| c.iter().zip(t).map(|(x, y)| x + lambda * (y - x)).collect())
            .collect();
        Policy { role: AgentRole::Agent2, probs }
    }

    /// Produce the policy for the next episode, having observed agent 1's
    /// policy for the one that just ended. Fixed and drift opponents are
    /// oblivious; the mirror learner is adaptive through last episode's
    /// Q-values, matching the full-information protocol.
    pub fn advance(&mut self, observed_pi1: &Policy) -> Result<()> {
        let next = match &self.spec {
            OpponentSpec::Fixed { .. } => self.current.clone(),
            OpponentSpec::Drift { end, alpha, scale, .. } => {
                let cap = scale * (self.horizon as f64).powf(-alpha);
                Self::clamp_toward(&self.current, end, cap)
            }
            OpponentSpec::SegmentAdversary { schedule, cap } => {
                let target = schedule
                    .get(self.episode)
                    .ok_or(Error::ScheduleExhausted(self.episode + 1))?;
                Self::clamp_toward(&self.current, target, *cap)
            }
            OpponentSpec::MirrorLearner { .. } => {
                let mirror = self.mirror.as_mut().expect("mirror state exists");
                let q2 = q_values(
                    &mirror.swapped,
                    &self.current.reroled(AgentRole::Agent1),
                    &observed_pi1.reroled(AgentRole::Agent2),
                )?;
                mirror.learner.observe(q2);
                mirror.learner.step()?.policy.reroled(AgentRole::Agent2)
            }
        };
        self.rho2_hat = self.rho2_hat.max(op_inf_diff(&next.probs, &self.current.probs));
        self.current = next;
        self.episode += 1;
        Ok(())
    }
}

/// Exact `max_{t>1} ‖π2_t − π2_{t−1}‖_∞` of a logged sequence.
pub fn measured_rho2(sequence: &[Policy]) -> f64 {
    assert!(sequence.len() >= 2, "need at least two policies");
    sequence
        .windows(2)
        .map(|w| op_inf_diff(&w[0].probs, &w[1].probs))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::mixing_estimate;
    use crate::learners::Algorithm;
    use crate::seeding::derive_rng;
    use crate::verifier::gen::{random_mixing_mdp, random_policy};

    fn emit(opp: &mut Opponent, pi1: &Policy, t: usize) -> Vec<Policy> {
        let mut seq = vec![opp.current().clone()];
        for _ in 1..t {
            opp.advance(pi1).unwrap();
            seq.push(opp.current().clone());
        }
        seq
    }

    #[test]
    fn fixed_opponent_never_moves() {
        let mut rng = derive_rng(53, "opp-fixed", 0);
        let mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.1);
        let policy = random_policy(&mut rng, AgentRole::Agent2, 3, 2);
        let pi1 = random_policy(&mut rng, AgentRole::Agent1, 3, 2);
        let mut opp = Opponent::new(OpponentSpec::Fixed { policy: policy.clone() }, &mdp, 10).unwrap();
        let seq = emit(&mut opp, &pi1, 10);
        assert_eq!(measured_rho2(&seq), 0.0);
        assert_eq!(opp.rho2_hat(), 0.0);
        assert_eq!(seq[9].probs, policy.probs);
    }

    #[test]
    fn drift_steps_are_exactly_the_cap_until_arrival() {
        let mut rng = derive_rng(59, "opp-drift", 0);
        let mdp = random_mixing_mdp(&mut rng, 2, 2, 2, 0.1);
        let start = Policy::deterministic(AgentRole::Agent2, &[0, 0], 2);
        let end = Policy::deterministic(AgentRole::Agent2, &[1, 1], 2);
        let pi1 = random_policy(&mut rng, AgentRole::Agent1, 2, 2);
        let t = 100;
        let spec = OpponentSpec::Drift { start, end, alpha: 1.0, scale: 1.0 };
        let mut opp = Opponent::new(spec, &mdp, t).unwrap();
        let seq = emit(&mut opp, &pi1, t);
        for w in seq.windows(2) {
            let step = op_inf_diff(&w[0].probs, &w[1].probs);
            assert!((step - 0.01).abs() < 1e-12, "step {step}");
        }
        assert!(measured_rho2(&seq) <= 1.0 * (t as f64).powf(-1.0) + 1e-12);
        assert!((opp.rho2_hat() - measured_rho2(&seq)).abs() < 1e-15);
    }

    #[test]
    fn drift_with_slack_cap_jumps_to_target() {
        let mut rng = derive_rng(61, "opp-jump", 0);
        let mdp = random_mixing_mdp(&mut rng, 2, 2, 2, 0.1);
        let start = Policy::deterministic(AgentRole::Agent2, &[0, 0], 2);
        let end = Policy::deterministic(AgentRole::Agent2, &[1, 1], 2);
        let pi1 = random_policy(&mut rng, AgentRole::Agent1, 2, 2);
        // alpha = 0, scale = 2: the cap equals the simplex diameter.
        let spec = OpponentSpec::Drift { start, end: end.clone(), alpha: 0.0, scale: 2.0 };
        let mut opp = Opponent::new(spec, &mdp, 50).unwrap();
        opp.advance(&pi1).unwrap();
        assert_eq!(opp.current().probs, end.probs);
    }

    #[test]
    fn oblivious_kinds_ignore_observations() {
        let mut rng = derive_rng(67, "opp-oblivious", 0);
        let mdp = random_mixing_mdp(&mut rng, 2, 2, 2, 0.1);
        let start = random_policy(&mut rng, AgentRole::Agent2, 2, 2);
        let end = random_policy(&mut rng, AgentRole::Agent2, 2, 2);
        let spec = OpponentSpec::Drift { start, end, alpha: 0.5, scale: 1.0 };
        let pi1a = random_policy(&mut rng, AgentRole::Agent1, 2, 2);
        let pi1b = random_policy(&mut rng, AgentRole::Agent1, 2, 2);
        let mut a = Opponent::new(spec.clone(), &mdp, 20).unwrap();
        let mut b = Opponent::new(spec, &mdp, 20).unwrap();
        let seq_a = emit(&mut a, &pi1a, 20);
        let seq_b = emit(&mut b, &pi1b, 20);
        for (x, y) in seq_a.iter().zip(&seq_b) {
            assert_eq!(x.probs, y.probs);
        }
    }

    #[test]
    fn adversary_schedule_exhausts() {
        let mut rng = derive_rng(71, "opp-sched", 0);
        let mdp = random_mixing_mdp(&mut rng, 2, 2, 2, 0.1);
        let schedule: Vec<Policy> =
            (0..3).map(|_| random_policy(&mut rng, AgentRole::Agent2, 2, 2)).collect();
        let pi1 = random_policy(&mut rng, AgentRole::Agent1, 2, 2);
        let spec = OpponentSpec::SegmentAdversary { schedule, cap: 0.25 };
        let mut opp = Opponent::new(spec, &mdp, 10).unwrap();
        opp.advance(&pi1).unwrap();
        opp.advance(&pi1).unwrap();
        match opp.advance(&pi1) {
            Err(Error::ScheduleExhausted(4)) => {}
            other => panic!("expected exhaustion, got {other:?}"),
        }
        assert!(opp.rho2_hat() <= 0.25 + 1e-12);
    }

    #[test]
    fn mirror_learner_inherits_the_gradualness_bound() {
        let mut rng = derive_rng(73, "opp-mirror", 0);
        let mdp = random_mixing_mdp(&mut rng, 3, 2, 2, 0.1);
        let est = mixing_estimate(&mdp).unwrap();
        let gamma = 4;
        let config = LearnerConfig::new(Algorithm::ExpDrBias, gamma, None).unwrap();
        let eps = config.epsilon();
        let spec = OpponentSpec::MirrorLearner { config };
        let mut opp = Opponent::new(spec, &mdp, 30).unwrap();
        let mut seq = vec![opp.current().clone()];
        for _ in 1..30 {
            // the mirror learner reacts to whatever agent 1 plays
            let pi1 = random_policy(&mut rng, AgentRole::Agent1, 3, 2);
            opp.advance(&pi1).unwrap();
            seq.push(opp.current().clone());
        }
        let bound = 2.0_f64.min(9.0 * eps / est.gap() + 2.0 / gamma as f64);
        assert!(
            measured_rho2(&seq) <= bound + 1e-9,
            "rho2 {} vs bound {bound}",
            measured_rho2(&seq)
        );
    }

    #[test]
    fn measured_rho2_matches_naive_double_loop() {
        let mut rng = derive_rng(79, "opp-rho2", 0);
        let seq: Vec<Policy> =
            (0..8).map(|_| random_policy(&mut rng, AgentRole::Agent2, 3, 3)).collect();
        let fast = measured_rho2(&seq);
        let mut slow: f64 = 0.0;
        for t in 1..seq.len() {
            let mut worst: f64 = 0.0;
            for s in 0..3 {
                let mut acc = 0.0;
                for a in 0..3 {
                    acc += (seq[t].probs[s][a] - seq[t - 1].probs[s][a]).abs();
                }
                worst = worst.max(acc);
            }
            slow = slow.max(worst);
        }
        assert_eq!(fast, slow);
        // Two deterministic policies differing in one state sit at distance 2.
        let a = Policy::deterministic(AgentRole::Agent2, &[0, 0], 2);
        let b = Policy::deterministic(AgentRole::Agent2, &[0, 1], 2);
        assert_eq!(measured_rho2(&[a, b]), 2.0);
    }
}
