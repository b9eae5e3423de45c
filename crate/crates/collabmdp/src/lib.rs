//! Two-agent average-reward MDPs with an adaptive partner.
//!
//! Agent 1 knows the MDP and replays it over `T` episodes of `M` rounds;
//! agent 2 commits its own policy each episode and may change it between
//! episodes. This crate provides:
//!
//! * the MDP data model and the induced single-chain objects ([`mdp`]),
//! * stationary distributions, mixing estimates and average rewards ([`chain`]),
//! * average-reward Q-values pinned by a bias normalization ([`bias_q`]),
//! * per-state optimistic FTRL experts ([`oftrl`]) and the two episode-level
//!   learners built on them ([`learners`]),
//! * opponent generators with certified per-episode change magnitudes
//!   ([`opponents`]),
//! * the episodic harness with regret accounting, influence, and smoothness
//!   certificates ([`harness`]),
//! * a named-check suite for every quantitative bound the analysis relies on
//!   ([`verifier`]),
//! * the layered-graph construction that embeds online shortest-path rounds
//!   into this MDP family ([`reduction`]).
//!
//! All operations are deterministic; randomness is injected only through
//! explicit seeds (see [`seeding`]).

pub mod bias_q;
pub mod chain;
pub mod harness;
pub mod learners;
pub mod mdp;
pub mod norms;
pub mod oftrl;
pub mod opponents;
pub mod reduction;
pub mod seeding;
pub mod simplex;
pub mod verifier;

pub use bias_q::{q_policy, q_values, QPolicyVector, QTable};
pub use chain::{
    average_reward, dobrushin, evolve_distribution, finite_return, mixing_estimate,
    stationary_distribution, MixingEstimate, StationaryDist,
};
pub use harness::{
    best_fixed_comparator, diameters, influence, opt_value, regret_report, run,
    smoothness_certificate, EpisodeLog, EpisodeRecord, RegretReport, RunOptions,
    SmoothnessCertificate,
};
pub use learners::{Algorithm, LearnerConfig, LearnerState};
pub use mdp::{
    induce_action_kernel, induce_kernel, induce_reward_matrix, validate, ActionKernel, AgentRole,
    InducedKernel, Mdp, Policy, RewardMatrix1, ValidationReport,
};
pub use opponents::{measured_rho2, Opponent, OpponentSpec};
pub use verifier::BoundCheck;

/// Tolerance for probability constraints on constructed inputs.
pub const PROB_TOL_INPUT: f64 = 1e-12;
/// Tolerance for probability constraints on arithmetic results.
pub const PROB_TOL_ARITH: f64 = 1e-9;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Some deterministic policy pair induces a chain with Dobrushin
    /// coefficient at (or numerically at) 1, so no uniform contraction
    /// factor below 1 exists. Carries the offending pair.
    #[error("no uniform mixing factor: worst deterministic pair has Dobrushin coefficient {contraction}")]
    NonMixing {
        contraction: f64,
        pair: Box<(Policy, Policy)>,
    },

    #[error("stationary solve did not reach residual {target:e} (best achieved {achieved:e})")]
    NoConvergence { target: f64, achieved: f64 },

    #[error("linear system is singular or ill-conditioned (residual {residual:e})")]
    SingularSystem { residual: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("enumeration size {size} exceeds the cap {cap}")]
    ScaleCap { size: u128, cap: u128 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("opponent schedule exhausted at episode {0}")]
    ScheduleExhausted(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
