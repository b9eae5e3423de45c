//! The experiment configuration schema (JSON, versioned).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use collabmdp::learners::Algorithm;
use collabmdp::mdp::{AgentRole, Mdp, Policy};
use collabmdp::opponents::OpponentSpec;
use collabmdp::seeding::derive_rng;
use collabmdp::verifier::{gen, SuiteConfig};
use collabmdp::LearnerConfig;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub mdp: MdpSource,
    #[serde(default)]
    pub learner: Option<LearnerSection>,
    #[serde(default)]
    pub opponent: Option<OpponentSection>,
    #[serde(default = "default_t")]
    pub t_episodes: usize,
    #[serde(default = "default_m")]
    pub m_rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub smoothness: Option<SmoothnessSection>,
}

fn default_t() -> usize {
    100
}

fn default_m() -> usize {
    100
}

impl ExperimentConfig {
    pub fn load(path: &PathBuf) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (this build speaks {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn build_mdp(&self) -> Result<Mdp, CliError> {
        match &self.mdp {
            MdpSource::Inline(mdp) => {
                let report = collabmdp::validate(mdp);
                if report.is_ok() {
                    Ok(mdp.clone())
                } else {
                    Err(CliError::Config(format!(
                        "inline MDP invalid: {}",
                        report.violations.join("; ")
                    )))
                }
            }
            MdpSource::Path(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                Mdp::from_json(&text).map_err(CliError::from)
            }
            MdpSource::Generator(spec) => {
                let mut rng = derive_rng(spec.seed, "mdp-generator", 0);
                Ok(gen::random_mixing_mdp(
                    &mut rng,
                    spec.n_states,
                    spec.n_a1,
                    spec.n_a2,
                    spec.smoothing,
                ))
            }
        }
    }

    pub fn build_learner(&self) -> Result<LearnerConfig, CliError> {
        let section = self
            .learner
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"learner\" section".into()))?;
        LearnerConfig::new(section.algorithm, section.gamma, section.epsilon)
            .map_err(CliError::from)
    }

    pub fn suite_config(&self, seed: u64) -> Result<SuiteConfig, CliError> {
        let mut suite = SuiteConfig { seed, ..Default::default() };
        if let Some(v) = &self.verify {
            if let Some(instances) = v.instances {
                if instances == 0 {
                    return Err(CliError::Config("verify.instances must be >= 1".into()));
                }
                suite.instances = instances;
            }
            if let Some(t) = v.run_t {
                suite.run_t = t;
            }
            if let Some(g) = v.run_gamma {
                suite.run_gamma = g;
            }
            if let Some(m) = v.m_rounds {
                suite.m_rounds = m;
            }
            if let Some(tol) = v.slack_tolerance {
                suite.slack_tolerance = tol;
            }
        }
        Ok(suite)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    Inline(Mdp),
    Path(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_states: usize,
    pub n_a1: usize,
    pub n_a2: usize,
    pub seed: u64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

fn default_smoothing() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerSection {
    pub algorithm: Algorithm,
    pub gamma: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentSection {
    Fixed { policy: Vec<Vec<f64>> },
    Drift { start: Vec<Vec<f64>>, end: Vec<Vec<f64>>, alpha: f64, scale: f64 },
    MirrorLearner { gamma: usize, #[serde(default)] epsilon: Option<f64> },
    SegmentAdversary { schedule: Vec<Vec<Vec<f64>>>, cap: f64 },
}

impl OpponentSection {
    /// Dimensional validation happens when the opponent is instantiated
    /// against the MDP.
    pub fn build(&self) -> Result<OpponentSpec, CliError> {
        let policy = |rows: &Vec<Vec<f64>>| {
            Policy::new(AgentRole::Agent2, rows.clone()).map_err(CliError::from)
        };
        Ok(match self {
            OpponentSection::Fixed { policy: rows } => {
                OpponentSpec::Fixed { policy: policy(rows)? }
            }
            OpponentSection::Drift { start, end, alpha, scale } => OpponentSpec::Drift {
                start: policy(start)?,
                end: policy(end)?,
                alpha: *alpha,
                scale: *scale,
            },
            OpponentSection::MirrorLearner { gamma, epsilon } => OpponentSpec::MirrorLearner {
                config: LearnerConfig::new(Algorithm::ExpDrBias, *gamma, *epsilon)
                    .map_err(CliError::from)?,
            },
            OpponentSection::SegmentAdversary { schedule, cap } => {
                OpponentSpec::SegmentAdversary {
                    schedule: schedule.iter().map(policy).collect::<Result<_, _>>()?,
                    cap: *cap,
                }
            }
        })
    }

    /// Drift opponents expose their exponent for sweep overrides.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, CliError> {
        match self {
            OpponentSection::Drift { start, end, scale, .. } => Ok(OpponentSection::Drift {
                start: start.clone(),
                end: end.clone(),
                alpha,
                scale: *scale,
            }),
            _ => Err(CliError::Config(
                "an alpha axis needs a drift opponent in the base config".into(),
            )),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            OpponentSection::Fixed { .. } => "fixed",
            OpponentSection::Drift { .. } => "drift",
            OpponentSection::MirrorLearner { .. } => "mirror_learner",
            OpponentSection::SegmentAdversary { .. } => "segment_adversary",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    pub t_axis: Vec<usize>,
    #[serde(default)]
    pub gamma_axis: Option<Vec<usize>>,
    #[serde(default)]
    pub epsilon_axis: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha_axis: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifySection {
    #[serde(default)]
    pub instances: Option<usize>,
    #[serde(default)]
    pub run_t: Option<usize>,
    #[serde(default)]
    pub run_gamma: Option<usize>,
    #[serde(default)]
    pub m_rounds: Option<usize>,
    #[serde(default)]
    pub slack_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessSection {
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub p1: Option<f64>,
    #[serde(default)]
    pub p2: Option<f64>,
}
