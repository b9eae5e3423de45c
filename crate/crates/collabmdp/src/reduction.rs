//! Embedding online layered shortest-path rounds into the two-agent MDP.
//!
//! A round is a layered DAG with two nodes per layer, binary edge weights
//! and the promise that every non-terminal node has an outgoing edge. The
//! construction maps nodes to states and encodes each round as an agent-2
//! policy: mass `1 − ρ2` stays put, mass `ρ2` advances along the graph,
//! with the action index carrying both the forced successor and the edge
//! weights. Agent 1's binary action picks the branch exactly when the
//! encoded node has both successors.
//!
//! The checker verifies the embedding empirically: within one round, the
//! ratio of the MDP's average reward to the path value is the same for
//! every positive-value path (the proportionality factor is
//! `ρ2·L/(L+1+ρ2)`, independent of the path).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::average_reward;
use crate::mdp::{AgentRole, Mdp, Policy};
use crate::{Error, Result};

/// Stay-put action index.
const A_STAY: usize = 0;
/// Actions forcing successor `i` with reward `j`.
fn a_dir(i: usize, j: usize) -> usize {
    1 + 2 * i + j
}
/// Actions deferring the branch to agent 1, with reward profile `r`.
fn a_both(r: usize) -> usize {
    5 + r
}
/// Agent 2's action count in every reduced instance.
pub const N_A2: usize = 9;

/// One edge in a band: `from` indexes the node in the source layer, `to`
/// the node in the target layer (0 when the target is the end node).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub weight: u8,
}

/// One round of the layered problem: `edges[l]` is the band from layer `l`
/// into layer `l+1`, with band 0 leaving the start node and band `layers`
/// entering the end node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayeredGraphRound {
    pub layers: usize,
    pub edges: Vec<Vec<EdgeSpec>>,
}

impl LayeredGraphRound {
    /// Outgoing `(to, weight)` pairs of node `from` in band `l`, sorted by
    /// target.
    fn successors(&self, band: usize, from: usize) -> Vec<(usize, u8)> {
        let mut out: Vec<(usize, u8)> = self.edges[band]
            .iter()
            .filter(|e| e.from == from)
            .map(|e| (e.to, e.weight))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.layers;
        if l < 1 {
            return Err(Error::InvalidInput("need at least one layer".into()));
        }
        if self.edges.len() != l + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} edge bands, got {}",
                l + 1,
                self.edges.len()
            )));
        }
        for (band, edges) in self.edges.iter().enumerate() {
            for e in edges {
                let from_ok = if band == 0 { e.from == 0 } else { e.from < 2 };
                let to_ok = if band == l { e.to == 0 } else { e.to < 2 };
                if !from_ok || !to_ok {
                    return Err(Error::InvalidInput(format!(
                        "edge {e:?} out of range in band {band}"
                    )));
                }
                if e.weight > 1 {
                    return Err(Error::InvalidInput(format!("non-binary weight in {e:?}")));
                }
            }
            let froms: &[usize] = if band == 0 { &[0] } else { &[0, 1] };
            for &f in froms {
                let succ = self.successors(band, f);
                if succ.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "node {f} in layer {band} has no outgoing edge"
                    )));
                }
                if succ.len() > 2 || (succ.len() == 2 && succ[0].0 == succ[1].0) {
                    return Err(Error::InvalidInput(format!(
                        "duplicate edges out of node {f} in layer {band}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// State index of node `x` in layer `l` (layer 0 is the start node, layer
/// `layers + 1` the end node).
pub fn state_of(layers: usize, l: usize, x: usize) -> usize {
    if l == 0 {
        0
    } else if l <= layers {
        1 + 2 * (l - 1) + x
    } else {
        2 * layers + 1
    }
}

/// Builds the MDP skeleton for `layers` layers: |S| = 2·layers + 2,
/// |A1| = 2, |A2| = 9, every transition deterministic given the joint
/// action, initial distribution concentrated on the start state.
pub fn build_mdp(layers: usize) -> Mdp {
    assert!(layers >= 1);
    let ns = 2 * layers + 2;
    let end = state_of(layers, layers + 1, 0);
    let mut trans = vec![vec![vec![vec![0.0; ns]; N_A2]; 2]; ns];
    let mut reward = vec![vec![vec![0.0; N_A2]; 2]; ns];

    // Rewards depend only on the actions: the direction actions carry their
    // weight bit, the branch actions pay according to agent 1's pick.
    for s in 0..ns {
        for a1 in 0..2 {
            reward[s][a1][a_dir(0, 1)] = 1.0;
            reward[s][a1][a_dir(1, 1)] = 1.0;
            reward[s][a1][a_both(1)] = if a1 == 0 { 1.0 } else { 0.0 };
            reward[s][a1][a_both(2)] = if a1 == 1 { 1.0 } else { 0.0 };
            reward[s][a1][a_both(3)] = 1.0;
        }
    }

    for l in 0..=layers {
        let sources: &[usize] = if l == 0 { &[0] } else { &[0, 1] };
        for &x in sources {
            let s = state_of(layers, l, x);
            for a1 in 0..2 {
                if l == layers {
                    // Last layer: anything but the stay action leads out.
                    trans[s][a1][A_STAY][s] = 1.0;
                    for a2 in 1..N_A2 {
                        trans[s][a1][a2][end] = 1.0;
                    }
                } else {
                    trans[s][a1][A_STAY][s] = 1.0;
                    for j in 0..2 {
                        trans[s][a1][a_dir(0, j)][state_of(layers, l + 1, 0)] = 1.0;
                        trans[s][a1][a_dir(1, j)][state_of(layers, l + 1, 1)] = 1.0;
                    }
                    for r in 0..4 {
                        trans[s][a1][a_both(r)][state_of(layers, l + 1, a1)] = 1.0;
                    }
                }
            }
        }
    }
    for a1 in 0..2 {
        for a2 in 0..N_A2 {
            trans[end][a1][a2][0] = 1.0;
        }
    }

    let mut d1 = vec![0.0; ns];
    d1[0] = 1.0;
    Mdp::new(trans, reward, d1).expect("construction satisfies the invariants")
}

/// The `ρ2`-mass action encoding each non-end state's local edge structure:
/// single successor `i` with weight `j` becomes the direction action
/// `(i, j)`; two successors become the branch action with the packed
/// reward profile `w(→0) + 2·w(→1)`. The end state keeps the stay action.
pub fn round_actions(g: &LayeredGraphRound) -> Result<Vec<usize>> {
    g.validate()?;
    let layers = g.layers;
    let ns = 2 * layers + 2;
    let mut actions = vec![A_STAY; ns];
    for l in 0..=layers {
        let sources: &[usize] = if l == 0 { &[0] } else { &[0, 1] };
        for &x in sources {
            let succ = g.successors(l, x);
            let s = state_of(layers, l, x);
            actions[s] = if l == layers {
                // Single successor: the end node, weight on its only edge.
                a_dir(0, succ[0].1 as usize)
            } else if succ.len() == 2 {
                a_both(succ[0].1 as usize + 2 * succ[1].1 as usize)
            } else {
                a_dir(succ[0].0, succ[0].1 as usize)
            };
        }
    }
    Ok(actions)
}

/// Encodes one round as agent 2's policy: `1 − ρ2` on the stay action,
/// `ρ2` on the round's action, except the end state which stays with
/// probability one.
pub fn encode_round(g: &LayeredGraphRound, rho2: f64) -> Result<Policy> {
    if rho2.is_nan() || rho2 <= 0.0 || rho2 > 1.0 {
        return Err(Error::InvalidInput(format!("rho2 must be in (0, 1], got {rho2}")));
    }
    let actions = round_actions(g)?;
    let ns = actions.len();
    let end = ns - 1;
    let mut probs = vec![vec![0.0; N_A2]; ns];
    for (s, &a) in actions.iter().enumerate() {
        if s == end {
            probs[s][A_STAY] = 1.0;
        } else {
            probs[s][A_STAY] = 1.0 - rho2;
            probs[s][a] += rho2;
        }
    }
    Policy::new(AgentRole::Agent2, probs)
}

/// A successor map over the graph's nodes: the branch chosen at the start
/// node and at each node of layers `1..layers−1` (the last layer's only
/// successor is the end node).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPolicy {
    pub start: usize,
    /// `mid[l-1][x]` is the successor chosen at node x of layer l.
    pub mid: Vec<[usize; 2]>,
}

/// Encodes a successor map as agent 1's deterministic policy: action 1
/// exactly where the map picks the upper branch; the last layer and the
/// end state act 0 (their actions affect nothing).
pub fn encode_path_policy(g: &LayeredGraphRound, path: &PathPolicy) -> Result<Policy> {
    let layers = g.layers;
    if path.mid.len() + 1 != layers {
        return Err(Error::DimensionMismatch(format!(
            "path has {} mid layers, graph wants {}",
            path.mid.len(),
            layers - 1
        )));
    }
    let ns = 2 * layers + 2;
    let mut actions = vec![0usize; ns];
    actions[0] = path.start;
    for l in 1..layers {
        for x in 0..2 {
            actions[state_of(layers, l, x)] = path.mid[l - 1][x];
        }
    }
    Ok(Policy::deterministic(AgentRole::Agent1, &actions, 2))
}

/// Walks the path from the start node and returns `(1/L)·Σ edge weights`
/// over all `L+1` edges on it. Fails if the walk uses a missing edge.
pub fn path_value(g: &LayeredGraphRound, path: &PathPolicy) -> Result<f64> {
    let layers = g.layers;
    let mut total = 0u32;
    let mut node = 0usize;
    for band in 0..=layers {
        let target = if band == layers {
            0
        } else if band == 0 {
            path.start
        } else {
            path.mid[band - 1][node]
        };
        let succ = g.successors(band, node);
        let hit = succ
            .iter()
            .find(|(to, _)| *to == target)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "path infeasible: no edge from node {node} of layer {band} to {target}"
                ))
            })?;
        total += hit.1 as u32;
        node = target;
    }
    Ok(total as f64 / layers as f64)
}

/// Every feasible successor map of a round.
pub fn enumerate_path_policies(g: &LayeredGraphRound) -> Result<Vec<PathPolicy>> {
    g.validate()?;
    let layers = g.layers;
    let start_choices: Vec<usize> = g.successors(0, 0).iter().map(|(to, _)| *to).collect();
    let mut result = Vec::new();
    for &start in &start_choices {
        let mut partial: Vec<Vec<[usize; 2]>> = vec![Vec::new()];
        for l in 1..layers {
            let c0: Vec<usize> = g.successors(l, 0).iter().map(|(to, _)| *to).collect();
            let c1: Vec<usize> = g.successors(l, 1).iter().map(|(to, _)| *to).collect();
            let mut next = Vec::new();
            for stem in &partial {
                for &a in &c0 {
                    for &b in &c1 {
                        let mut grown = stem.clone();
                        grown.push([a, b]);
                        next.push(grown);
                    }
                }
            }
            partial = next;
        }
        for mid in partial {
            result.push(PathPolicy { start, mid });
        }
    }
    Ok(result)
}

/// A built instance: the MDP, the escape probability and the per-round
/// policy schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedInstance {
    pub mdp: Mdp,
    pub rho2: f64,
    pub schedule: Vec<Policy>,
    pub rounds: Vec<LayeredGraphRound>,
}

/// Builds the MDP and the schedule for a sequence of rounds sharing one
/// layer count.
pub fn reduce(rounds: &[LayeredGraphRound], rho2: f64) -> Result<ReducedInstance> {
    let layers = rounds
        .first()
        .ok_or_else(|| Error::InvalidInput("no rounds supplied".into()))?
        .layers;
    if rounds.iter().any(|g| g.layers != layers) {
        return Err(Error::InvalidInput("rounds disagree on the layer count".into()));
    }
    let mdp = build_mdp(layers);
    let schedule =
        rounds.iter().map(|g| encode_round(g, rho2)).collect::<Result<Vec<Policy>>>()?;
    Ok(ReducedInstance { mdp, rho2, schedule, rounds: rounds.to_vec() })
}

/// Per-path comparison of the MDP's average reward against the path value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathCorrespondence {
    pub path: PathPolicy,
    pub value: f64,
    pub eta: f64,
    /// `η / V`; absent for zero-value paths.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundCorrespondence {
    pub round: usize,
    pub entries: Vec<PathCorrespondence>,
    /// Relative spread `(max − min)/max` of the ratio over positive-value
    /// paths; 0 when fewer than two such paths exist.
    pub ratio_spread: f64,
    /// Largest η among zero-value paths (proportionality forces it to 0).
    pub zero_value_max_eta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub rounds: Vec<RoundCorrespondence>,
}

/// Evaluates the η ∝ V correspondence round by round. `paths_per_round[t]`
/// must be feasible in round t.
pub fn check_correspondence(
    instance: &ReducedInstance,
    paths_per_round: &[Vec<PathPolicy>],
) -> Result<CorrespondenceReport> {
    if paths_per_round.len() != instance.rounds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} path lists for {} rounds",
            paths_per_round.len(),
            instance.rounds.len()
        )));
    }
    let mut rounds = Vec::new();
    for (idx, (g, paths)) in instance.rounds.iter().zip(paths_per_round).enumerate() {
        let pi2 = &instance.schedule[idx];
        let mut entries = Vec::new();
        let mut ratios: Vec<f64> = Vec::new();
        let mut zero_value_max_eta: f64 = 0.0;
        for path in paths {
            let value = path_value(g, path)?;
            let pi1 = encode_path_policy(g, path)?;
            let eta = average_reward(&instance.mdp, &pi1, pi2)?;
            let ratio = if value > 0.0 {
                ratios.push(eta / value);
                Some(eta / value)
            } else {
                zero_value_max_eta = zero_value_max_eta.max(eta);
                None
            };
            entries.push(PathCorrespondence { path: path.clone(), value, eta, ratio });
        }
        let ratio_spread = if ratios.len() >= 2 {
            let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
            let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
            (max - min) / max
        } else {
            0.0
        };
        rounds.push(RoundCorrespondence { round: idx, entries, ratio_spread, zero_value_max_eta });
    }
    Ok(CorrespondenceReport { rounds })
}

/// A random round: each node keeps a nonempty subset of its allowed
/// successors, weights i.i.d. binary.
pub fn random_round<R: Rng>(rng: &mut R, layers: usize) -> LayeredGraphRound {
    let mut edges: Vec<Vec<EdgeSpec>> = Vec::with_capacity(layers + 1);
    for band in 0..=layers {
        let mut band_edges = Vec::new();
        let sources: &[usize] = if band == 0 { &[0] } else { &[0, 1] };
        for &from in sources {
            if band == layers {
                band_edges.push(EdgeSpec { from, to: 0, weight: rng.gen_range(0..=1) });
            } else {
                // subset of {to 0, to 1}, at least one present
                let pick = rng.gen_range(1..=3u8);
                for (bit, to) in [(1u8, 0usize), (2u8, 1usize)] {
                    if pick & bit != 0 {
                        band_edges.push(EdgeSpec { from, to, weight: rng.gen_range(0..=1) });
                    }
                }
            }
        }
        edges.push(band_edges);
    }
    LayeredGraphRound { layers, edges }
}

/// On-disk format for a sequence of rounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub rho2: f64,
    pub rounds: Vec<LayeredGraphRound>,
}
