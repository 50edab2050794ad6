//! Sequential per-parcel voting environment.
//!
//! Each step puts the lowest-id unassigned readjustable parcel to a vote
//! among the eligible agents. The plurality winner (ties to the lowest
//! land-use ordinal) overwrites the parcel's land use, the acceptance
//! ledger credits every agent whose vote won, and each voter receives the
//! weighted combination of the four reward tiers evaluated on the updated
//! district. Transitions are deterministic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::error::{Error, Result};
use crate::rewards::{
    combined_reward, equity_reward, global_reward_with, local_reward, self_reward,
    AcceptanceLedger, RewardWeights, ShareMode,
};
use crate::spatial_graph::{LandUse, ParcelId, SpatialGraph};

/// Reward settings shared by every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub targets: Vec<LandUse>,
    pub share_mode: ShareMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            targets: vec![LandUse::Green, LandUse::Commercial],
            share_mode: ShareMode::Area,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    /// District with the current land uses.
    pub graph: SpatialGraph,
    pending: VecDeque<ParcelId>,
    pub ledger: AcceptanceLedger,
    pub step_index: usize,
    pub seed: u64,
}

impl EpisodeState {
    pub fn target(&self) -> Option<ParcelId> {
        self.pending.front().copied()
    }

    pub fn pending(&self) -> impl Iterator<Item = ParcelId> + '_ {
        self.pending.iter().copied()
    }

    pub fn done(&self) -> bool {
        self.pending.is_empty()
    }
}

/// One vote per participating agent, keyed by agent id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointAction {
    pub votes: BTreeMap<usize, LandUse>,
}

impl JointAction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vote(mut self, agent: usize, land_use: LandUse) -> Self {
        self.votes.insert(agent, land_use);
        self
    }

    /// Builds a joint action from `(agent id, action ordinal)` pairs.
    pub fn from_ordinals(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut votes = BTreeMap::new();
        for (agent, a) in pairs {
            let use_ = LandUse::from_ordinal(a)
                .ok_or_else(|| Error::Contract(format!("action ordinal {a} out of range 0..4")))?;
            if votes.insert(agent, use_).is_some() {
                return Err(Error::Contract(format!("agent {agent} voted twice")));
            }
        }
        Ok(Self { votes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub target: ParcelId,
    pub chosen_use: LandUse,
    /// Combined reward per voting agent.
    pub rewards: BTreeMap<usize, f64>,
    pub global_reward: f64,
    pub equity_reward: f64,
    pub done: bool,
}

/// One line of the JSON-lines episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub target: ParcelId,
    pub votes: BTreeMap<usize, LandUse>,
    pub chosen: LandUse,
    pub rewards: BTreeMap<usize, f64>,
}

pub fn write_trace<W: Write>(mut out: W, records: &[StepRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
    }
    Ok(())
}

/// Plurality winner; ties go to the lowest land-use ordinal.
pub fn tally_votes(votes: &[LandUse]) -> Result<LandUse> {
    if votes.is_empty() {
        return Err(Error::Aggregation("cannot tally an empty vote set".into()));
    }
    let mut counts = [0usize; 5];
    for v in votes {
        counts[v.ordinal()] += 1;
    }
    let mut best = 0;
    for j in 1..5 {
        if counts[j] > counts[best] {
            best = j;
        }
    }
    Ok(LandUse::ALL[best])
}

/// The voting environment over a fixed base district and agent roster.
#[derive(Debug, Clone)]
pub struct Environment {
    base: SpatialGraph,
    agents: Vec<Agent>,
    rewards: RewardConfig,
    /// Per agent: path distance from home to every parcel (residents only).
    home_distances: Vec<Option<Vec<f64>>>,
    total_area: f64,
}

impl Environment {
    pub fn new(base: SpatialGraph, agents: Vec<Agent>, rewards: RewardConfig) -> Result<Self> {
        rewards.weights.validate()?;
        if agents.is_empty() {
            return Err(Error::Config("environment needs at least one agent".into()));
        }
        let mut ids = BTreeSet::new();
        let mut home_distances = Vec::with_capacity(agents.len());
        for a in &agents {
            if !ids.insert(a.id) {
                return Err(Error::Config(format!("duplicate agent id {}", a.id)));
            }
            match (a.role.is_resident(), a.home_parcel) {
                (true, Some(home)) => {
                    let origin = base.index_of(home).ok_or_else(|| {
                        Error::Config(format!("home parcel {home} of agent {} not in graph", a.id))
                    })?;
                    home_distances.push(Some(
                        base.shortest_path_distances(origin, a.observation_radius_m),
                    ));
                }
                (true, None) => {
                    return Err(Error::Config(format!(
                        "resident agent {} has no home parcel",
                        a.id
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::Config(format!(
                        "professional agent {} has a home parcel",
                        a.id
                    )))
                }
                (false, None) => home_distances.push(None),
            }
        }
        let total_area = base.total_area();
        Ok(Self {
            base,
            agents,
            rewards,
            home_distances,
            total_area,
        })
    }

    pub fn base(&self) -> &SpatialGraph {
        &self.base
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.rewards
    }

    /// Fresh episode: every readjustable parcel unassigned, pending in
    /// ascending id order, empty ledger.
    pub fn reset(&self, seed: u64) -> Result<EpisodeState> {
        let mut graph = self.base.clone();
        for i in 0..graph.len() {
            graph.parcel_mut(i).assigned = false;
        }
        let pending: VecDeque<_> = graph.readjustable_ids().into();
        if pending.is_empty() {
            return Err(Error::Config("district has no readjustable parcels".into()));
        }
        Ok(EpisodeState {
            graph,
            pending,
            ledger: AcceptanceLedger::new(),
            step_index: 0,
            seed,
        })
    }

    /// Professionals always vote; residents vote when the target lies within
    /// their radius of their home parcel.
    pub fn eligible_voters(&self, state: &EpisodeState) -> BTreeSet<usize> {
        let Some(target) = state.target().and_then(|t| self.base.index_of(t)) else {
            return BTreeSet::new();
        };
        self.agents
            .iter()
            .zip(&self.home_distances)
            .filter(|(a, dist)| match dist {
                None => true,
                Some(d) => d[target] <= a.observation_radius_m,
            })
            .map(|(a, _)| a.id)
            .collect()
    }

    /// Path distance from the agent's home to a parcel index (0 for
    /// professionals).
    pub fn home_distance(&self, agent_pos: usize, parcel_idx: usize) -> f64 {
        self.home_distances[agent_pos]
            .as_ref()
            .map_or(0.0, |d| d[parcel_idx])
    }

    pub fn step(&self, state: &mut EpisodeState, action: &JointAction) -> Result<StepOutcome> {
        let target = state
            .target()
            .ok_or_else(|| Error::Contract("episode is already done".into()))?;
        let eligible = self.eligible_voters(state);
        for id in action.votes.keys() {
            if !eligible.contains(id) {
                return Err(Error::Contract(format!(
                    "agent {id} is not eligible to vote on parcel {target}"
                )));
            }
        }
        if let Some(missing) = eligible.iter().find(|id| !action.votes.contains_key(id)) {
            return Err(Error::Contract(format!(
                "eligible agent {missing} did not vote on parcel {target}"
            )));
        }
        let ballots: Vec<LandUse> = action.votes.values().copied().collect();
        let chosen = tally_votes(&ballots)?;

        let idx = self
            .base
            .index_of(target)
            .expect("pending ids come from the graph");
        let area = self.base.parcel(idx).area;
        {
            let parcel = state.graph.parcel_mut(idx);
            parcel.land_use = chosen;
            parcel.assigned = true;
        }

        // local reward counts adoptions made before this step
        let prior = state.ledger.clone();
        for (&id, &vote) in &action.votes {
            if vote == chosen {
                let role = self.agent(id).role;
                state
                    .ledger
                    .record(role, chosen, area / self.total_area, area);
            }
        }
        state.pending.pop_front();
        state.step_index += 1;

        let r_global =
            global_reward_with(&state.graph, &self.rewards.targets, self.rewards.share_mode)?;
        let r_equity = equity_reward(&state.ledger);
        let rewards = action
            .votes
            .iter()
            .map(|(&id, &vote)| {
                let role = self.agent(id).role;
                let r_self = self_reward(role, vote);
                let r_local = local_reward(role, vote, prior.request_count(role, vote));
                (
                    id,
                    combined_reward(r_self, r_local, r_global, r_equity, &self.rewards.weights),
                )
            })
            .collect();

        Ok(StepOutcome {
            target,
            chosen_use: chosen,
            rewards,
            global_reward: r_global,
            equity_reward: r_equity,
            done: state.done(),
        })
    }

    fn agent(&self, id: usize) -> &Agent {
        self.agents
            .iter()
            .find(|a| a.id == id)
            .expect("vote keys validated")
    }
}
