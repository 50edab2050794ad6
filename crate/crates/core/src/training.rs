//! Actor-critic training loop over the voting environment.
//!
//! Every agent observes either its walkable neighborhood (residents) or the
//! whole district (professionals). At each step all eligible agents sample
//! a vote from their role's actor, the environment applies the plurality
//! outcome, and each voter's trajectory grows by one transition. Finished
//! trajectories are converted to discounted returns and pushed into the
//! agent's replay buffer. Once a buffer holds a full batch, every step
//! updates the role's critic towards the sampled returns and then the
//! role's actor along the gradient of the critic's value.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentRole};
use crate::environment::{Environment, EpisodeState, JointAction, RewardConfig, StepRecord};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{self, Manifest};
use crate::nn::{
    sgd_step, Matrix, Neighborhoods, NetConfig, Parameterized, PolicyNet, Tape, ValueNet, ACTIONS,
    NODE_FEATURES,
};
use crate::spatial_graph::{LandUse, ParcelId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub seed: u64,
    pub radius_m: f64,
    pub rewards: RewardConfig,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            episodes_per_epoch: 200,
            gamma: 0.95,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            batch_size: 32,
            buffer_capacity: 10_000,
            seed: 0,
            radius_m: crate::agents::WALKABLE_RADIUS_M,
            rewards: RewardConfig::default(),
            net: NetConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        for (name, lr) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic)] {
            if !lr.is_finite() || lr < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {lr}"
                )));
            }
        }
        if self.epochs == 0 || self.episodes_per_epoch == 0 {
            return Err(Error::Config(
                "epochs and episodes_per_epoch must be positive".into(),
            ));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config(
                "batch_size and buffer_capacity must be positive".into(),
            ));
        }
        if !(self.radius_m > 0.0) {
            return Err(Error::Config(format!(
                "radius_m must be positive, got {}",
                self.radius_m
            )));
        }
        self.rewards.weights.validate()?;
        self.net.validate()
    }

    pub fn total_episodes(&self) -> usize {
        self.epochs * self.episodes_per_epoch
    }
}

/// `R_t = r_t + gamma * R_{t+1}`, with the last return equal to the last
/// reward.
pub fn compute_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Negative mean of the critic's values.
pub fn actor_loss(q_values: &[f64]) -> Result<f64> {
    if q_values.is_empty() {
        return Err(Error::Contract("actor loss over an empty batch".into()));
    }
    Ok(-q_values.iter().sum::<f64>() / q_values.len() as f64)
}

/// Mean squared error between returns and predictions.
pub fn critic_loss(returns: &[f64], predictions: &[f64]) -> Result<f64> {
    if returns.len() != predictions.len() {
        return Err(Error::Contract(format!(
            "{} returns but {} predictions",
            returns.len(),
            predictions.len()
        )));
    }
    if returns.is_empty() {
        return Err(Error::Contract("critic loss over an empty batch".into()));
    }
    Ok(returns
        .iter()
        .zip(predictions)
        .map(|(r, v)| (r - v).powi(2))
        .sum::<f64>()
        / returns.len() as f64)
}

/// Compact record of what an agent saw: land uses and assignment flags of
/// its observed parcels plus the local index of the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub land_uses: Vec<u8>,
    pub assigned: Vec<bool>,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Snapshot,
    pub action: LandUse,
    pub reward: f64,
    pub next_state: Option<Snapshot>,
    pub done: bool,
    /// Discounted return from this transition to the end of the episode.
    pub ret: f64,
}

/// Bounded FIFO of transitions; the oldest entry is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` distinct transitions chosen uniformly (all of them if fewer).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// What one agent observes: a fixed parcel subset and its neighborhoods.
#[derive(Debug, Clone)]
pub struct AgentView {
    /// Global parcel indices, ascending.
    nodes: Vec<usize>,
    local: BTreeMap<usize, usize>,
    nbh: Arc<Neighborhoods>,
    area: Vec<f64>,
    readjustable: Vec<bool>,
}

impl AgentView {
    pub fn new(env: &Environment, agent: &Agent) -> Result<Self> {
        let base = env.base();
        let nodes: Vec<usize> = match agent.home_parcel {
            Some(home) => {
                let origin = base
                    .index_of(home)
                    .ok_or_else(|| Error::Lookup(format!("home parcel {home} not in graph")))?;
                base.nodes_within(origin, agent.observation_radius_m)
            }
            None => (0..base.len()).collect(),
        };
        let local: BTreeMap<usize, usize> =
            nodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let lists: Vec<Vec<usize>> = nodes
            .iter()
            .map(|&g| {
                base.neighbors(g)
                    .iter()
                    .filter_map(|e| local.get(&e.to).copied())
                    .collect()
            })
            .collect();
        let max_area = base.parcels().iter().map(|p| p.area).fold(0.0, f64::max);
        let area = nodes
            .iter()
            .map(|&g| base.parcel(g).area / max_area)
            .collect();
        let readjustable = nodes.iter().map(|&g| base.parcel(g).readjustable).collect();
        Ok(Self {
            nbh: Arc::new(Neighborhoods::from_lists(&lists)?),
            nodes,
            local,
            area,
            readjustable,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn neighborhoods(&self) -> &Arc<Neighborhoods> {
        &self.nbh
    }

    pub fn parcel_ids(&self, env: &Environment) -> Vec<ParcelId> {
        self.nodes
            .iter()
            .map(|&g| env.base().parcel(g).id)
            .collect()
    }

    pub fn snapshot(&self, state: &EpisodeState, target_global: usize) -> Result<Snapshot> {
        let target = *self
            .local
            .get(&target_global)
            .ok_or_else(|| Error::Lookup("target parcel outside the agent's observation".into()))?;
        Ok(Snapshot {
            land_uses: self
                .nodes
                .iter()
                .map(|&g| state.graph.parcel(g).land_use.ordinal() as u8)
                .collect(),
            assigned: self
                .nodes
                .iter()
                .map(|&g| state.graph.parcel(g).assigned)
                .collect(),
            target,
        })
    }

    /// Node features (N x 9): one-hot land use, area over the largest
    /// parcel's area, readjustable, assigned, is-target.
    pub fn features(&self, snap: &Snapshot) -> Matrix {
        let mut m = Matrix::zeros(self.nodes.len(), NODE_FEATURES);
        for i in 0..self.nodes.len() {
            let row = m.row_mut(i);
            row[snap.land_uses[i] as usize] = 1.0;
            row[5] = self.area[i];
            row[6] = f64::from(u8::from(self.readjustable[i]));
            row[7] = f64::from(u8::from(snap.assigned[i]));
            row[8] = f64::from(u8::from(i == snap.target));
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolePolicy {
    pub actor: PolicyNet,
    pub critic: ValueNet,
}

impl RolePolicy {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, cfg: &NetConfig) -> Self {
        Self {
            actor: PolicyNet::new(rng, NODE_FEATURES, cfg),
            critic: ValueNet::new(rng, NODE_FEATURES, cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanningMode {
    Participatory,
    TopDown,
}

/// One shared policy per role present in the roster.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet {
    pub net: NetConfig,
    pub mode: PlanningMode,
    pub roles: BTreeMap<AgentRole, RolePolicy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    mode: PlanningMode,
    net: NetConfig,
    roles: Vec<AgentRole>,
    feature_dim: usize,
    train: Option<TrainConfig>,
}

impl PolicySet {
    pub fn new<R: Rng + ?Sized>(
        rng: &mut R,
        agents: &[Agent],
        net: &NetConfig,
        mode: PlanningMode,
    ) -> Self {
        let mut roles = BTreeMap::new();
        for a in agents {
            roles
                .entry(a.role)
                .or_insert_with(|| RolePolicy::new(rng, net));
        }
        Self {
            net: net.clone(),
            mode,
            roles,
        }
    }

    pub fn get(&self, role: AgentRole) -> Result<&RolePolicy> {
        self.roles
            .get(&role)
            .ok_or_else(|| Error::Lookup(format!("no policy for role {role}")))
    }

    fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (role, p) in &self.roles {
            for (name, m) in p.actor.param_names().into_iter().zip(p.actor.params()) {
                out.push((format!("{role}.{name}"), m));
            }
            for (name, m) in p.critic.param_names().into_iter().zip(p.critic.params()) {
                out.push((format!("{role}.{name}"), m));
            }
        }
        out
    }

    pub fn save(&self, stem: &Path, train: Option<&TrainConfig>, seed: u64) -> Result<Manifest> {
        let meta = CheckpointMeta {
            mode: self.mode,
            net: self.net.clone(),
            roles: self.roles.keys().copied().collect(),
            feature_dim: NODE_FEATURES,
            train: train.cloned(),
        };
        let hash = checkpoint::config_hash(&meta)?;
        checkpoint::save(
            stem,
            seed,
            hash,
            serde_json::to_value(&meta)?,
            &self.named_tensors(),
        )
    }

    pub fn load(stem: &Path) -> Result<(Self, Manifest)> {
        let (manifest, tensors) = checkpoint::load(stem)?;
        let meta: CheckpointMeta = serde_json::from_value(manifest.metadata.clone())?;
        if meta.feature_dim != NODE_FEATURES {
            return Err(Error::Format(format!(
                "checkpoint uses {} node features, expected {NODE_FEATURES}",
                meta.feature_dim
            )));
        }
        let by_name: BTreeMap<String, Matrix> = tensors.into_iter().collect();
        let mut roles = BTreeMap::new();
        for role in meta.roles {
            let mut p = RolePolicy {
                actor: PolicyNet::zeros(NODE_FEATURES, &meta.net),
                critic: ValueNet::zeros(NODE_FEATURES, &meta.net),
            };
            let names = p.actor.param_names();
            fill(&by_name, role, &names, p.actor.params_mut())?;
            let names = p.critic.param_names();
            fill(&by_name, role, &names, p.critic.params_mut())?;
            roles.insert(role, p);
        }
        Ok((
            Self {
                net: meta.net,
                mode: meta.mode,
                roles,
            },
            manifest,
        ))
    }
}

fn fill(
    by_name: &BTreeMap<String, Matrix>,
    role: AgentRole,
    names: &[String],
    params: Vec<&mut Matrix>,
) -> Result<()> {
    for (name, slot) in names.iter().zip(params) {
        let key = format!("{role}.{name}");
        let m = by_name
            .get(&key)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {key}")))?;
        if m.shape() != slot.shape() {
            return Err(Error::Format(format!(
                "tensor {key} has shape {:?}, expected {:?}",
                m.shape(),
                slot.shape()
            )));
        }
        *slot = m.clone();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeCurve {
    pub episode: usize,
    /// Summed combined reward per agent, in roster order.
    pub agent_rewards: Vec<f64>,
    /// Mean combined reward over every (voter, step) pair.
    pub mean_combined: f64,
    /// Global and equity reward after the last step.
    pub global_reward: f64,
    pub equity_reward: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
}

pub fn write_curves<W: Write>(writer: W, agents: &[Agent], curves: &[EpisodeCurve]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["episode".to_string()];
    header.extend(agents.iter().map(|a| format!("agent{}_{}", a.id, a.role)));
    header.extend(
        [
            "mean_combined",
            "global_reward",
            "equity_reward",
            "critic_loss",
            "actor_loss",
        ]
        .map(String::from),
    );
    wtr.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in curves {
        let mut row = vec![c.episode.to_string()];
        row.extend(c.agent_rewards.iter().map(|r| r.to_string()));
        row.push(c.mean_combined.to_string());
        row.push(c.global_reward.to_string());
        row.push(c.equity_reward.to_string());
        row.push(opt(c.critic_loss));
        row.push(opt(c.actor_loss));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<curves>", e))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policies: PolicySet,
    pub curves: Vec<EpisodeCurve>,
    /// Final replay-buffer length per agent, in roster order.
    pub buffer_lengths: Vec<usize>,
}

fn sample_action<R: Rng + ?Sized>(rng: &mut R, probs: &[f64; ACTIONS]) -> LandUse {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return LandUse::ALL[j];
        }
    }
    LandUse::ALL[ACTIONS - 1]
}

/// Highest-probability action; ties go to the lowest ordinal.
pub fn argmax_action(probs: &[f64; ACTIONS]) -> LandUse {
    let mut best = 0;
    for j in 1..ACTIONS {
        if probs[j] > probs[best] {
            best = j;
        }
    }
    LandUse::ALL[best]
}

fn one_hot_target(mut policies: Matrix, target: usize, action: LandUse) -> Matrix {
    for (j, v) in policies.row_mut(target).iter_mut().enumerate() {
        *v = if j == action.ordinal() { 1.0 } else { 0.0 };
    }
    policies
}

/// Critic regression on `Q(s, pi(s) with the taken action at the target)`
/// towards the stored returns, followed by an actor step that ascends the
/// updated critic's value of the actor's own distribution.
fn update_role(
    policy: &mut RolePolicy,
    view: &AgentView,
    batch: &[&Transition],
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    let n = batch.len() as f64;
    let nbh = view.neighborhoods();
    let feats: Vec<Matrix> = batch.iter().map(|t| view.features(&t.state)).collect();

    let critic_loss = {
        let tape = Tape::new();
        let cvars = policy.critic.bind(&tape);
        let mut total = None;
        for (t, x) in batch.iter().zip(&feats) {
            let p = one_hot_target(
                policy.actor.node_policies(x, nbh)?,
                t.state.target,
                t.action,
            );
            let q = policy
                .critic
                .forward_bound(&cvars, tape.leaf(x.clone()), tape.leaf(p), nbh)?;
            let err = q.sub(tape.leaf(Matrix::scalar(t.ret)))?.square();
            total = Some(match total {
                None => err,
                Some(acc) => err.add(acc)?,
            });
        }
        let loss = total.expect("non-empty batch").scale(1.0 / n);
        let value = loss.item();
        if !value.is_finite() {
            return Err(Error::Contract(format!(
                "critic loss became non-finite ({value})"
            )));
        }
        let grads = tape.backward(loss)?;
        let g: Vec<Matrix> = cvars.iter().map(|v| grads.get(*v)).collect();
        sgd_step(&mut policy.critic.params_mut(), &g, cfg.lr_critic)?;
        value
    };

    let actor_loss = {
        let tape = Tape::new();
        let avars = policy.actor.bind(&tape);
        let cvars = policy.critic.bind(&tape);
        let mut total = None;
        for x in &feats {
            let xv = tape.leaf(x.clone());
            let p = policy.actor.forward_bound(&avars, xv, nbh)?;
            let q = policy.critic.forward_bound(&cvars, xv, p, nbh)?;
            total = Some(match total {
                None => q,
                Some(acc) => q.add(acc)?,
            });
        }
        let loss = total.expect("non-empty batch").scale(-1.0 / n);
        let value = loss.item();
        if !value.is_finite() {
            return Err(Error::Contract(format!(
                "actor loss became non-finite ({value})"
            )));
        }
        let grads = tape.backward(loss)?;
        let g: Vec<Matrix> = avars.iter().map(|v| grads.get(*v)).collect();
        sgd_step(&mut policy.actor.params_mut(), &g, cfg.lr_actor)?;
        value
    };
    Ok((critic_loss, actor_loss))
}

/// Chooses each eligible agent's vote from its role's actor.
pub struct PolicyVoter<'a> {
    env: &'a Environment,
    policies: &'a PolicySet,
    views: Vec<AgentView>,
}

impl<'a> PolicyVoter<'a> {
    pub fn new(env: &'a Environment, policies: &'a PolicySet) -> Result<Self> {
        let views = env
            .agents()
            .iter()
            .map(|a| {
                policies.get(a.role)?;
                AgentView::new(env, a)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            env,
            policies,
            views,
        })
    }

    pub fn views(&self) -> &[AgentView] {
        &self.views
    }

    /// Distribution over land uses for the agent at roster position `pos`.
    pub fn distribution(
        &self,
        pos: usize,
        state: &EpisodeState,
    ) -> Result<(Snapshot, [f64; ACTIONS])> {
        let target = state
            .target()
            .and_then(|t| self.env.base().index_of(t))
            .ok_or_else(|| Error::Contract("episode is done".into()))?;
        let view = &self.views[pos];
        let snap = view.snapshot(state, target)?;
        let role = self.env.agents()[pos].role;
        let probs = self.policies.get(role)?.actor.policy_forward(
            &view.features(&snap),
            view.neighborhoods(),
            snap.target,
        )?;
        Ok((snap, probs))
    }

    /// Rolls out one episode taking the most probable vote everywhere.
    pub fn greedy_rollout(&self, seed: u64) -> Result<(EpisodeState, Vec<StepRecord>)> {
        let mut state = self.env.reset(seed)?;
        let mut trace = Vec::new();
        while !state.done() {
            let eligible = self.env.eligible_voters(&state);
            let mut action = JointAction::new();
            for (pos, agent) in self.env.agents().iter().enumerate() {
                if eligible.contains(&agent.id) {
                    let (_, probs) = self.distribution(pos, &state)?;
                    action.votes.insert(agent.id, argmax_action(&probs));
                }
            }
            let step = state.step_index;
            let out = self.env.step(&mut state, &action)?;
            trace.push(StepRecord {
                step,
                target: out.target,
                votes: action.votes,
                chosen: out.chosen_use,
                rewards: out.rewards,
            });
        }
        Ok((state, trace))
    }
}

/// Trains one policy per role on `env` and returns the final parameters
/// with per-episode curves. Deterministic for a fixed `cfg.seed`.
pub fn train(env: &Environment, cfg: &TrainConfig, mode: PlanningMode) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let agents = env.agents();
    let mut policies = PolicySet::new(&mut rng, agents, &cfg.net, mode);
    let views: Vec<AgentView> = agents
        .iter()
        .map(|a| AgentView::new(env, a))
        .collect::<Result<_>>()?;
    let mut buffers: Vec<ReplayBuffer> = agents
        .iter()
        .map(|_| ReplayBuffer::new(cfg.buffer_capacity))
        .collect();
    let mut curves = Vec::with_capacity(cfg.total_episodes());

    for episode in 0..cfg.total_episodes() {
        let mut state = env.reset(cfg.seed)?;
        let mut trajectories: Vec<Vec<(Snapshot, LandUse, f64)>> = vec![Vec::new(); agents.len()];
        let mut agent_rewards = vec![0.0; agents.len()];
        let (mut reward_sum, mut reward_count) = (0.0, 0usize);
        let (mut last_global, mut last_equity) = (0.0, 0.0);
        let (mut closs, mut aloss, mut updates) = (0.0, 0.0, 0usize);

        while !state.done() {
            let target = state
                .target()
                .and_then(|t| env.base().index_of(t))
                .expect("pending parcel exists");
            let eligible = env.eligible_voters(&state);
            let mut action = JointAction::new();
            let mut snaps = BTreeMap::new();
            for (pos, agent) in agents.iter().enumerate() {
                if !eligible.contains(&agent.id) {
                    continue;
                }
                let view = &views[pos];
                let snap = view.snapshot(&state, target)?;
                let probs = policies.get(agent.role)?.actor.policy_forward(
                    &view.features(&snap),
                    view.neighborhoods(),
                    snap.target,
                )?;
                action
                    .votes
                    .insert(agent.id, sample_action(&mut rng, &probs));
                snaps.insert(pos, snap);
            }
            let out = env.step(&mut state, &action)?;
            last_global = out.global_reward;
            last_equity = out.equity_reward;
            for (pos, snap) in snaps {
                let id = agents[pos].id;
                let r = out.rewards[&id];
                trajectories[pos].push((snap, action.votes[&id], r));
                agent_rewards[pos] += r;
                reward_sum += r;
                reward_count += 1;
            }

            for (pos, agent) in agents.iter().enumerate() {
                if buffers[pos].len() < cfg.batch_size {
                    continue;
                }
                let batch = buffers[pos].sample(&mut rng, cfg.batch_size);
                let policy = policies
                    .roles
                    .get_mut(&agent.role)
                    .expect("policy per role");
                let (c, a) = update_role(policy, &views[pos], &batch, cfg)?;
                closs += c;
                aloss += a;
                updates += 1;
            }
        }

        for (pos, traj) in trajectories.into_iter().enumerate() {
            let rewards: Vec<f64> = traj.iter().map(|t| t.2).collect();
            let returns = compute_returns(&rewards, cfg.gamma);
            let next: Vec<Option<Snapshot>> = traj
                .iter()
                .skip(1)
                .map(|t| Some(t.0.clone()))
                .chain([None])
                .collect();
            let len = traj.len();
            for (i, ((snap, act, r), next_state)) in traj.into_iter().zip(next).enumerate() {
                buffers[pos].push(Transition {
                    state: snap,
                    action: act,
                    reward: r,
                    next_state,
                    done: i + 1 == len,
                    ret: returns[i],
                });
            }
        }

        let per_update = |v: f64| (updates > 0).then(|| v / updates as f64);
        curves.push(EpisodeCurve {
            episode,
            agent_rewards,
            mean_combined: if reward_count > 0 {
                reward_sum / reward_count as f64
            } else {
                0.0
            },
            global_reward: last_global,
            equity_reward: last_equity,
            critic_loss: per_update(closs),
            actor_loss: per_update(aloss),
        });
        log::debug!(
            "episode {episode}: mean reward {:.4}, global {:.4}, equity {:.4}",
            curves[episode].mean_combined,
            last_global,
            last_equity
        );
    }

    Ok(TrainOutcome {
        policies,
        curves,
        buffer_lengths: buffers.iter().map(ReplayBuffer::len).collect(),
    })
}
