//! Comparison planners and the metric reports used to rank them.
//!
//! Random and greedy planners vote without learning; DTP and MARL roll out
//! trained actor policies taking the most probable vote. Top-down methods
//! let a single planner decide, participatory ones use the full roster.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{greedy_vote, top_down_roster, Agent};
use crate::environment::{Environment, EpisodeState, JointAction, RewardConfig, StepRecord};
use crate::error::{Error, Result};
use crate::rewards::{
    density_score_with, diversity_score_with, equity_from_tallies, equity_reward,
    global_reward_with, AcceptanceLedger,
};
use crate::spatial_graph::{LandUse, ParcelId, SpatialGraph};
use crate::training::{PlanningMode, PolicySet, PolicyVoter};

/// Land uses whose density measures sustainability.
pub const SUSTAINABILITY_USES: [LandUse; 2] = [LandUse::Green, LandUse::Commercial];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "RTP")]
    Rtp,
    #[serde(rename = "RPP")]
    Rpp,
    #[serde(rename = "GTP")]
    Gtp,
    #[serde(rename = "GPP")]
    Gpp,
    #[serde(rename = "DTP")]
    Dtp,
    #[serde(rename = "MARL")]
    Marl,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        Self::Rtp,
        Self::Rpp,
        Self::Gtp,
        Self::Gpp,
        Self::Dtp,
        Self::Marl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rtp => "RTP",
            Self::Rpp => "RPP",
            Self::Gtp => "GTP",
            Self::Gpp => "GPP",
            Self::Dtp => "DTP",
            Self::Marl => "MARL",
        }
    }

    pub fn is_top_down(self) -> bool {
        matches!(self, Self::Rtp | Self::Gtp | Self::Dtp)
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Self::Dtp | Self::Marl)
    }

    pub fn mode(self) -> PlanningMode {
        if self.is_top_down() {
            PlanningMode::TopDown
        } else {
            PlanningMode::Participatory
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?} (expected RTP, RPP, GTP, GPP, DTP or MARL)"
                ))
            })
    }
}

/// Parses a comma-separated method list, keeping the given order.
pub fn parse_methods(list: &str) -> Result<Vec<BaselineKind>> {
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let k: BaselineKind = part.parse()?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    Ok(out)
}

/// Roster a method plays with: the lone planner for top-down methods.
pub fn roster_for(kind: BaselineKind, participants: &[Agent]) -> Vec<Agent> {
    if kind.is_top_down() {
        top_down_roster()
    } else {
        participants.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub method: BaselineKind,
    pub seed: u64,
    /// New land use of every readjustable parcel.
    pub assignment: BTreeMap<ParcelId, LandUse>,
    pub graph: SpatialGraph,
    pub ledger: AcceptanceLedger,
    pub trace: Vec<StepRecord>,
}

/// Plays one episode, asking `choose` for the vote of each eligible agent
/// (by roster position).
pub fn play_episode(
    env: &Environment,
    seed: u64,
    mut choose: impl FnMut(usize, &EpisodeState) -> Result<LandUse>,
) -> Result<(EpisodeState, Vec<StepRecord>)> {
    let mut state = env.reset(seed)?;
    let mut trace = Vec::new();
    while !state.done() {
        let eligible = env.eligible_voters(&state);
        let mut action = JointAction::new();
        for (pos, agent) in env.agents().iter().enumerate() {
            if eligible.contains(&agent.id) {
                action.votes.insert(agent.id, choose(pos, &state)?);
            }
        }
        let step = state.step_index;
        let out = env.step(&mut state, &action)?;
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

/// Re-applies a recorded vote trace and returns the resulting state.
pub fn replay_trace(env: &Environment, seed: u64, trace: &[StepRecord]) -> Result<EpisodeState> {
    let mut state = env.reset(seed)?;
    for rec in trace {
        if state.target() != Some(rec.target) {
            return Err(Error::Contract(format!(
                "trace step {} targets parcel {} but the episode is at {:?}",
                rec.step,
                rec.target,
                state.target()
            )));
        }
        let action = JointAction {
            votes: rec.votes.clone(),
        };
        env.step(&mut state, &action)?;
    }
    Ok(state)
}

/// Runs one comparison method. `policy` must hold the trained policies
/// for DTP (top-down) or MARL (participatory).
pub fn run_baseline(
    kind: BaselineKind,
    graph: &SpatialGraph,
    participants: &[Agent],
    rewards: &RewardConfig,
    seed: u64,
    policy: Option<&PolicySet>,
) -> Result<PlanOutcome> {
    let env = Environment::new(
        graph.clone(),
        roster_for(kind, participants),
        rewards.clone(),
    )?;
    let (state, trace) = match kind {
        BaselineKind::Rtp | BaselineKind::Rpp => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            play_episode(&env, seed, |_, _| {
                Ok(LandUse::ALL[rng.random_range(0..LandUse::COUNT)])
            })?
        }
        BaselineKind::Gtp | BaselineKind::Gpp => {
            let agents = env.agents().to_vec();
            play_episode(&env, seed, |pos, _| Ok(greedy_vote(agents[pos].role)))?
        }
        BaselineKind::Dtp | BaselineKind::Marl => {
            let policy = policy.ok_or_else(|| Error::MissingModel {
                method: kind.name().into(),
                hint: format!(
                    "train one first (`parcelplan train --mode {}`) and pass it to compare",
                    match kind.mode() {
                        PlanningMode::TopDown => "top-down",
                        PlanningMode::Participatory => "participatory",
                    }
                ),
            })?;
            if policy.mode != kind.mode() {
                return Err(Error::Config(format!(
                    "{kind} needs a {:?} checkpoint, got {:?}",
                    kind.mode(),
                    policy.mode
                )));
            }
            PolicyVoter::new(&env, policy)?.greedy_rollout(seed)?
        }
    };
    let assignment = graph
        .readjustable_ids()
        .into_iter()
        .map(|id| {
            let p = state.graph.parcel_by_id(id).expect("same parcel set");
            (id, p.land_use)
        })
        .collect();
    Ok(PlanOutcome {
        method: kind,
        seed,
        assignment,
        graph: state.graph,
        ledger: state.ledger,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub global_reward: f64,
    /// Equity over acceptance normalized by total district area.
    pub equity_reward: f64,
    /// Equity over accepted square meters.
    pub equity_reward_raw: f64,
    pub sustainability: f64,
    pub diversity: f64,
    pub delta_global: f64,
    pub delta_sustainability: f64,
    pub delta_diversity: f64,
}

/// Density of green and commercial land.
pub fn sustainability(graph: &SpatialGraph) -> Result<f64> {
    density_score_with(graph, &SUSTAINABILITY_USES, Default::default())
}

fn district_metrics(graph: &SpatialGraph, rewards: &RewardConfig) -> Result<(f64, f64, f64)> {
    Ok((
        global_reward_with(graph, &rewards.targets, rewards.share_mode)?,
        density_score_with(graph, &SUSTAINABILITY_USES, rewards.share_mode)?,
        diversity_score_with(graph, rewards.share_mode)?,
    ))
}

/// Metrics of the district before any readjustment; no decision has been
/// accepted yet, so both equity values are zero.
pub fn original_status(before: &SpatialGraph, rewards: &RewardConfig) -> Result<MetricsReport> {
    let (global_reward, sustainability, diversity) = district_metrics(before, rewards)?;
    Ok(MetricsReport {
        global_reward,
        sustainability,
        diversity,
        ..Default::default()
    })
}

pub fn evaluate_plan(
    before: &SpatialGraph,
    outcome: &PlanOutcome,
    rewards: &RewardConfig,
) -> Result<MetricsReport> {
    let expected = before.readjustable_ids();
    if outcome.assignment.len() != expected.len()
        || !expected
            .iter()
            .all(|id| outcome.assignment.contains_key(id))
    {
        return Err(Error::Contract(format!(
            "{} plan assigns {} of {} readjustable parcels",
            outcome.method,
            outcome.assignment.len(),
            expected.len()
        )));
    }
    if outcome.graph.len() != before.len() {
        return Err(Error::Contract(
            "plan graph and original district differ in size".into(),
        ));
    }
    for p in outcome.graph.parcels() {
        let orig = before
            .parcel_by_id(p.id)
            .ok_or_else(|| Error::Contract(format!("plan contains unknown parcel {}", p.id)))?;
        if !orig.readjustable && orig.land_use != p.land_use {
            return Err(Error::Contract(format!(
                "plan changes non-readjustable parcel {}",
                p.id
            )));
        }
        if orig.readjustable && outcome.assignment[&p.id] != p.land_use {
            return Err(Error::Contract(format!(
                "plan graph disagrees with assignment at parcel {}",
                p.id
            )));
        }
    }
    let base = original_status(before, rewards)?;
    let (global_reward, sustainability, diversity) = district_metrics(&outcome.graph, rewards)?;
    Ok(MetricsReport {
        global_reward,
        equity_reward: equity_reward(&outcome.ledger),
        equity_reward_raw: equity_from_tallies(&outcome.ledger.accepted_area_raw),
        sustainability,
        diversity,
        delta_global: global_reward - base.global_reward,
        delta_sustainability: sustainability - base.sustainability,
        delta_diversity: diversity - base.diversity,
    })
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

fn median_report(reports: &[MetricsReport]) -> MetricsReport {
    let f = |get: fn(&MetricsReport) -> f64| {
        median(&reports.iter().map(get).collect::<Vec<_>>()).unwrap_or(f64::NAN)
    };
    MetricsReport {
        global_reward: f(|r| r.global_reward),
        equity_reward: f(|r| r.equity_reward),
        equity_reward_raw: f(|r| r.equity_reward_raw),
        sustainability: f(|r| r.sustainability),
        diversity: f(|r| r.diversity),
        delta_global: f(|r| r.delta_global),
        delta_sustainability: f(|r| r.delta_sustainability),
        delta_diversity: f(|r| r.delta_diversity),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub method: BaselineKind,
    pub seed: u64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub original: MetricsReport,
    /// Median over seeds, one row per method in request order.
    pub rows: Vec<(BaselineKind, MetricsReport)>,
    pub per_seed: Vec<SeedResult>,
    /// Plan of the first seed for each method.
    pub plans: Vec<PlanOutcome>,
}

impl Comparison {
    pub fn row(&self, kind: BaselineKind) -> Option<&MetricsReport> {
        self.rows.iter().find(|(k, _)| *k == kind).map(|(_, r)| r)
    }
}

/// Trained policies keyed by the method that consumes them.
#[derive(Debug, Clone, Default)]
pub struct TrainedPolicies {
    pub dtp: Option<PolicySet>,
    pub marl: Option<PolicySet>,
}

impl TrainedPolicies {
    pub fn for_kind(&self, kind: BaselineKind) -> Option<&PolicySet> {
        match kind {
            BaselineKind::Dtp => self.dtp.as_ref(),
            BaselineKind::Marl => self.marl.as_ref(),
            _ => None,
        }
    }
}

/// Runs every method on every seed and aggregates medians. Missing models
/// are reported before anything runs.
pub fn compare(
    graph: &SpatialGraph,
    participants: &[Agent],
    rewards: &RewardConfig,
    methods: &[BaselineKind],
    seeds: &[u64],
    policies: &TrainedPolicies,
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    for &kind in methods {
        if kind.needs_model() && policies.for_kind(kind).is_none() {
            return Err(Error::MissingModel {
                method: kind.name().into(),
                hint: "supply a checkpoint for it".into(),
            });
        }
    }
    let original = original_status(graph, rewards)?;
    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    let mut plans = Vec::new();
    for &kind in methods {
        let mut reports = Vec::with_capacity(seeds.len());
        for (i, &seed) in seeds.iter().enumerate() {
            let outcome = run_baseline(
                kind,
                graph,
                participants,
                rewards,
                seed,
                policies.for_kind(kind),
            )?;
            let report = evaluate_plan(graph, &outcome, rewards)?;
            log::info!(
                "{kind} seed {seed}: global {:.4}, equity {:.4}",
                report.global_reward,
                report.equity_reward
            );
            per_seed.push(SeedResult {
                method: kind,
                seed,
                report,
            });
            reports.push(report);
            if i == 0 {
                plans.push(outcome);
            }
        }
        rows.push((kind, median_report(&reports)));
    }
    Ok(Comparison {
        original,
        rows,
        per_seed,
        plans,
    })
}

const ORIGINAL_LABEL: &str = "Original Status";

fn report_fields(r: &MetricsReport) -> [f64; 5] {
    [
        r.global_reward,
        r.equity_reward,
        r.equity_reward_raw,
        r.sustainability,
        r.diversity,
    ]
}

const TABLE_COLUMNS: [&str; 5] = [
    "global_reward",
    "equity_reward",
    "equity_reward_raw",
    "sustainability",
    "diversity",
];

pub fn write_comparison_csv<W: Write>(writer: W, cmp: &Comparison) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["method"];
    header.extend(TABLE_COLUMNS);
    wtr.write_record(&header)?;
    let mut emit = |label: &str, r: &MetricsReport| -> Result<()> {
        let mut row = vec![label.to_string()];
        row.extend(report_fields(r).iter().map(|v| format!("{v:.6}")));
        wtr.write_record(&row)?;
        Ok(())
    };
    emit(ORIGINAL_LABEL, &cmp.original)?;
    for (kind, r) in &cmp.rows {
        emit(kind.name(), r)?;
    }
    wtr.flush().map_err(|e| Error::io("<comparison>", e))?;
    Ok(())
}

pub fn write_per_seed_csv<W: Write>(writer: W, cmp: &Comparison) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["method", "seed"];
    header.extend(TABLE_COLUMNS);
    wtr.write_record(&header)?;
    for s in &cmp.per_seed {
        let mut row = vec![s.method.name().to_string(), s.seed.to_string()];
        row.extend(report_fields(&s.report).iter().map(|v| format!("{v:.6}")));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<per-seed>", e))?;
    Ok(())
}

/// Aligned plain-text rendering of the comparison table.
pub fn format_table(cmp: &Comparison) -> String {
    let titles = [
        "Method",
        "Global reward",
        "Equity reward",
        "Equity (raw)",
        "Sustainability",
        "Diversity",
    ];
    let mut rows = vec![titles.map(String::from).to_vec()];
    let mut push = |label: &str, r: &MetricsReport| {
        let mut row = vec![label.to_string()];
        row.extend(report_fields(r).iter().map(|v| format!("{v:.3}")));
        rows.push(row);
    };
    push(ORIGINAL_LABEL, &cmp.original);
    for (kind, r) in &cmp.rows {
        push(kind.name(), r);
    }
    let widths: Vec<usize> = (0..titles.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// `parcel_id,land_use` rows of a plan's readjusted parcels.
pub fn write_plan_csv<W: Write>(writer: W, outcome: &PlanOutcome) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["parcel_id", "land_use"])?;
    for (id, lu) in &outcome.assignment {
        wtr.write_record([id.to_string(), lu.code().to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<plan>", e))?;
    Ok(())
}
