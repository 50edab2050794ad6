//! Command-line surface: run configuration, synthetic districts, and the
//! ingest / synth / train / compare / evaluate commands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{build_roster, default_roster_spec, top_down_roster, Agent, AgentSpec};
use crate::baselines::{
    compare, evaluate_plan, format_table, parse_methods, run_baseline, write_comparison_csv,
    write_per_seed_csv, write_plan_csv, BaselineKind, TrainedPolicies,
};
use crate::environment::{write_trace, Environment, RewardConfig};
use crate::error::{Error, Result};
use crate::nn::NetConfig;
use crate::spatial_graph::{
    build_knn_graph, parse_adjacency, parse_parcels, select_readjustment_parcels, write_parcels,
    LandUse, Parcel, SpatialGraph,
};
use crate::training::{train, write_curves, PlanningMode, PolicySet, TrainConfig};

pub const PARCELS_FILE: &str = "parcels.csv";
pub const ADJACENCY_FILE: &str = "adjacency.csv";
pub const CHECKPOINT_STEM: &str = "checkpoint";
pub const CURVES_FILE: &str = "curves.csv";
pub const RUN_MANIFEST_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Raw parcel CSV read by `ingest`.
    pub parcels: Option<PathBuf>,
    /// Graph bundle directory (`parcels.csv` + `adjacency.csv`).
    pub graph: PathBuf,
    pub out: PathBuf,
    /// Participatory (MARL) checkpoint stem.
    pub checkpoint: Option<PathBuf>,
    /// Top-down (DTP) checkpoint stem.
    pub dtp_checkpoint: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            parcels: None,
            graph: PathBuf::from("graph"),
            out: PathBuf::from("out"),
            checkpoint: None,
            dtp_checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub k: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { k: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub methods: Vec<BaselineKind>,
    pub seeds: Vec<u64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                BaselineKind::Rtp,
                BaselineKind::Rpp,
                BaselineKind::Gtp,
                BaselineKind::Gpp,
            ],
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Grid spacing in meters.
    pub cell_m: f64,
    /// Parcel areas are drawn uniformly from `[area_min, area_max]` m^2.
    pub area_min: f64,
    pub area_max: f64,
    /// Coordinate jitter as a fraction of `cell_m`.
    pub jitter: f64,
    /// Relative weights of r, o, g, c, f.
    pub mix: [f64; 5],
    pub readjustable_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 6,
            height: 6,
            cell_m: 250.0,
            area_min: 20_000.0,
            area_max: 60_000.0,
            jitter: 0.15,
            mix: [0.4, 0.3, 0.05, 0.1, 0.15],
            readjustable_fraction: 0.25,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::validation(format!(
                "synthetic grid must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.readjustable_fraction) || !(0.0..=0.5).contains(&self.jitter)
        {
            return Err(Error::validation(
                "readjustable_fraction must lie in [0, 1] and jitter in [0, 0.5]",
            ));
        }
        if !(self.cell_m > 0.0) || !(self.area_min > 0.0) || self.area_max < self.area_min {
            return Err(Error::validation(
                "cell_m and areas must be positive with area_min <= area_max",
            ));
        }
        if self.mix.iter().any(|w| !(*w >= 0.0)) || !(self.mix.iter().sum::<f64>() > 0.0) {
            return Err(Error::validation(
                "land-use mix weights must be non-negative and not all zero",
            ));
        }
        Ok(())
    }
}

/// Seeded jittered grid with land uses drawn from the mix. Exactly
/// `floor(fraction * n)` parcels are flagged vacant, obsolete or open
/// space; ids run row by row from 1.
pub fn synth_parcels(spec: &SyntheticSpec) -> Result<Vec<Parcel>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.width * spec.height;
    let total: f64 = spec.mix.iter().sum();
    let mut parcels = Vec::with_capacity(n);
    for row in 0..spec.height {
        for col in 0..spec.width {
            let jx = rng.random_range(-spec.jitter..=spec.jitter);
            let jy = rng.random_range(-spec.jitter..=spec.jitter);
            let area = rng.random_range(spec.area_min..=spec.area_max);
            let mut u = rng.random::<f64>() * total;
            let mut land_use = LandUse::Facilities;
            for (lu, w) in LandUse::ALL.into_iter().zip(spec.mix) {
                if u < w {
                    land_use = lu;
                    break;
                }
                u -= w;
            }
            let id = (row * spec.width + col + 1) as u64;
            parcels.push(Parcel::new(
                id,
                land_use,
                area.round(),
                ((col as f64 + jx) * spec.cell_m * 100.0).round() / 100.0,
                ((row as f64 + jy) * spec.cell_m * 100.0).round() / 100.0,
            ));
        }
    }
    let flagged = (spec.readjustable_fraction * n as f64 + 1e-9).floor() as usize;
    let mut picks = index::sample(&mut rng, n, flagged).into_vec();
    picks.sort_unstable();
    for i in picks {
        match rng.random_range(0..3) {
            0 => parcels[i].vacant = true,
            1 => parcels[i].obsolete = true,
            _ => parcels[i].open_space = true,
        }
    }
    Ok(parcels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub seed: u64,
    pub radius_m: f64,
    pub mode: PlanningMode,
    pub net: NetConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            episodes_per_epoch: t.episodes_per_epoch,
            gamma: t.gamma,
            lr_actor: t.lr_actor,
            lr_critic: t.lr_critic,
            batch_size: t.batch_size,
            buffer_capacity: t.buffer_capacity,
            seed: t.seed,
            radius_m: t.radius_m,
            mode: PlanningMode::Participatory,
            net: t.net,
        }
    }
}

/// Everything a run needs, loaded from a TOML file and overridden by flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub graph: GraphConfig,
    pub train: TrainSection,
    pub rewards: RewardConfig,
    /// Participatory roster; defaults to one agent per role.
    pub agents: Vec<AgentSpec>,
    pub compare: CompareConfig,
    pub synth: SyntheticSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.graph.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.rewards.weights.validate()?;
        self.train_config().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            episodes_per_epoch: t.episodes_per_epoch,
            gamma: t.gamma,
            lr_actor: t.lr_actor,
            lr_critic: t.lr_critic,
            batch_size: t.batch_size,
            buffer_capacity: t.buffer_capacity,
            seed: t.seed,
            radius_m: t.radius_m,
            rewards: self.rewards.clone(),
            net: t.net.clone(),
        }
    }

    pub fn roster_specs(&self) -> Vec<AgentSpec> {
        if self.agents.is_empty() {
            default_roster_spec()
        } else {
            self.agents.clone()
        }
    }

    /// Agents for a planning mode on `graph`.
    pub fn roster(&self, graph: &SpatialGraph, mode: PlanningMode) -> Result<Vec<Agent>> {
        match mode {
            PlanningMode::TopDown => Ok(top_down_roster()),
            PlanningMode::Participatory => {
                build_roster(&self.roster_specs(), graph, self.train.radius_m)
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "parcelplan",
    version,
    about = "Participatory land-use readjustment with multi-agent RL"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a parcel CSV, select readjustable parcels and write a KNN graph bundle.
    Ingest(IngestArgs),
    /// Generate a seeded synthetic parcel CSV.
    Synth(SynthArgs),
    /// Train consensus policies on a graph bundle.
    Train(TrainArgs),
    /// Run comparison methods and write the metrics table and plans.
    Compare(CompareArgs),
    /// Roll out a trained checkpoint and report its plan metrics.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Parcel CSV (id,land_use,area,x,y,vacant,obsolete,open_space).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output graph bundle directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output parcel CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub readjustable_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Graph bundle directory.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub radius_m: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PlanningMode>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated methods, e.g. RTP,RPP,GTP,GPP,DTP,MARL.
    #[arg(long)]
    pub methods: Option<String>,
    /// Single seed; replaces the configured seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub radius_m: Option<f64>,
    /// MARL checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// DTP checkpoint.
    #[arg(long)]
    pub dtp_checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub radius_m: Option<f64>,
}

fn parse_mode(s: &str) -> std::result::Result<PlanningMode, String> {
    match s {
        "participatory" => Ok(PlanningMode::Participatory),
        "top-down" | "topdown" => Ok(PlanningMode::TopDown),
        _ => Err(format!("unknown mode {s:?} (participatory or top-down)")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Validation { line, message } => Error::Validation {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub parcels: usize,
    pub edges: usize,
    pub min_degree: usize,
    pub readjustable: usize,
    pub total_area: f64,
}

impl GraphSummary {
    pub fn of(g: &SpatialGraph) -> Self {
        Self {
            parcels: g.len(),
            edges: g.edge_count(),
            min_degree: g.min_degree(),
            readjustable: g.readjustable_ids().len(),
            total_area: g.total_area(),
        }
    }
}

impl std::fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} nodes, {} edges, min degree {}, {} readjustable parcel{}",
            self.parcels,
            self.edges,
            self.min_degree,
            self.readjustable,
            if self.readjustable == 1 { "" } else { "s" }
        )
    }
}

/// Parses parcels, selects readjustables, builds the KNN graph and writes
/// the bundle to `out`.
pub fn cmd_ingest(input: &Path, out: &Path, k: usize) -> Result<GraphSummary> {
    let mut parcels = with_path(input, parse_parcels(open(input)?))?;
    select_readjustment_parcels(&mut parcels);
    let graph = build_knn_graph(parcels, k)?;
    write_bundle(&graph, out)?;
    Ok(GraphSummary::of(&graph))
}

pub fn write_bundle(graph: &SpatialGraph, dir: &Path) -> Result<()> {
    write_parcels(create(&dir.join(PARCELS_FILE))?, graph.parcels())?;
    graph.write_adjacency(create(&dir.join(ADJACENCY_FILE))?)
}

pub fn load_bundle(dir: &Path) -> Result<SpatialGraph> {
    let pp = dir.join(PARCELS_FILE);
    let ap = dir.join(ADJACENCY_FILE);
    let mut parcels = with_path(&pp, parse_parcels(open(&pp)?))?;
    select_readjustment_parcels(&mut parcels);
    let edges = with_path(&ap, parse_adjacency(open(&ap)?))?;
    SpatialGraph::from_edges(parcels, edges)
}

pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<usize> {
    let parcels = synth_parcels(spec)?;
    write_parcels(create(out)?, &parcels)?;
    Ok(parcels.len())
}

/// Closure of a training run: enough to repeat it exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub mode: PlanningMode,
    pub config: RunConfig,
    pub agents: Vec<Agent>,
    pub checkpoint: PathBuf,
    pub curves: PathBuf,
}

pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub curves: PathBuf,
    pub manifest: PathBuf,
    pub episodes: usize,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainArtifacts> {
    cfg.validate()?;
    let graph = load_bundle(&cfg.paths.graph)?;
    let mode = cfg.train.mode;
    let agents = cfg.roster(&graph, mode)?;
    let tc = cfg.train_config();
    log::info!(
        "training {} agents ({}) for {} episodes",
        agents.len(),
        roster_summary(&agents),
        tc.total_episodes()
    );
    let env = Environment::new(graph, agents.clone(), cfg.rewards.clone())?;
    let outcome = train(&env, &tc, mode)?;

    let out = &cfg.paths.out;
    let stem = out.join(CHECKPOINT_STEM);
    outcome.policies.save(&stem, Some(&tc), tc.seed)?;
    let curves = out.join(CURVES_FILE);
    write_curves(create(&curves)?, &agents, &outcome.curves)?;
    let manifest = out.join(RUN_MANIFEST_FILE);
    write_json(
        &manifest,
        &RunManifest {
            seed: tc.seed,
            mode,
            config: cfg.clone(),
            agents,
            checkpoint: PathBuf::from(format!("{CHECKPOINT_STEM}.json")),
            curves: PathBuf::from(CURVES_FILE),
        },
    )?;
    Ok(TrainArtifacts {
        checkpoint: stem.with_extension("json"),
        curves,
        manifest,
        episodes: outcome.curves.len(),
    })
}

fn load_policy(path: Option<&PathBuf>) -> Result<Option<PolicySet>> {
    path.map(|p| PolicySet::load(p).map(|(set, _)| set))
        .transpose()
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let graph = load_bundle(&cfg.paths.graph)?;
    let participants = cfg.roster(&graph, PlanningMode::Participatory)?;
    let policies = TrainedPolicies {
        marl: load_policy(cfg.paths.checkpoint.as_ref())?,
        dtp: load_policy(cfg.paths.dtp_checkpoint.as_ref())?,
    };
    for &kind in &cfg.compare.methods {
        if kind.needs_model() && policies.for_kind(kind).is_none() {
            let flag = if kind == BaselineKind::Dtp {
                "--dtp-checkpoint"
            } else {
                "--checkpoint"
            };
            return Err(Error::MissingModel {
                method: kind.name().into(),
                hint: format!("pass {flag} with a checkpoint from `parcelplan train`"),
            });
        }
    }
    let cmp = compare(
        &graph,
        &participants,
        &cfg.rewards,
        &cfg.compare.methods,
        &cfg.compare.seeds,
        &policies,
    )?;
    let out = &cfg.paths.out;
    write_comparison_csv(create(&out.join("comparison.csv"))?, &cmp)?;
    write_per_seed_csv(create(&out.join("comparison_per_seed.csv"))?, &cmp)?;
    let table = format_table(&cmp);
    fs::write(out.join("comparison.txt"), &table)
        .map_err(|e| Error::io(out.join("comparison.txt"), e))?;
    for plan in &cmp.plans {
        let name = plan.method.name().to_lowercase();
        write_plan_csv(create(&out.join(format!("plan_{name}.csv")))?, plan)?;
        write_json(
            &out.join(format!("plan_{name}.geojson")),
            &plan.graph.to_geojson(Some(&plan.assignment)),
        )?;
    }
    Ok(table)
}

pub fn cmd_evaluate(cfg: &RunConfig, seed: u64) -> Result<String> {
    let path = cfg
        .paths
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("evaluate needs --checkpoint".into()))?;
    let graph = load_bundle(&cfg.paths.graph)?;
    let (policy, _) = PolicySet::load(path)?;
    let kind = match policy.mode {
        PlanningMode::TopDown => BaselineKind::Dtp,
        PlanningMode::Participatory => BaselineKind::Marl,
    };
    let participants = cfg.roster(&graph, PlanningMode::Participatory)?;
    let outcome = run_baseline(
        kind,
        &graph,
        &participants,
        &cfg.rewards,
        seed,
        Some(&policy),
    )?;
    let report = evaluate_plan(&graph, &outcome, &cfg.rewards)?;
    let out = &cfg.paths.out;
    write_trace(create(&out.join("trace.jsonl"))?, &outcome.trace)?;
    write_plan_csv(create(&out.join("plan.csv"))?, &outcome)?;
    write_json(
        &out.join("plan.geojson"),
        &outcome.graph.to_geojson(Some(&outcome.assignment)),
    )?;
    write_json(&out.join("metrics.json"), &report)?;
    Ok(serde_json::to_string_pretty(&report)?)
}

/// Applies flag overrides on top of the file configuration.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Ingest(a) => {
            if let Some(v) = &a.input {
                cfg.paths.parcels = Some(v.clone());
            }
            if let Some(v) = &a.out {
                cfg.paths.graph = v.clone();
            }
            if let Some(v) = a.k {
                cfg.graph.k = v;
            }
        }
        Command::Synth(a) => {
            if let Some(v) = a.seed {
                cfg.synth.seed = v;
            }
            if let Some(v) = a.width {
                cfg.synth.width = v;
            }
            if let Some(v) = a.height {
                cfg.synth.height = v;
            }
            if let Some(v) = a.readjustable_fraction {
                cfg.synth.readjustable_fraction = v;
            }
        }
        Command::Train(a) => {
            if let Some(v) = &a.graph {
                cfg.paths.graph = v.clone();
            }
            if let Some(v) = &a.out {
                cfg.paths.out = v.clone();
            }
            if let Some(v) = a.seed {
                cfg.train.seed = v;
            }
            if let Some(v) = a.epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = a.episodes {
                cfg.train.episodes_per_epoch = v;
            }
            if let Some(v) = a.radius_m {
                cfg.train.radius_m = v;
            }
            if let Some(v) = a.gamma {
                cfg.train.gamma = v;
            }
            if let Some(v) = a.mode {
                cfg.train.mode = v;
            }
        }
        Command::Compare(a) => {
            if let Some(v) = &a.graph {
                cfg.paths.graph = v.clone();
            }
            if let Some(v) = &a.out {
                cfg.paths.out = v.clone();
            }
            if let Some(v) = &a.methods {
                cfg.compare.methods = parse_methods(v)?;
            }
            if let Some(v) = a.seed {
                cfg.compare.seeds = vec![v];
            }
            if let Some(v) = a.radius_m {
                cfg.train.radius_m = v;
            }
            if let Some(v) = &a.checkpoint {
                cfg.paths.checkpoint = Some(v.clone());
            }
            if let Some(v) = &a.dtp_checkpoint {
                cfg.paths.dtp_checkpoint = Some(v.clone());
            }
        }
        Command::Evaluate(a) => {
            if let Some(v) = &a.graph {
                cfg.paths.graph = v.clone();
            }
            if let Some(v) = &a.out {
                cfg.paths.out = v.clone();
            }
            if let Some(v) = &a.checkpoint {
                cfg.paths.checkpoint = Some(v.clone());
            }
            if let Some(v) = a.radius_m {
                cfg.train.radius_m = v;
            }
        }
    }
    Ok(cfg)
}

/// Runs a parsed command line and returns the text to print.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Ingest(_) => {
            let input = cfg
                .paths
                .parcels
                .as_ref()
                .ok_or_else(|| Error::Config("ingest needs --input or paths.parcels".into()))?;
            let summary = cmd_ingest(input, &cfg.paths.graph, cfg.graph.k)?;
            Ok(format!("{summary}\nwrote {}", cfg.paths.graph.display()))
        }
        Command::Synth(a) => {
            let n = cmd_synth(&cfg.synth, &a.out)?;
            Ok(format!("wrote {n} parcels to {}", a.out.display()))
        }
        Command::Train(_) => {
            let art = cmd_train(&cfg)?;
            Ok(format!(
                "trained {} episodes\ncheckpoint {}\ncurves {}\nmanifest {}",
                art.episodes,
                art.checkpoint.display(),
                art.curves.display(),
                art.manifest.display()
            ))
        }
        Command::Compare(_) => cmd_compare(&cfg),
        Command::Evaluate(a) => cmd_evaluate(&cfg, a.seed.unwrap_or(cfg.train.seed)),
    }
}

/// Role counts of a roster, for log lines.
pub fn roster_summary(agents: &[Agent]) -> String {
    let mut counts: BTreeMap<_, usize> = BTreeMap::new();
    for a in agents {
        *counts.entry(a.role).or_default() += 1;
    }
    counts
        .iter()
        .map(|(r, n)| format!("{r}={n}"))
        .collect::<Vec<_>>()
        .join(" ")
}
