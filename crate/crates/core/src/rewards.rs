//! The four reward tiers (self, local, global, equity) and their weighted
//! combination.

use serde::{Deserialize, Serialize};

use crate::agents::{expected_benefit, AgentRole};
use crate::error::{Error, Result};
use crate::spatial_graph::{LandUse, SpatialGraph};

/// Weights of the self, local, global and equity tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub self_awareness: f64,
    pub local: f64,
    pub global: f64,
    pub equity: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            self_awareness: 1.0,
            local: 1.0,
            global: 1.0,
            equity: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn new(self_awareness: f64, local: f64, global: f64, equity: f64) -> Self {
        Self {
            self_awareness,
            local,
            global,
            equity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.self_awareness, self.local, self.global, self.equity];
        if all.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Config(format!(
                "reward weights must be finite and non-negative, got {all:?}"
            )));
        }
        Ok(())
    }
}

/// How land-use proportions are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShareMode {
    /// Share of total district area.
    #[default]
    Area,
    /// Share of parcel count.
    Count,
}

/// Per-role decision acceptance. `accepted_area` is normalized by the total
/// district area; `accepted_area_raw` keeps square meters for reporting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceLedger {
    pub accepted_area: [f64; 5],
    pub accepted_area_raw: [f64; 5],
    /// `[role][land use]` count of adopted preferences.
    pub request_counts: [[u32; 5]; 5],
}

impl AcceptanceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, role: AgentRole, adopted: LandUse, area_fraction: f64, area_m2: f64) {
        self.accepted_area[role.ordinal()] += area_fraction;
        self.accepted_area_raw[role.ordinal()] += area_m2;
        self.request_counts[role.ordinal()][adopted.ordinal()] += 1;
    }

    pub fn accepted(&self, role: AgentRole) -> f64 {
        self.accepted_area[role.ordinal()]
    }

    pub fn request_count(&self, role: AgentRole, land_use: LandUse) -> u32 {
        self.request_counts[role.ordinal()][land_use.ordinal()]
    }
}

/// `r_I`: the role's expected benefit of the voted land use.
pub fn self_reward(role: AgentRole, action: LandUse) -> f64 {
    expected_benefit(role, action)
}

/// `r_L = r_I * 2^-n` where `n` counts earlier adoptions of the same
/// (role, land use) preference.
pub fn local_reward(role: AgentRole, action: LandUse, n: u32) -> f64 {
    self_reward(role, action) * 0.5f64.powi(n as i32)
}

/// Proportion of each land use over the district, indexed by ordinal.
pub fn land_use_shares(graph: &SpatialGraph, mode: ShareMode) -> Result<[f64; 5]> {
    let mut totals = [0.0; 5];
    for p in graph.parcels() {
        totals[p.land_use.ordinal()] += match mode {
            ShareMode::Area => p.area,
            ShareMode::Count => 1.0,
        };
    }
    let sum: f64 = totals.iter().sum();
    if graph.is_empty() || !(sum > 0.0) {
        return Err(Error::Domain("district has no area".into()));
    }
    Ok(totals.map(|t| t / sum))
}

pub fn density_score(graph: &SpatialGraph, target_uses: &[LandUse]) -> Result<f64> {
    density_score_with(graph, target_uses, ShareMode::Area)
}

/// Combined share of the target land uses; duplicates in `target_uses`
/// are counted once.
pub fn density_score_with(
    graph: &SpatialGraph,
    target_uses: &[LandUse],
    mode: ShareMode,
) -> Result<f64> {
    let shares = land_use_shares(graph, mode)?;
    Ok(density_from_shares(&shares, target_uses))
}

pub fn density_from_shares(shares: &[f64; 5], target_uses: &[LandUse]) -> f64 {
    let mut wanted = [false; 5];
    for u in target_uses {
        wanted[u.ordinal()] = true;
    }
    shares
        .iter()
        .zip(wanted)
        .filter(|(_, w)| *w)
        .map(|(s, _)| s)
        .sum::<f64>()
        .min(1.0)
}

/// Shannon index over land-use shares; absent types contribute nothing.
pub fn diversity_score(graph: &SpatialGraph) -> Result<f64> {
    diversity_score_with(graph, ShareMode::Area)
}

pub fn diversity_score_with(graph: &SpatialGraph, mode: ShareMode) -> Result<f64> {
    Ok(shannon_index(&land_use_shares(graph, mode)?))
}

pub fn shannon_index(shares: &[f64]) -> f64 {
    let h: f64 = shares
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}

/// `r_G`: density of the planning target uses plus Shannon diversity.
pub fn global_reward(graph: &SpatialGraph, planning_target_uses: &[LandUse]) -> Result<f64> {
    global_reward_with(graph, planning_target_uses, ShareMode::Area)
}

pub fn global_reward_with(
    graph: &SpatialGraph,
    targets: &[LandUse],
    mode: ShareMode,
) -> Result<f64> {
    let shares = land_use_shares(graph, mode)?;
    Ok(density_from_shares(&shares, targets) + shannon_index(&shares))
}

/// `r_E` from the normalized tallies in the ledger.
pub fn equity_reward(ledger: &AcceptanceLedger) -> f64 {
    equity_from_tallies(&ledger.accepted_area)
}

/// `-(popstd(low, mid, high) + |professionals - residents|)` over tallies
/// indexed by role ordinal.
pub fn equity_from_tallies(tallies: &[f64; 5]) -> f64 {
    let [planners, developers, low, mid, high] = *tallies;
    let residents = low + mid + high;
    let professionals = planners + developers;
    let mean = residents / 3.0;
    let var = ((low - mean).powi(2) + (mid - mean).powi(2) + (high - mean).powi(2)) / 3.0;
    -(var.sqrt() + (professionals - residents).abs())
}

/// `r = b1*r_I + b2*r_L + b3*r_G + b4*r_E`.
pub fn combined_reward(
    r_self: f64,
    r_local: f64,
    r_global: f64,
    r_equity: f64,
    w: &RewardWeights,
) -> f64 {
    w.self_awareness * r_self + w.local * r_local + w.global * r_global + w.equity * r_equity
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial_graph::Parcel;

    fn district(parts: &[(LandUse, f64)]) -> SpatialGraph {
        let ps = parts
            .iter()
            .enumerate()
            .map(|(i, &(u, a))| Parcel::new(i as u64, u, a, i as f64, 0.0))
            .collect();
        SpatialGraph::from_edges(ps, []).unwrap()
    }

    use LandUse::*;

    #[test]
    fn self_reward_examples() {
        assert_eq!(self_reward(AgentRole::Developers, Green), 1.0);
        assert_eq!(self_reward(AgentRole::Mid, Office), 0.5);
        assert_eq!(self_reward(AgentRole::Low, Residential), 0.0);
    }

    #[test]
    fn local_reward_halves() {
        let role = AgentRole::Planners;
        assert_eq!(local_reward(role, Residential, 0), 1.0);
        assert_eq!(local_reward(role, Residential, 1), 0.5);
        assert_eq!(local_reward(role, Residential, 2), 0.25);
        assert_eq!(local_reward(AgentRole::Low, Residential, 0), 0.0);
    }

    #[test]
    fn density_examples() {
        let g = district(&[(Green, 30.0), (Commercial, 10.0), (Residential, 60.0)]);
        assert!((density_score(&g, &[Green]).unwrap() - 0.3).abs() < 1e-12);
        assert!((density_score(&g, &[Green, Commercial]).unwrap() - 0.4).abs() < 1e-12);
        assert!((density_score(&g, &LandUse::ALL).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(density_score(&g, &[]).unwrap(), 0.0);
    }

    #[test]
    fn count_mode_density() {
        let g = district(&[(Green, 90.0), (Residential, 5.0), (Residential, 5.0)]);
        let by_count = density_score_with(&g, &[Green], ShareMode::Count).unwrap();
        assert!((by_count - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_district_is_domain_error() {
        let g = district(&[]);
        assert!(matches!(density_score(&g, &[Green]), Err(Error::Domain(_))));
        assert!(matches!(diversity_score(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn diversity_examples() {
        let uniform = district(&LandUse::ALL.map(|u| (u, 20.0)));
        assert!((diversity_score(&uniform).unwrap() - 5f64.ln()).abs() < 1e-12);
        let single = district(&[(Office, 3.0), (Office, 7.0)]);
        assert_eq!(diversity_score(&single).unwrap(), 0.0);
        let two = district(&[(Office, 80.0), (Green, 20.0)]);
        assert!((diversity_score(&two).unwrap() - 0.500402).abs() < 1e-6);
    }

    #[test]
    fn global_examples() {
        let uniform = district(&LandUse::ALL.map(|u| (u, 20.0)));
        let r = global_reward(&uniform, &[Green, Commercial]).unwrap();
        assert!((r - (0.4 + 5f64.ln())).abs() < 1e-12);
        assert!((r - 2.00944).abs() < 1e-5);
        let green = district(&[(Green, 4.0)]);
        assert_eq!(global_reward(&green, &[Green]).unwrap(), 1.0);
        assert_eq!(
            global_reward(&uniform, &[]).unwrap(),
            diversity_score(&uniform).unwrap()
        );
    }

    #[test]
    fn equity_examples() {
        assert_eq!(equity_from_tallies(&[15.0, 15.0, 10.0, 10.0, 10.0]), 0.0);
        let r = equity_from_tallies(&[5.0, 0.0, 10.0, 20.0, 30.0]);
        assert!((r + 63.16497).abs() < 1e-5);
        assert_eq!(equity_reward(&AcceptanceLedger::new()), 0.0);
    }

    #[test]
    fn combined_examples() {
        let ones = RewardWeights::default();
        assert_eq!(combined_reward(1.0, 0.5, 2.0, -3.0, &ones), 0.5);
        let zeros = RewardWeights::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(combined_reward(7.0, 1.0, -2.0, 3.0, &zeros), 0.0);
        let g = RewardWeights::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(combined_reward(9.0, 9.0, 1.7, -9.0, &g), 1.7);
    }

    #[test]
    fn weights_validation() {
        assert!(RewardWeights::default().validate().is_ok());
        assert!(RewardWeights::new(-1.0, 0.0, 0.0, 0.0).validate().is_err());
        assert!(RewardWeights::new(f64::NAN, 0.0, 0.0, 0.0)
            .validate()
            .is_err());
    }

    #[test]
    fn ledger_records() {
        let mut l = AcceptanceLedger::new();
        l.record(AgentRole::Mid, Green, 0.1, 100.0);
        l.record(AgentRole::Mid, Green, 0.2, 200.0);
        assert!((l.accepted(AgentRole::Mid) - 0.3).abs() < 1e-12);
        assert_eq!(l.accepted_area_raw[AgentRole::Mid.ordinal()], 300.0);
        assert_eq!(l.request_count(AgentRole::Mid, Green), 2);
        assert_eq!(l.request_count(AgentRole::Low, Green), 0);
    }
}
