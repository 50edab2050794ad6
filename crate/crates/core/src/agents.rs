//! Stakeholder roles, agent placement and the expected benefit matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial_graph::{LandUse, ParcelId, SpatialGraph};

/// Walkable radius of a resident's neighborhood, in meters.
pub const WALKABLE_RADIUS_M: f64 = 1250.0;

/// Stakeholder roles; ordinals index the rows of [`EXPECTED_BENEFIT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Planners,
    Developers,
    Low,
    Mid,
    High,
}

impl AgentRole {
    pub const COUNT: usize = 5;
    pub const ALL: [AgentRole; 5] = [
        AgentRole::Planners,
        AgentRole::Developers,
        AgentRole::Low,
        AgentRole::Mid,
        AgentRole::High,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn is_resident(self) -> bool {
        matches!(self, AgentRole::Low | AgentRole::Mid | AgentRole::High)
    }

    pub fn is_professional(self) -> bool {
        !self.is_resident()
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentRole::Planners => "planners",
            AgentRole::Developers => "developers",
            AgentRole::Low => "low",
            AgentRole::Mid => "mid",
            AgentRole::High => "high",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown agent role {s:?}")))
    }
}

/// Rows: planners, developers, low, mid, high. Columns: r, o, g, c, f.
pub const EXPECTED_BENEFIT: [[f64; 5]; 5] = [
    [1.0, 1.0, 1.0, 0.5, 0.5],
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [0.0, 1.0, 1.0, 0.0, 0.5],
    [1.0, 0.5, 1.0, 0.5, 0.5],
    [1.0, 0.0, 0.5, 1.0, 0.5],
];

pub fn expected_benefit(role: AgentRole, land_use: LandUse) -> f64 {
    EXPECTED_BENEFIT[role.ordinal()][land_use.ordinal()]
}

/// The land use with the highest expected benefit for `role`; ties go to
/// the lowest land-use ordinal.
pub fn greedy_vote(role: AgentRole) -> LandUse {
    let row = &EXPECTED_BENEFIT[role.ordinal()];
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    LandUse::ALL[best]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: usize,
    pub role: AgentRole,
    /// Residents only.
    pub home_parcel: Option<ParcelId>,
    /// `f64::INFINITY` for professionals.
    pub observation_radius_m: f64,
}

impl Agent {
    pub fn professional(id: usize, role: AgentRole) -> Self {
        Self {
            id,
            role,
            home_parcel: None,
            observation_radius_m: f64::INFINITY,
        }
    }

    pub fn resident(id: usize, role: AgentRole, home: ParcelId, radius_m: f64) -> Self {
        Self {
            id,
            role,
            home_parcel: Some(home),
            observation_radius_m: radius_m,
        }
    }
}

/// One roster line from the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub role: AgentRole,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_parcel: Option<ParcelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
}

fn one() -> usize {
    1
}

/// One representative per role.
pub fn default_roster_spec() -> Vec<AgentSpec> {
    AgentRole::ALL
        .into_iter()
        .map(|role| AgentSpec {
            role,
            count: 1,
            home_parcel: None,
            radius_m: None,
        })
        .collect()
}

/// Default home of each income bracket: residential parcels are sorted by
/// area and split into terciles; low, mid and high take the largest parcel
/// of the first, second and third tercile. Falls back to all parcels when
/// the district has no residential parcel.
pub fn default_home(graph: &SpatialGraph, role: AgentRole) -> Option<ParcelId> {
    let tercile = match role {
        AgentRole::Low => 0,
        AgentRole::Mid => 1,
        AgentRole::High => 2,
        _ => return None,
    };
    let mut pool: Vec<_> = graph
        .parcels()
        .iter()
        .filter(|p| p.land_use == LandUse::Residential)
        .collect();
    if pool.is_empty() {
        pool = graph.parcels().iter().collect();
    }
    if pool.is_empty() {
        return None;
    }
    pool.sort_by(|a, b| a.area.total_cmp(&b.area).then(a.id.cmp(&b.id)));
    let n = pool.len();
    let pick = ((tercile + 1) * n).div_ceil(3).max(1) - 1;
    Some(pool[pick].id)
}

/// Expands roster specs into agents with sequential ids.
pub fn build_roster(
    specs: &[AgentSpec],
    graph: &SpatialGraph,
    default_radius_m: f64,
) -> Result<Vec<Agent>> {
    let mut agents = Vec::new();
    for spec in specs {
        for _ in 0..spec.count {
            let id = agents.len();
            let agent = if spec.role.is_resident() {
                let home = match spec.home_parcel {
                    Some(h) => h,
                    None => default_home(graph, spec.role).ok_or_else(|| {
                        Error::Config(format!("no home parcel available for {}", spec.role))
                    })?,
                };
                if graph.index_of(home).is_none() {
                    return Err(Error::Config(format!(
                        "home parcel {home} of {} agent is not in the graph",
                        spec.role
                    )));
                }
                let radius = spec.radius_m.unwrap_or(default_radius_m);
                if !(radius >= 0.0) {
                    return Err(Error::Config(format!("invalid radius {radius}")));
                }
                Agent::resident(id, spec.role, home, radius)
            } else {
                if spec.home_parcel.is_some() {
                    return Err(Error::Config(format!(
                        "{} agents observe the whole district and take no home parcel",
                        spec.role
                    )));
                }
                Agent::professional(id, spec.role)
            };
            agents.push(agent);
        }
    }
    if agents.is_empty() {
        return Err(Error::Config("agent roster is empty".into()));
    }
    Ok(agents)
}

/// Top-down planning: a single planner decides alone.
pub fn top_down_roster() -> Vec<Agent> {
    vec![Agent::professional(0, AgentRole::Planners)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial_graph::{build_knn_graph, Parcel};

    #[test]
    fn matrix_examples() {
        assert_eq!(
            expected_benefit(AgentRole::Planners, LandUse::Residential),
            1.0
        );
        assert_eq!(expected_benefit(AgentRole::Low, LandUse::Commercial), 0.0);
        assert_eq!(expected_benefit(AgentRole::High, LandUse::Office), 0.0);
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_vote(AgentRole::Planners), LandUse::Residential);
        assert_eq!(greedy_vote(AgentRole::Developers), LandUse::Residential);
        assert_eq!(greedy_vote(AgentRole::Low), LandUse::Office);
        assert_eq!(greedy_vote(AgentRole::Mid), LandUse::Residential);
        assert_eq!(greedy_vote(AgentRole::High), LandUse::Residential);
    }

    #[test]
    fn greedy_attains_row_max() {
        for role in AgentRole::ALL {
            let max = EXPECTED_BENEFIT[role.ordinal()]
                .iter()
                .cloned()
                .fold(f64::MIN, f64::max);
            assert_eq!(expected_benefit(role, greedy_vote(role)), max);
        }
    }

    #[test]
    fn entries_are_discrete() {
        for row in EXPECTED_BENEFIT {
            for v in row {
                assert!(v == 0.0 || v == 0.5 || v == 1.0);
            }
        }
    }

    fn district() -> SpatialGraph {
        let areas = [10.0, 50.0, 20.0, 40.0, 30.0, 60.0, 5.0];
        let uses = [
            LandUse::Residential,
            LandUse::Residential,
            LandUse::Residential,
            LandUse::Residential,
            LandUse::Residential,
            LandUse::Residential,
            LandUse::Office,
        ];
        let ps = areas
            .iter()
            .zip(uses)
            .enumerate()
            .map(|(i, (&a, u))| Parcel::new(i as u64 + 1, u, a, i as f64 * 100.0, 0.0))
            .collect();
        build_knn_graph(ps, 2).unwrap()
    }

    #[test]
    fn tercile_homes() {
        // residential areas sorted: 10(1) 20(3) | 30(5) 40(4) | 50(2) 60(6)
        let g = district();
        assert_eq!(default_home(&g, AgentRole::Low), Some(3));
        assert_eq!(default_home(&g, AgentRole::Mid), Some(4));
        assert_eq!(default_home(&g, AgentRole::High), Some(6));
        assert_eq!(default_home(&g, AgentRole::Planners), None);
    }

    #[test]
    fn roster_defaults() {
        let g = district();
        let agents = build_roster(&default_roster_spec(), &g, WALKABLE_RADIUS_M).unwrap();
        assert_eq!(agents.len(), 5);
        for (i, a) in agents.iter().enumerate() {
            assert_eq!(a.id, i);
            assert_eq!(a.role.is_resident(), a.home_parcel.is_some());
            if a.role.is_professional() {
                assert!(a.observation_radius_m.is_infinite());
            } else {
                assert_eq!(a.observation_radius_m, WALKABLE_RADIUS_M);
            }
        }
    }

    #[test]
    fn roster_rejects_bad_home() {
        let g = district();
        let specs = [AgentSpec {
            role: AgentRole::Low,
            count: 1,
            home_parcel: Some(999),
            radius_m: None,
        }];
        assert!(matches!(
            build_roster(&specs, &g, 1250.0),
            Err(Error::Config(_))
        ));
        let specs = [AgentSpec {
            role: AgentRole::Planners,
            count: 1,
            home_parcel: Some(1),
            radius_m: None,
        }];
        assert!(build_roster(&specs, &g, 1250.0).is_err());
    }

    #[test]
    fn role_parse() {
        assert_eq!("Mid".parse::<AgentRole>().unwrap(), AgentRole::Mid);
        assert!("citizens".parse::<AgentRole>().is_err());
    }
}
