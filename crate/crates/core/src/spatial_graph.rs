//! Parcel data model, CSV/GeoJSON ingestion and emission, KNN adjacency
//! construction and distance-bounded observation subgraphs.
//!
//! Coordinates are planar meters. Data in latitude/longitude must be
//! projected by the caller before ingestion.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

/// Edges between parcels with coincident coordinates are stored with this
/// distance so that every listed edge stays strictly positive.
pub const MIN_EDGE_DISTANCE_M: f64 = 1e-6;

pub type ParcelId = u64;

/// The five general land-use types with fixed ordinals `r=0 .. f=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandUse {
    #[serde(rename = "r")]
    Residential,
    #[serde(rename = "o")]
    Office,
    #[serde(rename = "g")]
    Green,
    #[serde(rename = "c")]
    Commercial,
    #[serde(rename = "f")]
    Facilities,
}

impl LandUse {
    pub const COUNT: usize = 5;
    pub const ALL: [LandUse; 5] = [
        LandUse::Residential,
        LandUse::Office,
        LandUse::Green,
        LandUse::Commercial,
        LandUse::Facilities,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        Self::ALL.get(ordinal).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            LandUse::Residential => "r",
            LandUse::Office => "o",
            LandUse::Green => "g",
            LandUse::Commercial => "c",
            LandUse::Facilities => "f",
        }
    }
}

impl fmt::Display for LandUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for LandUse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "r" => Ok(LandUse::Residential),
            "o" => Ok(LandUse::Office),
            "g" => Ok(LandUse::Green),
            "c" => Ok(LandUse::Commercial),
            "f" => Ok(LandUse::Facilities),
            other => Err(Error::validation(format!(
                "unknown land use code {other:?} (expected one of r,o,g,c,f)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parcel {
    pub id: ParcelId,
    pub land_use: LandUse,
    /// Square meters, strictly positive.
    pub area: f64,
    pub x: f64,
    pub y: f64,
    pub vacant: bool,
    pub obsolete: bool,
    pub open_space: bool,
    pub readjustable: bool,
    pub assigned: bool,
}

impl Parcel {
    pub fn new(id: ParcelId, land_use: LandUse, area: f64, x: f64, y: f64) -> Self {
        Self {
            id,
            land_use,
            area,
            x,
            y,
            vacant: false,
            obsolete: false,
            open_space: false,
            readjustable: false,
            assigned: false,
        }
    }

    pub fn distance_to(&self, other: &Parcel) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn meets_readjustment_criteria(&self) -> bool {
        self.vacant || self.obsolete || self.open_space
    }
}

pub const PARCEL_CSV_HEADER: [&str; 8] = [
    "id",
    "land_use",
    "area",
    "x",
    "y",
    "vacant",
    "obsolete",
    "open_space",
];

fn parse_bool(cell: &str) -> Option<bool> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" | "" => Some(false),
        _ => None,
    }
}

/// Parses the parcel ingestion CSV. `readjustable` and `assigned` start out
/// false; call [`select_readjustment_parcels`] to populate the former.
pub fn parse_parcels<R: Read>(reader: R) -> Result<Vec<Parcel>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let mut column = [0usize; 8];
    for (slot, name) in column.iter_mut().zip(PARCEL_CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column {name:?} in header"),
            })?;
    }

    let mut parcels = Vec::new();
    let mut seen = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize| record.get(column[i]).unwrap_or("");
        let malformed = |what: &str, value: &str| Error::Parse {
            line,
            message: format!("invalid {what} {value:?}"),
        };

        let id: ParcelId = cell(0).parse().map_err(|_| malformed("id", cell(0)))?;
        let land_use: LandUse = cell(1).parse().map_err(|e: Error| Error::Validation {
            line: Some(line),
            message: match e {
                Error::Validation { message, .. } => message,
                other => other.to_string(),
            },
        })?;
        let area: f64 = cell(2).parse().map_err(|_| malformed("area", cell(2)))?;
        let x: f64 = cell(3).parse().map_err(|_| malformed("x", cell(3)))?;
        let y: f64 = cell(4).parse().map_err(|_| malformed("y", cell(4)))?;
        let flag =
            |i: usize, name: &str| parse_bool(cell(i)).ok_or_else(|| malformed(name, cell(i)));
        let vacant = flag(5, "vacant")?;
        let obsolete = flag(6, "obsolete")?;
        let open_space = flag(7, "open_space")?;

        if !(area > 0.0) || !area.is_finite() {
            return Err(Error::Validation {
                line: Some(line),
                message: format!("parcel {id}: area must be positive, got {area}"),
            });
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Validation {
                line: Some(line),
                message: format!("parcel {id}: coordinates must be finite"),
            });
        }
        if !seen.insert(id) {
            return Err(Error::Validation {
                line: Some(line),
                message: format!("duplicate parcel id {id}"),
            });
        }

        let mut parcel = Parcel::new(id, land_use, area, x, y);
        parcel.vacant = vacant;
        parcel.obsolete = obsolete;
        parcel.open_space = open_space;
        parcels.push(parcel);
    }
    Ok(parcels)
}

/// Writes parcels in the ingestion schema; the output reparses to an equal
/// collection.
pub fn write_parcels<W: Write>(writer: W, parcels: &[Parcel]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(PARCEL_CSV_HEADER)?;
    for p in parcels {
        wtr.write_record([
            p.id.to_string(),
            p.land_use.code().to_string(),
            p.area.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.vacant.to_string(),
            p.obsolete.to_string(),
            p.open_space.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Returns the ids of parcels that are vacant, obsolete or open space and
/// marks them readjustable.
pub fn select_readjustment_parcels(parcels: &mut [Parcel]) -> BTreeSet<ParcelId> {
    let mut selected = BTreeSet::new();
    for p in parcels.iter_mut() {
        if p.meets_readjustment_criteria() {
            p.readjustable = true;
            selected.insert(p.id);
        }
    }
    selected
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Index of the neighbor in the owning graph's parcel list.
    pub to: usize,
    pub distance: f64,
}

/// Parcels plus symmetric distance-weighted adjacency. The topology is
/// shared behind `Arc`s so cloning a graph to mutate land uses is cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    parcels: Vec<Parcel>,
    adjacency: Arc<Vec<Vec<Edge>>>,
    index: Arc<HashMap<ParcelId, usize>>,
}

impl SpatialGraph {
    /// Builds a graph from parcels and `(id, id, distance)` edges. Edges are
    /// symmetrized; duplicate pairs keep the first distance seen.
    pub fn from_edges(
        parcels: Vec<Parcel>,
        edges: impl IntoIterator<Item = (ParcelId, ParcelId, f64)>,
    ) -> Result<Self> {
        let index = build_index(&parcels)?;
        let n = parcels.len();
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, d) in edges {
            let ia = *index
                .get(&a)
                .ok_or_else(|| Error::Lookup(format!("edge references unknown parcel {a}")))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| Error::Lookup(format!("edge references unknown parcel {b}")))?;
            if ia == ib {
                return Err(Error::validation(format!("self-edge on parcel {a}")));
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::validation(format!(
                    "edge {a}-{b}: distance must be positive, got {d}"
                )));
            }
            let key = (ia.min(ib), ia.max(ib));
            pairs.entry(key).or_insert(d);
        }
        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &d) in &pairs {
            adjacency[i].push(Edge { to: j, distance: d });
            adjacency[j].push(Edge { to: i, distance: d });
        }
        for list in &mut adjacency {
            sort_edges(list, &parcels);
        }
        Ok(Self {
            parcels,
            adjacency: Arc::new(adjacency),
            index: Arc::new(index),
        })
    }

    pub fn len(&self) -> usize {
        self.parcels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parcels.is_empty()
    }

    pub fn parcels(&self) -> &[Parcel] {
        &self.parcels
    }

    pub fn parcel(&self, idx: usize) -> &Parcel {
        &self.parcels[idx]
    }

    pub(crate) fn parcel_mut(&mut self, idx: usize) -> &mut Parcel {
        &mut self.parcels[idx]
    }

    pub fn index_of(&self, id: ParcelId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn parcel_by_id(&self, id: ParcelId) -> Option<&Parcel> {
        self.index_of(id).map(|i| &self.parcels[i])
    }

    pub fn neighbors(&self, idx: usize) -> &[Edge] {
        &self.adjacency[idx]
    }

    /// Neighbor list of a parcel as `(neighbor id, distance)` pairs.
    pub fn adjacency_of(&self, id: ParcelId) -> Option<Vec<(ParcelId, f64)>> {
        let idx = self.index_of(id)?;
        Some(
            self.adjacency[idx]
                .iter()
                .map(|e| (self.parcels[e.to].id, e.distance))
                .collect(),
        )
    }

    /// Every directed edge `(from id, to id, distance)`, both directions listed.
    pub fn edges(&self) -> impl Iterator<Item = (ParcelId, ParcelId, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(move |(i, list)| {
                list.iter()
                    .map(move |e| (self.parcels[i].id, self.parcels[e.to].id, e.distance))
            })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn min_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn total_area(&self) -> f64 {
        self.parcels.iter().map(|p| p.area).sum()
    }

    pub fn readjustable_ids(&self) -> Vec<ParcelId> {
        let mut ids: Vec<_> = self
            .parcels
            .iter()
            .filter(|p| p.readjustable)
            .map(|p| p.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Gaussian kernel transform `exp(-(d/h)^2)` of every undirected edge.
    /// Reported as a statistic only; routing always uses raw distances.
    pub fn kernel_weights(&self, bandwidth_m: f64) -> Vec<(ParcelId, ParcelId, f64)> {
        self.edges()
            .filter(|(a, b, _)| a < b)
            .map(|(a, b, d)| (a, b, (-(d / bandwidth_m).powi(2)).exp()))
            .collect()
    }

    /// Shortest-path distances from `origin` over edge distances. Nodes
    /// farther than `limit` are left at `f64::INFINITY`.
    pub fn shortest_path_distances(&self, origin: usize, limit: f64) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[origin] = 0.0;
        heap.push(Frontier {
            cost: 0.0,
            node: origin,
        });
        while let Some(Frontier { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for e in &self.adjacency[node] {
                let next = cost + e.distance;
                if next <= limit && next < dist[e.to] {
                    dist[e.to] = next;
                    heap.push(Frontier {
                        cost: next,
                        node: e.to,
                    });
                }
            }
        }
        dist
    }

    /// Indices (ascending) of all parcels within `radius_m` path distance.
    pub fn nodes_within(&self, origin: usize, radius_m: f64) -> Vec<usize> {
        self.shortest_path_distances(origin, radius_m)
            .iter()
            .enumerate()
            .filter(|(_, d)| **d <= radius_m)
            .map(|(i, _)| i)
            .collect()
    }

    /// Induced subgraph on the given parcel indices, kept in the given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> SpatialGraph {
        let keep: HashMap<usize, usize> = nodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let parcels: Vec<Parcel> = nodes.iter().map(|&g| self.parcels[g].clone()).collect();
        let adjacency = nodes
            .iter()
            .map(|&g| {
                self.adjacency[g]
                    .iter()
                    .filter_map(|e| {
                        keep.get(&e.to).map(|&l| Edge {
                            to: l,
                            distance: e.distance,
                        })
                    })
                    .collect()
            })
            .collect();
        let index = parcels.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        SpatialGraph {
            parcels,
            adjacency: Arc::new(adjacency),
            index: Arc::new(index),
        }
    }

    /// Writes the adjacency list as `src,dst,distance`, both directions.
    pub fn write_adjacency<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["src", "dst", "distance"])?;
        for (a, b, d) in self.edges() {
            wtr.write_record([a.to_string(), b.to_string(), d.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// GeoJSON FeatureCollection of Point features, one per parcel.
    /// `assignment` supplies the planned land use of readjusted parcels.
    pub fn to_geojson(
        &self,
        assignment: Option<&BTreeMap<ParcelId, LandUse>>,
    ) -> serde_json::Value {
        let features: Vec<_> = self
            .parcels
            .iter()
            .map(|p| {
                let assigned = assignment.and_then(|a| a.get(&p.id)).map(|u| u.code());
                json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [p.x, p.y] },
                    "properties": {
                        "id": p.id,
                        "land_use": p.land_use.code(),
                        "area": p.area,
                        "assigned_land_use": assigned,
                    }
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

/// Reads an adjacency CSV written by [`SpatialGraph::write_adjacency`].
pub fn parse_adjacency<R: Read>(reader: R) -> Result<Vec<(ParcelId, ParcelId, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = || Error::Parse {
            line,
            message: "expected src,dst,distance".into(),
        };
        if record.len() != 3 {
            return Err(bad());
        }
        let a = record[0].parse().map_err(|_| bad())?;
        let b = record[1].parse().map_err(|_| bad())?;
        let d = record[2].parse().map_err(|_| bad())?;
        edges.push((a, b, d));
    }
    Ok(edges)
}

/// Connects each parcel to its `k` nearest parcels by Euclidean distance and
/// symmetrizes the edge set by union. Equal distances break by ascending id.
pub fn build_knn_graph(parcels: Vec<Parcel>, k: usize) -> Result<SpatialGraph> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if parcels.len() < k + 1 {
        return Err(Error::Config(format!(
            "KNN with k={k} needs at least {} parcels, got {}",
            k + 1,
            parcels.len()
        )));
    }
    if let Some(p) = parcels
        .iter()
        .find(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(Error::validation(format!(
            "parcel {}: coordinates must be finite",
            p.id
        )));
    }

    let mut edges = Vec::with_capacity(parcels.len() * k);
    let mut candidates: Vec<(f64, ParcelId)> = Vec::with_capacity(parcels.len());
    for p in &parcels {
        candidates.clear();
        candidates.extend(
            parcels
                .iter()
                .filter(|q| q.id != p.id)
                .map(|q| (p.distance_to(q), q.id)),
        );
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, q) in candidates.iter().take(k) {
            edges.push((p.id, q, d.max(MIN_EDGE_DISTANCE_M)));
        }
    }
    SpatialGraph::from_edges(parcels, edges)
}

/// Induced subgraph on all parcels within `radius_m` shortest-path distance
/// of `origin_id`, origin included.
pub fn observation_subgraph(
    graph: &SpatialGraph,
    origin_id: ParcelId,
    radius_m: f64,
) -> Result<SpatialGraph> {
    let origin = graph
        .index_of(origin_id)
        .ok_or_else(|| Error::Lookup(format!("unknown origin parcel {origin_id}")))?;
    Ok(graph.induced_subgraph(&graph.nodes_within(origin, radius_m)))
}

fn build_index(parcels: &[Parcel]) -> Result<HashMap<ParcelId, usize>> {
    let mut index = HashMap::with_capacity(parcels.len());
    for (i, p) in parcels.iter().enumerate() {
        if !(p.area > 0.0) {
            return Err(Error::validation(format!(
                "parcel {}: area must be positive",
                p.id
            )));
        }
        if p.assigned && !p.readjustable {
            return Err(Error::validation(format!(
                "parcel {} is assigned but not readjustable",
                p.id
            )));
        }
        if index.insert(p.id, i).is_some() {
            return Err(Error::validation(format!("duplicate parcel id {}", p.id)));
        }
    }
    Ok(index)
}

fn sort_edges(list: &mut [Edge], parcels: &[Parcel]) {
    list.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(parcels[a.to].id.cmp(&parcels[b.to].id))
    });
}

#[derive(Debug, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Vec<Parcel> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| Parcel::new(i as u64 + 1, LandUse::Residential, 10.0, x, 0.0))
            .collect()
    }

    const CSV_HEAD: &str = "id,land_use,area,x,y,vacant,obsolete,open_space\n";

    #[test]
    fn parses_valid_rows() {
        let text = format!("{CSV_HEAD}1,r,120.5,0,0,false,false,false\n2,g,80,10.5,-3,true,0,1\n");
        let parcels = parse_parcels(text.as_bytes()).unwrap();
        assert_eq!(parcels.len(), 2);
        assert_eq!(parcels[0].id, 1);
        assert_eq!(parcels[0].land_use, LandUse::Residential);
        assert_eq!(parcels[0].area, 120.5);
        assert_eq!(parcels[1].land_use, LandUse::Green);
        assert_eq!((parcels[1].x, parcels[1].y), (10.5, -3.0));
        assert!(parcels[1].vacant && !parcels[1].obsolete && parcels[1].open_space);
        assert!(parcels.iter().all(|p| !p.readjustable && !p.assigned));
    }

    #[test]
    fn unknown_land_use_names_line() {
        let text = format!("{CSV_HEAD}1,r,1,0,0,false,false,false\n2,z,1,0,0,false,false,false\n");
        match parse_parcels(text.as_bytes()) {
            Err(Error::Validation {
                line: Some(3),
                message,
            }) => assert!(message.contains("\"z\"")),
            other => panic!("expected validation error at line 3, got {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_parcels(CSV_HEAD.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_is_parse_error() {
        let text = format!("{CSV_HEAD}1,r,abc,0,0,false,false,false\n");
        assert!(matches!(
            parse_parcels(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = format!("{CSV_HEAD}1,r,1,0\n");
        assert!(matches!(
            parse_parcels(text.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn nonpositive_area_rejected() {
        let text = format!("{CSV_HEAD}1,r,0,0,0,false,false,false\n");
        assert!(matches!(
            parse_parcels(text.as_bytes()),
            Err(Error::Validation { line: Some(2), .. })
        ));
    }

    #[test]
    fn missing_header_column() {
        let text = "id,land_use,area,x,y\n1,r,1,0,0\n";
        assert!(matches!(
            parse_parcels(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn knn_collinear() {
        let g = build_knn_graph(line(&[0.0, 1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        let mut out: Vec<_> = g.adjacency_of(1).unwrap();
        out.sort_by_key(|e| e.0);
        assert_eq!(out, vec![(2, 1.0), (3, 2.0)]);
    }

    #[test]
    fn knn_two_parcels() {
        let mut ps = line(&[0.0, 0.0]);
        ps[1].x = 3.0;
        ps[1].y = 4.0;
        let g = build_knn_graph(ps, 1).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.adjacency_of(1).unwrap(), vec![(2, 5.0)]);
        assert_eq!(g.adjacency_of(2).unwrap(), vec![(1, 5.0)]);
    }

    #[test]
    fn knn_unit_square_skips_diagonal() {
        let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let ps = corners
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Parcel::new(i as u64, LandUse::Green, 1.0, x, y))
            .collect();
        let g = build_knn_graph(ps, 2).unwrap();
        for (_, _, d) in g.edges() {
            assert_eq!(d, 1.0);
        }
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn knn_needs_k_plus_one() {
        assert!(matches!(
            build_knn_graph(line(&[0.0, 1.0, 2.0]), 4),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn knn_duplicate_coordinates_break_by_id() {
        // parcels 2 and 3 coincide; parcel 1's single nearest must be 2.
        let mut ps = line(&[0.0, 5.0, 5.0]);
        ps[0].x = 0.0;
        let g = build_knn_graph(ps, 1).unwrap();
        let adj = g.adjacency_of(1).unwrap();
        assert_eq!(adj, vec![(2, 5.0)]);
        assert!(g.edges().all(|(_, _, d)| d > 0.0));
    }

    fn chain() -> SpatialGraph {
        let ps = line(&[0.0, 800.0, 1600.0]);
        SpatialGraph::from_edges(ps, [(1, 2, 800.0), (2, 3, 800.0)]).unwrap()
    }

    #[test]
    fn subgraph_zero_radius() {
        let sub = observation_subgraph(&chain(), 2, 0.0).unwrap();
        assert_eq!(sub.len(), 1);
        assert_eq!(sub.parcel(0).id, 2);
        assert_eq!(sub.edge_count(), 0);
    }

    #[test]
    fn subgraph_chain_radius() {
        let sub = observation_subgraph(&chain(), 1, 1250.0).unwrap();
        let ids: Vec<_> = sub.parcels().iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(sub.edge_count(), 1);
    }

    #[test]
    fn subgraph_large_radius_is_full() {
        let sub = observation_subgraph(&chain(), 1, 1e9).unwrap();
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.edge_count(), 2);
    }

    #[test]
    fn subgraph_unknown_origin() {
        assert!(matches!(
            observation_subgraph(&chain(), 99, 10.0),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn selection_rules() {
        let mut ps = line(&[0.0, 1.0, 2.0]);
        assert!(select_readjustment_parcels(&mut ps).is_empty());
        ps[1].vacant = true;
        assert_eq!(select_readjustment_parcels(&mut ps), BTreeSet::from([2]));
        ps[2].obsolete = true;
        ps[2].open_space = true;
        let sel = select_readjustment_parcels(&mut ps);
        assert_eq!(sel, BTreeSet::from([2, 3]));
        assert!(ps[1].readjustable && ps[2].readjustable && !ps[0].readjustable);
    }

    #[test]
    fn kernel_weights_bounded() {
        let g = chain();
        let w = g.kernel_weights(800.0);
        assert_eq!(w.len(), 2);
        for (_, _, v) in w {
            assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn geojson_shape() {
        let g = chain();
        let mut plan = BTreeMap::new();
        plan.insert(2, LandUse::Green);
        let v = g.to_geojson(Some(&plan));
        assert_eq!(v["type"], "FeatureCollection");
        let features = v["features"].as_array().unwrap();
        assert_eq!(features.len(), 3);
        assert_eq!(features[1]["properties"]["assigned_land_use"], "g");
        assert!(features[0]["properties"]["assigned_land_use"].is_null());
        assert_eq!(features[0]["geometry"]["type"], "Point");
    }

    #[test]
    fn adjacency_round_trip() {
        let g = build_knn_graph(line(&[0.0, 1.0, 2.5, 4.0]), 2).unwrap();
        let mut buf = Vec::new();
        g.write_adjacency(&mut buf).unwrap();
        let edges = parse_adjacency(buf.as_slice()).unwrap();
        let g2 = SpatialGraph::from_edges(g.parcels().to_vec(), edges).unwrap();
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            g2.edges().collect::<Vec<_>>()
        );
    }
}
