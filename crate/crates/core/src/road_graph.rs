//! Directed road network: loading with one-way semantics and road-class
//! exclusion, nearest-node snapping, and exact shortest-path distances.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{great_circle_m, GeoPoint};
use crate::scalar::{to_f64, Scalar};

/// Dense node identifier, contiguous from 0 after load.
pub type NodeId = usize;

/// Node identifier as it appears in source data (arbitrary, sparse).
pub type RawNodeId = u64;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate edge id {edge_id}")]
    DuplicateEdgeId { edge_id: u64 },
    #[error("edge {edge_id}: length {length_m} m is not positive and finite")]
    NonPositiveLength { edge_id: u64, length_m: f64 },
    #[error("edge {edge_id}: node {node} recorded with conflicting coordinates")]
    InconsistentNodeCoordinates { edge_id: u64, node: RawNodeId },
    #[error("node id {node} out of range (graph has {node_count} nodes)")]
    InvalidNode { node: NodeId, node_count: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("nearest node is {nearest_m:.1} m away, beyond the {max_m:.1} m snap limit")]
    SnapTooFar { nearest_m: f64, max_m: f64 },
}

/// Road classes from the source network. Motorway and metro are typically
/// excluded because delivery motorbikes may not use them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Primary,
    Secondary,
    Local,
    Motorway,
    Metro,
    Highway,
}

impl RoadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::Primary => "primary",
            RoadClass::Secondary => "secondary",
            RoadClass::Local => "local",
            RoadClass::Motorway => "motorway",
            RoadClass::Metro => "metro",
            RoadClass::Highway => "highway",
        }
    }
}

impl FromStr for RoadClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "primary" => Ok(RoadClass::Primary),
            "secondary" => Ok(RoadClass::Secondary),
            "local" => Ok(RoadClass::Local),
            "motorway" => Ok(RoadClass::Motorway),
            "metro" => Ok(RoadClass::Metro),
            "highway" => Ok(RoadClass::Highway),
            other => Err(format!("unknown road class {other:?}")),
        }
    }
}

/// Cardinal tag carried by one-way segments. Retained as metadata; the
/// traversable direction is always the edge's stored from->to order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionTag {
    #[serde(rename = "NB")]
    NorthBound,
    #[serde(rename = "SB")]
    SouthBound,
    #[serde(rename = "EB")]
    EastBound,
    #[serde(rename = "WB")]
    WestBound,
}

impl DirectionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionTag::NorthBound => "NB",
            DirectionTag::SouthBound => "SB",
            DirectionTag::EastBound => "EB",
            DirectionTag::WestBound => "WB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Directionality {
    /// Traversable only in the stored from->to order.
    OneWayForward,
    TwoWay,
}

/// One row of source edge data, before graph construction.
#[derive(Debug, Clone)]
pub struct EdgeRecord<T> {
    pub edge_id: u64,
    pub from: RawNodeId,
    pub to: RawNodeId,
    pub from_pos: GeoPoint<T>,
    pub to_pos: GeoPoint<T>,
    /// Missing lengths fall back to the great-circle distance between endpoints.
    pub length_m: Option<T>,
    /// `None` means the source direction field was "None": a two-way road.
    pub direction: Option<DirectionTag>,
    pub road_class: RoadClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadNode<T> {
    pub id: NodeId,
    pub pos: GeoPoint<T>,
}

/// A loaded edge with dense endpoint ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadEdge<T> {
    pub id: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: T,
    pub directionality: Directionality,
    pub road_class: RoadClass,
    pub direction_tag: Option<DirectionTag>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutArc<T> {
    pub to: NodeId,
    pub length_m: T,
}

/// Immutable directed road network. Two-way edges contribute arcs in both
/// directions; one-way edges contribute exactly the from->to arc.
#[derive(Debug, Clone)]
pub struct RoadGraph<T> {
    nodes: Vec<RoadNode<T>>,
    edges: Vec<RoadEdge<T>>,
    adjacency: Vec<Vec<OutArc<T>>>,
}

impl<T: Scalar> RoadGraph<T> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[RoadNode<T>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge<T>] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Result<&RoadNode<T>, GraphError> {
        self.nodes.get(id).ok_or(GraphError::InvalidNode {
            node: id,
            node_count: self.nodes.len(),
        })
    }

    pub fn out_arcs(&self, id: NodeId) -> &[OutArc<T>] {
        &self.adjacency[id]
    }
}

/// Builds a [`RoadGraph`] from edge records, dropping excluded road classes
/// and applying direction semantics. Node ids are densified in ascending
/// order of their source ids.
pub fn load_road_graph<T: Scalar>(
    records: &[EdgeRecord<T>],
    excluded_classes: &BTreeSet<RoadClass>,
) -> Result<RoadGraph<T>, GraphError> {
    // Integrity checks run on every record, including excluded ones.
    let mut seen_edge_ids = BTreeSet::new();
    let mut node_pos: BTreeMap<RawNodeId, GeoPoint<T>> = BTreeMap::new();
    for rec in records {
        if !seen_edge_ids.insert(rec.edge_id) {
            return Err(GraphError::DuplicateEdgeId {
                edge_id: rec.edge_id,
            });
        }
        for (raw, pos) in [(rec.from, rec.from_pos), (rec.to, rec.to_pos)] {
            match node_pos.get(&raw) {
                Some(prev) if *prev != pos => {
                    return Err(GraphError::InconsistentNodeCoordinates {
                        edge_id: rec.edge_id,
                        node: raw,
                    });
                }
                Some(_) => {}
                None => {
                    node_pos.insert(raw, pos);
                }
            }
        }
        if let Some(len) = rec.length_m {
            if !(len.is_finite() && len > T::zero()) {
                return Err(GraphError::NonPositiveLength {
                    edge_id: rec.edge_id,
                    length_m: to_f64(len),
                });
            }
        }
    }

    let kept: Vec<&EdgeRecord<T>> = records
        .iter()
        .filter(|r| !excluded_classes.contains(&r.road_class))
        .collect();

    // Only nodes referenced by kept edges make it into the graph.
    let mut raw_ids = BTreeSet::new();
    for rec in &kept {
        raw_ids.insert(rec.from);
        raw_ids.insert(rec.to);
    }
    let id_of: BTreeMap<RawNodeId, NodeId> = raw_ids
        .iter()
        .enumerate()
        .map(|(dense, raw)| (*raw, dense))
        .collect();

    let nodes: Vec<RoadNode<T>> = raw_ids
        .iter()
        .enumerate()
        .map(|(dense, raw)| RoadNode {
            id: dense,
            pos: node_pos[raw],
        })
        .collect();

    let mut edges = Vec::with_capacity(kept.len());
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for rec in &kept {
        let from = id_of[&rec.from];
        let to = id_of[&rec.to];
        let length_m = match rec.length_m {
            Some(len) => len,
            None => {
                let len = great_circle_m(rec.from_pos, rec.to_pos);
                if !(len.is_finite() && len > T::zero()) {
                    return Err(GraphError::NonPositiveLength {
                        edge_id: rec.edge_id,
                        length_m: to_f64(len),
                    });
                }
                len
            }
        };
        let directionality = if rec.direction.is_some() {
            Directionality::OneWayForward
        } else {
            Directionality::TwoWay
        };
        edges.push(RoadEdge {
            id: rec.edge_id,
            from,
            to,
            length_m,
            directionality,
            road_class: rec.road_class,
            direction_tag: rec.direction,
        });
        adjacency[from].push(OutArc { to, length_m });
        if directionality == Directionality::TwoWay {
            adjacency[to].push(OutArc { to: from, length_m });
        }
    }

    Ok(RoadGraph {
        nodes,
        edges,
        adjacency,
    })
}

/// Snaps a point to the nearest node by great-circle distance.
/// Ties go to the smallest node id.
pub fn snap_to_node<T: Scalar>(
    g: &RoadGraph<T>,
    p: GeoPoint<T>,
    max_snap_m: T,
) -> Result<NodeId, GraphError> {
    if g.nodes.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut best = 0;
    let mut best_d = great_circle_m(p, g.nodes[0].pos);
    for node in &g.nodes[1..] {
        let d = great_circle_m(p, node.pos);
        if d < best_d {
            best_d = d;
            best = node.id;
        }
    }
    if best_d > max_snap_m {
        return Err(GraphError::SnapTooFar {
            nearest_m: to_f64(best_d),
            max_m: to_f64(max_snap_m),
        });
    }
    Ok(best)
}

struct HeapItem<T> {
    dist: T,
    node: NodeId,
}

impl<T: Scalar> PartialEq for HeapItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl<T: Scalar> Eq for HeapItem<T> {}
impl<T: Scalar> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for HeapItem<T> {
    // Reversed so the max-heap pops the smallest distance. Distances in the
    // heap are always finite, so partial_cmp cannot fail.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("finite distances in heap")
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Single-source shortest path distances (Dijkstra), respecting arc
/// directions. Unreachable nodes get `+inf`.
pub fn sssp<T: Scalar>(g: &RoadGraph<T>, source: NodeId) -> Result<Vec<T>, GraphError> {
    if source >= g.node_count() {
        return Err(GraphError::InvalidNode {
            node: source,
            node_count: g.node_count(),
        });
    }
    let mut dist = vec![T::infinity(); g.node_count()];
    dist[source] = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem {
        dist: T::zero(),
        node: source,
    });
    while let Some(HeapItem { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue; // stale entry
        }
        for arc in g.out_arcs(node) {
            let nd = d + arc.length_m;
            if nd < dist[arc.to] {
                dist[arc.to] = nd;
                heap.push(HeapItem {
                    dist: nd,
                    node: arc.to,
                });
            }
        }
    }
    Ok(dist)
}

/// Origin-destination matrix of shortest-path distances in meters.
/// Unreachable pairs are `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    origins: Vec<NodeId>,
    destinations: Vec<NodeId>,
    data: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn origins(&self) -> &[NodeId] {
        &self.origins
    }

    pub fn destinations(&self) -> &[NodeId] {
        &self.destinations
    }

    /// Distance from the `origin`-th origin to the `dest`-th destination.
    pub fn get(&self, origin: usize, dest: usize) -> T {
        self.data[origin * self.destinations.len() + dest]
    }

    pub fn row(&self, origin: usize) -> &[T] {
        let w = self.destinations.len();
        &self.data[origin * w..(origin + 1) * w]
    }
}

/// Computes one [`sssp`] per origin, restricted to `destinations`.
///
/// Rows are computed in parallel; the result is identical to sequential
/// evaluation.
pub fn od_matrix<T: Scalar>(
    g: &RoadGraph<T>,
    origins: &[NodeId],
    destinations: &[NodeId],
) -> Result<DistanceMatrix<T>, GraphError> {
    for &id in origins.iter().chain(destinations) {
        if id >= g.node_count() {
            return Err(GraphError::InvalidNode {
                node: id,
                node_count: g.node_count(),
            });
        }
    }
    let rows: Vec<Vec<T>> = origins
        .par_iter()
        .map(|&o| {
            let dist = sssp(g, o).expect("origin validated");
            destinations.iter().map(|&d| dist[d]).collect()
        })
        .collect();
    let mut data = Vec::with_capacity(origins.len() * destinations.len());
    for row in rows {
        data.extend(row);
    }
    Ok(DistanceMatrix {
        origins: origins.to_vec(),
        destinations: destinations.to_vec(),
        data,
    })
}

/// Snapping failure policy used by demand builders and the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapPolicy {
    /// Abort on the first point that fails to snap.
    Strict,
    /// Drop points that fail to snap and count them.
    Lenient,
}
