//! Candidate hub sites for a cluster: tile the cluster's bounding box with a
//! square grid, snap cell centers to road nodes, and always include the
//! incumbent centroid so the update step can never make things worse.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, PlanarFrame};
use crate::road_graph::{snap_to_node, GraphError, NodeId, RoadGraph};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cannot generate candidates for an empty cluster")]
    EmptyCluster,
    #[error("grid resolution must be positive")]
    NonPositiveResolution,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateOrigin {
    GridCell,
    IncumbentCentroid,
}

/// One candidate hub site. No two candidates in a set share a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateSite<T> {
    pub node: NodeId,
    pub cell_center: GeoPoint<T>,
    pub origin: CandidateOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<T> {
    pub sites: Vec<CandidateSite<T>>,
    /// Cell centers whose snap failed; skipped, not fatal.
    pub skipped_snaps: usize,
}

impl<T> CandidateSet<T> {
    pub fn nodes(&self) -> Vec<NodeId> {
        self.sites.iter().map(|s| s.node).collect()
    }

    /// Index of the candidate occupying `node`, if any.
    pub fn index_of(&self, node: NodeId) -> Option<usize> {
        self.sites.iter().position(|s| s.node == node)
    }
}

/// Grid dimensions for a point set: the projected bounding box tiled with
/// ceil(extent/res) cells per axis, at least 1x1.
pub fn grid_dims<T: Scalar>(
    frame: &PlanarFrame<T>,
    points: &[GeoPoint<T>],
    res_m: T,
) -> Result<(usize, usize), GridError> {
    if points.is_empty() {
        return Err(GridError::EmptyCluster);
    }
    if !(res_m.is_finite() && res_m > T::zero()) {
        return Err(GridError::NonPositiveResolution);
    }
    let (bbox_min, bbox_max) = projected_bbox(frame, points);
    let cells = |extent: T| -> usize {
        let n = (extent / res_m).ceil().to_usize().unwrap_or(0);
        n.max(1)
    };
    Ok((cells(bbox_max.0 - bbox_min.0), cells(bbox_max.1 - bbox_min.1)))
}

fn projected_bbox<T: Scalar>(frame: &PlanarFrame<T>, points: &[GeoPoint<T>]) -> ((T, T), (T, T)) {
    let mut min = (T::infinity(), T::infinity());
    let mut max = (T::neg_infinity(), T::neg_infinity());
    for &p in points {
        let (x, y) = frame.project(p);
        min.0 = min.0.min(x);
        min.1 = min.1.min(y);
        max.0 = max.0.max(x);
        max.1 = max.1.max(y);
    }
    (min, max)
}

/// Generates candidate sites for one cluster.
///
/// Cell centers are anchored at the bounding box's min corner and snapped to
/// the nearest node; duplicate nodes keep the first cell (row-major scan from
/// the min corner). The incumbent centroid is appended if not already present,
/// which guarantees the 1-median update never increases the cluster cost.
pub fn generate_candidates<T: Scalar>(
    g: &RoadGraph<T>,
    frame: &PlanarFrame<T>,
    cluster_points: &[GeoPoint<T>],
    res_m: T,
    incumbent: NodeId,
    max_snap_m: T,
) -> Result<CandidateSet<T>, GridError> {
    let (nx, ny) = grid_dims(frame, cluster_points, res_m)?;
    g.node(incumbent)?;
    let (bbox_min, _) = projected_bbox(frame, cluster_points);

    let half = T::one() / (T::one() + T::one());
    let mut sites = Vec::new();
    let mut occupied = BTreeSet::new();
    let mut skipped = 0usize;
    for iy in 0..ny {
        for ix in 0..nx {
            let cx = bbox_min.0 + (T::from_usize(ix).expect("grid index") + half) * res_m;
            let cy = bbox_min.1 + (T::from_usize(iy).expect("grid index") + half) * res_m;
            let center = frame.unproject(cx, cy);
            match snap_to_node(g, center, max_snap_m) {
                Ok(node) => {
                    if occupied.insert(node) {
                        sites.push(CandidateSite {
                            node,
                            cell_center: center,
                            origin: CandidateOrigin::GridCell,
                        });
                    }
                }
                Err(GraphError::SnapTooFar { .. }) => skipped += 1,
                Err(other) => return Err(other.into()),
            }
        }
    }

    if occupied.insert(incumbent) {
        sites.push(CandidateSite {
            node: incumbent,
            cell_center: g.node(incumbent)?.pos,
            origin: CandidateOrigin::IncumbentCentroid,
        });
    }

    Ok(CandidateSet {
        sites,
        skipped_snaps: skipped,
    })
}
