//! Demand construction: aggregating raw delivery records into weighted,
//! road-snapped demand points, optionally blending in population density.
//!
//! Phase 1 uses unique delivery coordinates with weight = delivery count.
//! Phase 2 bins deliveries into 1 km population cells and blends normalized
//! delivery counts with normalized population: `h = alpha*x + (1-alpha)*y`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, PlanarFrame};
use crate::road_graph::{snap_to_node, GraphError, NodeId, RoadGraph, SnapPolicy};
use crate::scalar::{cast, to_f64, Scalar};

/// Side length of a population cell, meters.
pub const CELL_SIZE_M: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("value at index {index} is negative or non-finite: {value}")]
    InvalidValue { index: usize, value: f64 },
    #[error("blend input out of [0, 1]: x {x}, y {y}")]
    BlendInputOutOfRange { x: f64, y: f64 },
    #[error("alpha out of [0, 1]: {alpha}")]
    AlphaOutOfRange { alpha: f64 },
    #[error("delivery at ({lon}, {lat}) failed to snap: {source}")]
    SnapFailed {
        lon: f64,
        lat: f64,
        source: GraphError,
    },
    #[error("no population cells supplied")]
    NoCells,
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
}

/// One raw delivery row.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryRecord<T> {
    pub pos: GeoPoint<T>,
    pub timestamp: Option<String>,
}

/// A unique snapped demand location with its delivery count and weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint<T> {
    pub id: usize,
    pub pos: GeoPoint<T>,
    pub node: NodeId,
    pub count: u64,
    pub weight: T,
}

/// Center of a 1 km x 1 km population raster cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationCell<T> {
    pub center: GeoPoint<T>,
    pub ppp: T,
}

/// Convex blend parameter between normalized deliveries and normalized
/// population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBlend<T> {
    alpha: T,
}

impl<T: Scalar> WeightBlend<T> {
    pub fn new(alpha: T) -> Result<Self, DemandError> {
        if alpha.is_finite() && alpha >= T::zero() && alpha <= T::one() {
            Ok(Self { alpha })
        } else {
            Err(DemandError::AlphaOutOfRange {
                alpha: to_f64(alpha),
            })
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
}

/// Normalization scheme for delivery counts and population values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormScheme {
    /// Divide by the maximum; all-zero input stays all-zero.
    Max,
    /// Divide by the sum; all-zero input stays all-zero.
    Sum,
}

/// Counters for records lost during demand construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    /// Delivery records dropped because their location failed to snap
    /// (lenient policy only).
    pub dropped_records: u64,
    /// Delivery records outside every population cell (phase 2 only).
    pub outside_cells: u64,
}

fn cmp_lat_lon<T: Scalar>(a: &GeoPoint<T>, b: &GeoPoint<T>) -> Ordering {
    a.lat
        .partial_cmp(&b.lat)
        .expect("validated coordinates")
        .then_with(|| a.lon.partial_cmp(&b.lon).expect("validated coordinates"))
}

/// Collapses records sharing an exact coordinate pair into one entry with a
/// count. Output is ordered by (lat, lon), so it is permutation-invariant.
pub fn aggregate_deliveries<T: Scalar>(records: &[DeliveryRecord<T>]) -> Vec<(GeoPoint<T>, u64)> {
    let mut positions: Vec<GeoPoint<T>> = records.iter().map(|r| r.pos).collect();
    positions.sort_by(cmp_lat_lon);
    let mut out: Vec<(GeoPoint<T>, u64)> = Vec::new();
    for pos in positions {
        match out.last_mut() {
            Some((prev, count)) if *prev == pos => *count += 1,
            _ => out.push((pos, 1)),
        }
    }
    out
}

/// Divides each value by the scheme's denominator, mapping into [0, 1].
/// All-zero input maps to all-zero rather than erroring.
pub fn normalize<T: Scalar>(values: &[T], scheme: NormScheme) -> Result<Vec<T>, DemandError> {
    for (index, &v) in values.iter().enumerate() {
        if !(v.is_finite() && v >= T::zero()) {
            return Err(DemandError::InvalidValue {
                index,
                value: to_f64(v),
            });
        }
    }
    let denom = match scheme {
        NormScheme::Max => values.iter().cloned().fold(T::zero(), T::max),
        NormScheme::Sum => values.iter().cloned().sum(),
    };
    if denom == T::zero() {
        return Ok(vec![T::zero(); values.len()]);
    }
    Ok(values.iter().map(|&v| v / denom).collect())
}

/// Max-normalization: each value divided by the maximum.
pub fn normalize_max<T: Scalar>(values: &[T]) -> Result<Vec<T>, DemandError> {
    normalize(values, NormScheme::Max)
}

/// The demand weight blend `alpha*x + (1-alpha)*y` over normalized inputs.
pub fn blend_weight<T: Scalar>(x: T, y: T, blend: WeightBlend<T>) -> Result<T, DemandError> {
    let in_unit = |v: T| v.is_finite() && v >= T::zero() && v <= T::one();
    if !in_unit(x) || !in_unit(y) {
        return Err(DemandError::BlendInputOutOfRange {
            x: to_f64(x),
            y: to_f64(y),
        });
    }
    let a = blend.alpha;
    Ok(a * x + (T::one() - a) * y)
}

/// Snaps aggregated positions, applying the failure policy. Returns
/// `(position, count, node)` triples for survivors, preserving input order.
fn snap_aggregated<T: Scalar>(
    g: &RoadGraph<T>,
    aggregated: &[(GeoPoint<T>, u64)],
    max_snap_m: T,
    policy: SnapPolicy,
    stats: &mut BuildStats,
) -> Result<Vec<(GeoPoint<T>, u64, NodeId)>, DemandError> {
    let mut snapped = Vec::with_capacity(aggregated.len());
    for &(pos, count) in aggregated {
        match snap_to_node(g, pos, max_snap_m) {
            Ok(node) => snapped.push((pos, count, node)),
            Err(err) => match policy {
                SnapPolicy::Strict => {
                    return Err(DemandError::SnapFailed {
                        lon: to_f64(pos.lon),
                        lat: to_f64(pos.lat),
                        source: err,
                    });
                }
                SnapPolicy::Lenient => stats.dropped_records += count,
            },
        }
    }
    Ok(snapped)
}

/// Phase 1: aggregate unique delivery coordinates, snap to nodes, merge
/// entries sharing a node, and set weight = delivery count.
pub fn build_phase1_demand<T: Scalar>(
    g: &RoadGraph<T>,
    records: &[DeliveryRecord<T>],
    max_snap_m: T,
    policy: SnapPolicy,
) -> Result<(Vec<DemandPoint<T>>, BuildStats), DemandError> {
    let mut stats = BuildStats::default();
    let aggregated = aggregate_deliveries(records);
    let snapped = snap_aggregated(g, &aggregated, max_snap_m, policy, &mut stats)?;

    // Merge coincident snapped nodes; the first position in (lat, lon) order
    // represents the merged point.
    let mut per_node: BTreeMap<NodeId, (GeoPoint<T>, u64)> = BTreeMap::new();
    for (pos, count, node) in snapped {
        per_node
            .entry(node)
            .and_modify(|(_, c)| *c += count)
            .or_insert((pos, count));
    }

    let points = per_node
        .into_iter()
        .enumerate()
        .map(|(id, (node, (pos, count)))| DemandPoint {
            id,
            pos,
            node,
            count,
            weight: T::from_u64(count).expect("count fits scalar"),
        })
        .collect();
    Ok((points, stats))
}

/// Phase 2: one demand point per population cell centroid, weighted by the
/// blend of normalized per-cell delivery counts and normalized population.
///
/// A delivery belongs to the cell whose 1 km square (center +/- 500 m in the
/// projected plane) contains it; boundary points go to the cell with the
/// smaller index. Cells snapping to the same node are merged (counts and
/// population summed) before normalization.
pub fn build_phase2_demand<T: Scalar>(
    g: &RoadGraph<T>,
    records: &[DeliveryRecord<T>],
    cells: &[PopulationCell<T>],
    blend: WeightBlend<T>,
    norm: NormScheme,
    max_snap_m: T,
    policy: SnapPolicy,
) -> Result<(Vec<DemandPoint<T>>, BuildStats), DemandError> {
    if cells.is_empty() {
        return Err(DemandError::NoCells);
    }
    for (index, cell) in cells.iter().enumerate() {
        if !(cell.ppp.is_finite() && cell.ppp >= T::zero()) {
            return Err(DemandError::InvalidValue {
                index,
                value: to_f64(cell.ppp),
            });
        }
    }
    let mut stats = BuildStats::default();

    let centers: Vec<GeoPoint<T>> = cells.iter().map(|c| c.center).collect();
    let frame = PlanarFrame::centered_on(&centers)?;
    let projected: Vec<(T, T)> = centers.iter().map(|&c| frame.project(c)).collect();
    let half: T = cast(CELL_SIZE_M / 2.0);

    // Bin deliveries into cells; first matching cell (smallest index) wins.
    let mut counts = vec![0u64; cells.len()];
    for rec in records {
        let (x, y) = frame.project(rec.pos);
        let mut hit = false;
        for (i, &(cx, cy)) in projected.iter().enumerate() {
            if (x - cx).abs() <= half && (y - cy).abs() <= half {
                counts[i] += 1;
                hit = true;
                break;
            }
        }
        if !hit {
            stats.outside_cells += 1;
        }
    }

    // Snap cell centers; lenient drops a cell along with its deliveries.
    let mut survivors: Vec<(GeoPoint<T>, u64, NodeId, T)> = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        match snap_to_node(g, cell.center, max_snap_m) {
            Ok(node) => survivors.push((cell.center, counts[i], node, cell.ppp)),
            Err(err) => match policy {
                SnapPolicy::Strict => {
                    return Err(DemandError::SnapFailed {
                        lon: to_f64(cell.center.lon),
                        lat: to_f64(cell.center.lat),
                        source: err,
                    });
                }
                SnapPolicy::Lenient => stats.dropped_records += counts[i],
            },
        }
    }

    // Merge cells sharing a snapped node before normalization.
    let mut per_node: BTreeMap<NodeId, (GeoPoint<T>, u64, T)> = BTreeMap::new();
    for (pos, count, node, ppp) in survivors {
        per_node
            .entry(node)
            .and_modify(|(_, c, p)| {
                *c += count;
                *p = *p + ppp;
            })
            .or_insert((pos, count, ppp));
    }

    let merged: Vec<(NodeId, GeoPoint<T>, u64, T)> = per_node
        .into_iter()
        .map(|(node, (pos, count, ppp))| (node, pos, count, ppp))
        .collect();
    let count_values: Vec<T> = merged
        .iter()
        .map(|&(_, _, c, _)| T::from_u64(c).expect("count fits scalar"))
        .collect();
    let ppp_values: Vec<T> = merged.iter().map(|&(_, _, _, p)| p).collect();
    let x = normalize(&count_values, norm)?;
    let y = normalize(&ppp_values, norm)?;

    let points = merged
        .into_iter()
        .enumerate()
        .map(|(id, (node, pos, count, _))| {
            let weight = blend_weight(x[id], y[id], blend)?;
            Ok(DemandPoint {
                id,
                pos,
                node,
                count,
                weight,
            })
        })
        .collect::<Result<Vec<_>, DemandError>>()?;
    Ok((points, stats))
}
