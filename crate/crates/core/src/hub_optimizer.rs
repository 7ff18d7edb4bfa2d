//! The hybrid placement loop: assign demand to the nearest hub by road
//! distance, then relocate each cluster's hub to its exact 1-median over a
//! grid of candidate sites. Repeats until centroids settle under the cutoff
//! or the iteration cap is reached.
//!
//! Distances always run hub -> demand (riders leave the hub loaded), so
//! one-way streets matter. Because the incumbent centroid is always among the
//! candidates, the per-iteration objective never increases.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate_grid::{generate_candidates, CandidateSet, GridError};
use crate::demand::DemandPoint;
use crate::geo::{great_circle_m, GeoPoint, PlanarFrame};
use crate::median_solver::{solve_1median, MedianProblem, MedianSolution, SolverError};
use crate::road_graph::{od_matrix, snap_to_node, sssp, GraphError, NodeId, RoadGraph, SnapPolicy};
use crate::scalar::{cast, to_f64, Scalar};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("no hubs supplied")]
    NoHubs,
    #[error("no demand points supplied")]
    NoDemand,
    #[error("{hubs} hubs exceed {demand} demand points")]
    TooManyHubs { hubs: usize, demand: usize },
    #[error("hub at ({lon}, {lat}) failed to snap: {source}")]
    HubSnapFailed {
        lon: f64,
        lat: f64,
        source: GraphError,
    },
    #[error("demand point {demand} is unreachable from every hub")]
    UnreachableDemand { demand: usize },
    #[error("every demand point is unreachable from every hub")]
    AllDemandUnreachable,
    #[error("total demand weight is zero")]
    ZeroTotalWeight,
    #[error("cluster {cluster} has no members")]
    EmptyCluster { cluster: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig<T> {
    pub max_iter: usize,
    /// Stop once every centroid moves less than this between iterations.
    pub cutoff_m: T,
    pub grid_res_m: T,
    pub max_snap_m: T,
    pub snap_policy: SnapPolicy,
}

impl<T: Scalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 10,
            cutoff_m: cast(10.0),
            grid_res_m: cast(1000.0),
            max_snap_m: cast(2000.0),
            snap_policy: SnapPolicy::Strict,
        }
    }
}

/// One cluster: its hub node and the demand indices assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub index: usize,
    pub centroid_node: NodeId,
    pub members: Vec<usize>,
}

/// Result of one assignment pass. Clusters partition the non-dropped demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    pub clusters: Vec<ClusterState>,
    /// Road distance hub -> demand for each demand index; `None` = dropped.
    pub distance_m: Vec<Option<T>>,
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats<T> {
    pub iteration: usize,
    /// Weighted average road distance per delivery, meters.
    pub objective_m: T,
    /// Great-circle displacement of each cluster's centroid in this iteration.
    pub centroid_moves_m: Vec<T>,
    pub candidates_evaluated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    CutoffMet,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubPlacement<T> {
    pub cluster: usize,
    pub node: NodeId,
    pub pos: GeoPoint<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport<T> {
    /// Objective under the initial hubs, after the first assignment.
    pub baseline_objective_m: T,
    pub iterations: Vec<IterationStats<T>>,
    pub final_hubs: Vec<HubPlacement<T>>,
    /// Cluster per demand index; `None` for demand dropped as unreachable.
    /// This is the partition the final centroids were optimized for.
    pub final_assignment: Vec<Option<usize>>,
    pub dropped_demand: Vec<usize>,
    pub stop_reason: StopReason,
}

impl<T: Scalar> OptimizationReport<T> {
    pub fn final_objective_m(&self) -> T {
        self.iterations
            .last()
            .map(|s| s.objective_m)
            .expect("report holds at least one iteration")
    }
}

/// Result of one centroid update.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidUpdate<T> {
    pub candidates: CandidateSet<T>,
    pub solution: MedianSolution<T>,
    pub new_centroid: NodeId,
}

/// Assigns each demand point to the hub with the smallest road distance
/// hub -> demand. Ties go to the lowest cluster index. Unreachable demand is
/// dropped (lenient) or fatal (strict); all demand unreachable is always
/// fatal.
pub fn assign_to_nearest_hub<T: Scalar>(
    g: &RoadGraph<T>,
    demand: &[DemandPoint<T>],
    hubs: &[NodeId],
    policy: SnapPolicy,
) -> Result<Assignment<T>, OptimizerError> {
    if hubs.is_empty() {
        return Err(OptimizerError::NoHubs);
    }
    if demand.is_empty() {
        return Err(OptimizerError::NoDemand);
    }
    let demand_nodes: Vec<NodeId> = demand.iter().map(|d| d.node).collect();
    let od = od_matrix(g, hubs, &demand_nodes)?;

    let mut clusters: Vec<ClusterState> = hubs
        .iter()
        .enumerate()
        .map(|(index, &centroid_node)| ClusterState {
            index,
            centroid_node,
            members: Vec::new(),
        })
        .collect();
    let mut distance_m = vec![None; demand.len()];
    let mut dropped = Vec::new();

    for i in 0..demand.len() {
        let mut best = 0usize;
        let mut best_d = od.get(0, i);
        for k in 1..hubs.len() {
            let d = od.get(k, i);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        if best_d.is_infinite() {
            match policy {
                SnapPolicy::Strict => return Err(OptimizerError::UnreachableDemand { demand: i }),
                SnapPolicy::Lenient => dropped.push(i),
            }
        } else {
            clusters[best].members.push(i);
            distance_m[i] = Some(best_d);
        }
    }
    if dropped.len() == demand.len() {
        return Err(OptimizerError::AllDemandUnreachable);
    }
    Ok(Assignment {
        clusters,
        distance_m,
        dropped,
    })
}

/// The objective: weighted average road distance per delivery,
/// `sum(w_i * d_i) / sum(w_i)` over assigned demand. With phase-1 weights
/// (= delivery counts) this is exactly the average distance per delivery.
pub fn objective<T: Scalar>(
    assignment: &Assignment<T>,
    demand: &[DemandPoint<T>],
) -> Result<T, OptimizerError> {
    let mut total = T::zero();
    let mut total_weight = T::zero();
    for (i, dist) in assignment.distance_m.iter().enumerate() {
        if let Some(d) = dist {
            let w = demand[i].weight;
            total = total + w * *d;
            total_weight = total_weight + w;
        }
    }
    if total_weight == T::zero() {
        return Err(OptimizerError::ZeroTotalWeight);
    }
    Ok(total / total_weight)
}

/// Relocates one cluster's centroid to the exact 1-median over its candidate
/// grid. The incumbent is always a candidate, so the new weighted cost never
/// exceeds the incumbent's.
pub fn update_centroid<T: Scalar>(
    g: &RoadGraph<T>,
    frame: &PlanarFrame<T>,
    cluster: &ClusterState,
    demand: &[DemandPoint<T>],
    cfg: &OptimizerConfig<T>,
) -> Result<CentroidUpdate<T>, OptimizerError> {
    if cluster.members.is_empty() {
        return Err(OptimizerError::EmptyCluster {
            cluster: cluster.index,
        });
    }
    let positions: Vec<GeoPoint<T>> = cluster.members.iter().map(|&i| demand[i].pos).collect();
    let candidates = generate_candidates(
        g,
        frame,
        &positions,
        cfg.grid_res_m,
        cluster.centroid_node,
        cfg.max_snap_m,
    )?;
    let member_nodes: Vec<NodeId> = cluster.members.iter().map(|&i| demand[i].node).collect();
    let weights: Vec<T> = cluster.members.iter().map(|&i| demand[i].weight).collect();

    // A cluster of all-zero weights keeps its incumbent: nothing to optimize.
    if !weights.iter().any(|&w| w > T::zero()) {
        let idx = candidates
            .index_of(cluster.centroid_node)
            .expect("incumbent is always a candidate");
        return Ok(CentroidUpdate {
            new_centroid: cluster.centroid_node,
            solution: MedianSolution {
                open: vec![idx],
                assign: vec![idx; cluster.members.len()],
                cost: T::zero(),
            },
            candidates,
        });
    }

    let cand_nodes = candidates.nodes();
    let od = od_matrix(g, &cand_nodes, &member_nodes)?;
    let distances: Vec<Vec<T>> = (0..member_nodes.len())
        .map(|i| (0..cand_nodes.len()).map(|j| od.get(j, i)).collect())
        .collect();
    let problem = MedianProblem::new(weights, distances, 1)?;
    let solution = solve_1median(&problem)?;
    let new_centroid = cand_nodes[solution.open[0]];
    Ok(CentroidUpdate {
        candidates,
        solution,
        new_centroid,
    })
}

/// Great-circle distance between two centroid nodes; the convergence metric.
pub fn centroid_displacement<T: Scalar>(
    g: &RoadGraph<T>,
    old: NodeId,
    new: NodeId,
) -> Result<T, GraphError> {
    if old == new {
        return Ok(T::zero());
    }
    Ok(great_circle_m(g.node(old)?.pos, g.node(new)?.pos))
}

/// Reseeds empty clusters at the demand point farthest by road from their
/// current hub (unreachable counts as farthest), skipping nodes that already
/// host a hub, then reassigns. Positive arc lengths guarantee a reseeded
/// cluster keeps its seed point, so at most one pass per cluster is needed.
fn repair_empty_clusters<T: Scalar>(
    g: &RoadGraph<T>,
    demand: &[DemandPoint<T>],
    hubs: &mut Vec<NodeId>,
    assignment: &mut Assignment<T>,
    policy: SnapPolicy,
) -> Result<(), OptimizerError> {
    for _ in 0..hubs.len() {
        let Some(empty) = assignment
            .clusters
            .iter()
            .find(|c| c.members.is_empty())
            .map(|c| c.index)
        else {
            return Ok(());
        };
        let dist = sssp(g, hubs[empty])?;
        let mut eligible: Vec<usize> = (0..demand.len())
            .filter(|&i| !hubs.contains(&demand[i].node))
            .collect();
        if eligible.is_empty() {
            // Every demand node already hosts a hub; the cluster stays empty.
            return Ok(());
        }
        eligible.sort_by(|&a, &b| {
            dist[demand[b].node]
                .partial_cmp(&dist[demand[a].node])
                .expect("distances ordered with +inf greatest")
                .then_with(|| a.cmp(&b))
        });
        hubs[empty] = demand[eligible[0]].node;
        *assignment = assign_to_nearest_hub(g, demand, hubs, policy)?;
    }
    Ok(())
}

/// Runs the full loop from initial hub positions.
///
/// Per iteration: assign demand to nearest hubs (repairing empty clusters),
/// record the objective, then relocate every centroid. Stops when the largest
/// centroid displacement drops below `cutoff_m` or after `max_iter`
/// iterations. The recorded objective sequence is non-increasing.
pub fn run<T: Scalar>(
    g: &RoadGraph<T>,
    frame: &PlanarFrame<T>,
    demand: &[DemandPoint<T>],
    initial_hub_points: &[GeoPoint<T>],
    cfg: &OptimizerConfig<T>,
) -> Result<OptimizationReport<T>, OptimizerError> {
    if initial_hub_points.is_empty() {
        return Err(OptimizerError::NoHubs);
    }
    if demand.is_empty() {
        return Err(OptimizerError::NoDemand);
    }
    if initial_hub_points.len() > demand.len() {
        return Err(OptimizerError::TooManyHubs {
            hubs: initial_hub_points.len(),
            demand: demand.len(),
        });
    }
    let mut hubs = snap_hubs(g, initial_hub_points, cfg.max_snap_m)?;

    let mut iterations: Vec<IterationStats<T>> = Vec::new();
    let mut last_assignment: Option<Assignment<T>> = None;
    let mut stop_reason = StopReason::MaxIterations;

    for iteration in 1..=cfg.max_iter {
        let mut assignment = assign_to_nearest_hub(g, demand, &hubs, cfg.snap_policy)?;
        repair_empty_clusters(g, demand, &mut hubs, &mut assignment, cfg.snap_policy)?;
        let objective_m = objective(&assignment, demand)?;

        let mut moves = Vec::with_capacity(hubs.len());
        let mut candidates_evaluated = 0;
        let mut new_hubs = hubs.clone();
        for cluster in &assignment.clusters {
            if cluster.members.is_empty() {
                moves.push(T::zero());
                continue;
            }
            let update = update_centroid(g, frame, cluster, demand, cfg)?;
            candidates_evaluated += update.candidates.sites.len();
            moves.push(centroid_displacement(g, cluster.centroid_node, update.new_centroid)?);
            new_hubs[cluster.index] = update.new_centroid;
        }

        let max_move = moves.iter().cloned().fold(T::zero(), T::max);
        iterations.push(IterationStats {
            iteration,
            objective_m,
            centroid_moves_m: moves,
            candidates_evaluated,
        });
        last_assignment = Some(assignment);
        hubs = new_hubs;

        if max_move < cfg.cutoff_m {
            stop_reason = StopReason::CutoffMet;
            break;
        }
    }

    let assignment = last_assignment.expect("max_iter >= 1 ran at least one iteration");
    let mut final_assignment = vec![None; demand.len()];
    for cluster in &assignment.clusters {
        for &i in &cluster.members {
            final_assignment[i] = Some(cluster.index);
        }
    }
    let final_hubs = hubs
        .iter()
        .enumerate()
        .map(|(cluster, &node)| {
            Ok(HubPlacement {
                cluster,
                node,
                pos: g.node(node)?.pos,
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;

    Ok(OptimizationReport {
        baseline_objective_m: iterations[0].objective_m,
        iterations,
        final_hubs,
        final_assignment,
        dropped_demand: assignment.dropped,
        stop_reason,
    })
}

/// Baseline: objective under fixed hub positions, no optimization. Uses the
/// same hub -> demand distance convention as [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary<T> {
    pub objective_m: T,
    pub hubs: Vec<HubPlacement<T>>,
    pub cluster_sizes: Vec<usize>,
    pub dropped_demand: Vec<usize>,
}

pub fn baseline_report<T: Scalar>(
    g: &RoadGraph<T>,
    demand: &[DemandPoint<T>],
    hub_points: &[GeoPoint<T>],
    cfg: &OptimizerConfig<T>,
) -> Result<BaselineSummary<T>, OptimizerError> {
    if hub_points.is_empty() {
        return Err(OptimizerError::NoHubs);
    }
    let hubs = snap_hubs(g, hub_points, cfg.max_snap_m)?;
    let assignment = assign_to_nearest_hub(g, demand, &hubs, cfg.snap_policy)?;
    let objective_m = objective(&assignment, demand)?;
    let hubs = hubs
        .iter()
        .enumerate()
        .map(|(cluster, &node)| {
            Ok(HubPlacement {
                cluster,
                node,
                pos: g.node(node)?.pos,
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;
    Ok(BaselineSummary {
        objective_m,
        hubs,
        cluster_sizes: assignment.clusters.iter().map(|c| c.members.len()).collect(),
        dropped_demand: assignment.dropped,
    })
}

fn snap_hubs<T: Scalar>(
    g: &RoadGraph<T>,
    points: &[GeoPoint<T>],
    max_snap_m: T,
) -> Result<Vec<NodeId>, OptimizerError> {
    points
        .iter()
        .map(|&p| {
            snap_to_node(g, p, max_snap_m).map_err(|source| OptimizerError::HubSnapFailed {
                lon: to_f64(p.lon),
                lat: to_f64(p.lat),
                source,
            })
        })
        .collect()
}
