//! Test support: independent oracles and seeded synthetic instances.
//!
//! Everything here is deterministic given a seed. Generators emit
//! integer-valued meter lengths and integer weights so that shortest-path and
//! weighted-cost sums are exact in `f64`; oracle comparisons can then demand
//! bitwise equality instead of tolerances.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use hubopt_core::demand::{DeliveryRecord, PopulationCell};
use hubopt_core::geo::{GeoPoint, PlanarFrame, METERS_PER_DEGREE};
use hubopt_core::median_solver::MedianProblem;
use hubopt_core::road_graph::{
    load_road_graph, DirectionTag, EdgeRecord, NodeId, RoadClass, RoadGraph,
};

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

/// All-pairs shortest paths by Floyd-Warshall over the graph's arcs.
/// The cubic oracle against which Dijkstra results are checked.
pub fn floyd_warshall(g: &RoadGraph<f64>) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for v in 0..n {
        d[v][v] = 0.0;
        for arc in g.out_arcs(v) {
            if arc.length_m < d[v][arc.to] {
                d[v][arc.to] = arc.length_m;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k].is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Brute-force 1-median: scan every candidate, summing weighted distances in
/// demand order; smallest cost wins, ties to the smallest candidate index.
/// Returns `(candidate, cost)`, or `None` if no candidate serves every
/// positively-weighted demand.
pub fn brute_force_1median(weights: &[f64], distances: &[Vec<f64>]) -> Option<(usize, f64)> {
    let candidates = distances.first().map(|r| r.len()).unwrap_or(0);
    let mut best: Option<(usize, f64)> = None;
    for j in 0..candidates {
        let mut cost = 0.0;
        let mut feasible = true;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                let d = distances[i][j];
                if d.is_infinite() {
                    feasible = false;
                    break;
                }
                cost += w * d;
            }
        }
        if feasible && best.map_or(true, |(_, c)| cost < c) {
            best = Some((j, cost));
        }
    }
    best
}

fn geo(lon: f64, lat: f64) -> GeoPoint<f64> {
    GeoPoint::new(lon, lat).expect("generator coordinates in range")
}

/// A random directed graph with integer meter lengths and a mix of one-way
/// and two-way edges. Nodes are scattered near Lahore; connectivity is not
/// guaranteed (unreachable pairs exercise the infinity paths).
pub fn random_graph(seed: u64, nodes: usize, extra_edges: usize) -> RoadGraph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<GeoPoint<f64>> = (0..nodes)
        .map(|_| {
            geo(
                74.2 + rng.gen_range(0..10_000) as f64 * 1e-5,
                31.4 + rng.gen_range(0..10_000) as f64 * 1e-5,
            )
        })
        .collect();
    let mut records = Vec::new();
    let mut edge_id = 0u64;
    let mut push = |rng: &mut ChaCha8Rng, records: &mut Vec<EdgeRecord<f64>>, a: usize, b: usize| {
        if a == b {
            return;
        }
        let one_way = rng.gen_bool(0.4);
        records.push(EdgeRecord {
            edge_id,
            from: a as u64,
            to: b as u64,
            from_pos: positions[a],
            to_pos: positions[b],
            length_m: Some(rng.gen_range(1..=10_000) as f64),
            direction: one_way.then(|| {
                *[
                    DirectionTag::NorthBound,
                    DirectionTag::SouthBound,
                    DirectionTag::EastBound,
                    DirectionTag::WestBound,
                ]
                .choose(rng)
                .expect("non-empty tag set")
            }),
            road_class: RoadClass::Local,
        });
        edge_id += 1;
    };
    // A random chain touches every node, then extra random pairs.
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(&mut rng);
    for w in order.windows(2) {
        push(&mut rng, &mut records, w[0], w[1]);
    }
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..nodes);
        let b = rng.gen_range(0..nodes);
        push(&mut rng, &mut records, a, b);
    }
    load_road_graph(&records, &BTreeSet::new()).expect("generated records are valid")
}

/// A random p-median instance with integer weights and distances, so costs
/// are exact in `f64`.
pub fn random_median_problem(
    seed: u64,
    max_demand: usize,
    max_candidates: usize,
    p: usize,
) -> MedianProblem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demand = rng.gen_range(1..=max_demand.max(1));
    let candidates = rng.gen_range(p.max(1)..=max_candidates.max(p.max(1)));
    let weights: Vec<f64> = (0..demand).map(|_| rng.gen_range(1..=20) as f64).collect();
    let distances: Vec<Vec<f64>> = (0..demand)
        .map(|_| {
            (0..candidates)
                .map(|_| rng.gen_range(0..=20_000) as f64)
                .collect()
        })
        .collect();
    MedianProblem::new(weights, distances, p).expect("generated instance is valid")
}

/// Scales every weight of a problem by a positive factor.
pub fn scale_weights(prob: &MedianProblem<f64>, factor: f64) -> MedianProblem<f64> {
    let weights: Vec<f64> = prob.weights().iter().map(|w| w * factor).collect();
    let distances: Vec<Vec<f64>> = (0..prob.demand_count())
        .map(|i| {
            (0..prob.candidate_count())
                .map(|j| prob.distance(i, j))
                .collect()
        })
        .collect();
    MedianProblem::new(weights, distances, prob.p()).expect("scaled instance is valid")
}

/// Specification of a rectangular road lattice.
#[derive(Debug, Clone, Copy)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing_m: f64,
    /// Probability an edge is one-way (random orientation).
    pub one_way_fraction: f64,
}

impl LatticeSpec {
    pub fn node_id(&self, ix: usize, iy: usize) -> u64 {
        (iy * self.nx + ix) as u64
    }
}

const LATTICE_ORIGIN: (f64, f64) = (74.20, 31.40);

fn lattice_positions(spec: &LatticeSpec) -> Vec<Vec<GeoPoint<f64>>> {
    let lat0 = LATTICE_ORIGIN.1;
    let dlat = spec.spacing_m / METERS_PER_DEGREE;
    let dlon = spec.spacing_m / (METERS_PER_DEGREE * lat0.to_radians().cos());
    (0..spec.ny)
        .map(|iy| {
            (0..spec.nx)
                .map(|ix| {
                    geo(
                        LATTICE_ORIGIN.0 + ix as f64 * dlon,
                        LATTICE_ORIGIN.1 + iy as f64 * dlat,
                    )
                })
                .collect()
        })
        .collect()
}

/// Generates lattice edge records with the requested one-way fraction.
/// One-way edges are stored in their traversable order with the matching
/// cardinal tag.
pub fn lattice_edges(spec: &LatticeSpec, seed: u64) -> Vec<EdgeRecord<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = lattice_positions(spec);
    let mut records = Vec::new();
    let mut edge_id = 0u64;
    let mut push = |rng: &mut ChaCha8Rng,
                    records: &mut Vec<EdgeRecord<f64>>,
                    a: (usize, usize),
                    b: (usize, usize),
                    horizontal: bool| {
        let (mut from, mut to) = (a, b);
        let direction = if rng.gen_bool(spec.one_way_fraction) {
            let forward = rng.gen_bool(0.5);
            if !forward {
                std::mem::swap(&mut from, &mut to);
            }
            Some(match (horizontal, forward) {
                (true, true) => DirectionTag::EastBound,
                (true, false) => DirectionTag::WestBound,
                (false, true) => DirectionTag::NorthBound,
                (false, false) => DirectionTag::SouthBound,
            })
        } else {
            None
        };
        records.push(EdgeRecord {
            edge_id,
            from: spec.node_id(from.0, from.1),
            to: spec.node_id(to.0, to.1),
            from_pos: positions[from.1][from.0],
            to_pos: positions[to.1][to.0],
            length_m: Some(spec.spacing_m),
            direction,
            road_class: RoadClass::Local,
        });
        edge_id += 1;
    };
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            if ix + 1 < spec.nx {
                push(&mut rng, &mut records, (ix, iy), (ix + 1, iy), true);
            }
            if iy + 1 < spec.ny {
                push(&mut rng, &mut records, (ix, iy), (ix, iy + 1), false);
            }
        }
    }
    records
}

fn is_strongly_connected(g: &RoadGraph<f64>) -> bool {
    let n = g.node_count();
    if n == 0 {
        return false;
    }
    let mut reverse = vec![Vec::new(); n];
    for v in 0..n {
        for arc in g.out_arcs(v) {
            reverse[arc.to].push(v);
        }
    }
    let reach = |next: &dyn Fn(usize) -> Vec<usize>| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for w in next(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    };
    reach(&|v| g.out_arcs(v).iter().map(|a| a.to).collect())
        && reach(&|v| reverse[v].clone())
}

/// Builds a strongly connected lattice, re-rolling the one-way orientation
/// until every node can reach every other. Deterministic given the seed.
pub fn connected_lattice(spec: &LatticeSpec, seed: u64) -> (Vec<EdgeRecord<f64>>, RoadGraph<f64>) {
    for attempt in 0..100 {
        let records = lattice_edges(spec, seed.wrapping_add(attempt * 0x9E37_79B9));
        let graph = load_road_graph(&records, &BTreeSet::new()).expect("lattice records valid");
        if is_strongly_connected(&graph) {
            return (records, graph);
        }
    }
    panic!("no strongly connected lattice found for seed {seed}");
}

/// A complete synthetic instance: road lattice, clustered deliveries, and
/// initial hubs displaced from the demand cluster centers.
pub struct SyntheticInstance {
    pub edges: Vec<EdgeRecord<f64>>,
    pub graph: RoadGraph<f64>,
    pub deliveries: Vec<DeliveryRecord<f64>>,
    pub initial_hubs: Vec<GeoPoint<f64>>,
    pub frame: PlanarFrame<f64>,
}

/// Box-Muller standard normal pair.
fn normal(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Gaussian delivery clusters on a lattice. Pins are rounded to a fine grid
/// so repeated coordinates occur, exercising aggregation. Cluster centers are
/// spread across the lattice; initial hubs are displaced by `displace_m`.
pub fn synthetic_instance(
    spec: &LatticeSpec,
    clusters: usize,
    deliveries: usize,
    sigma_m: f64,
    displace_m: f64,
    seed: u64,
) -> SyntheticInstance {
    let (edges, graph) = connected_lattice(spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDEAD_BEEF);

    let width = (spec.nx - 1) as f64 * spec.spacing_m;
    let height = (spec.ny - 1) as f64 * spec.spacing_m;
    let positions: Vec<GeoPoint<f64>> = graph.nodes().iter().map(|n| n.pos).collect();
    let frame = PlanarFrame::centered_on(&positions).expect("lattice non-empty");
    // Lattice southwest corner in frame coordinates.
    let (x0, y0) = frame.project(graph.nodes()[0].pos);

    let centers: Vec<(f64, f64)> = (0..clusters)
        .map(|_| {
            (
                x0 + rng.gen_range(0.15..0.85) * width,
                y0 + rng.gen_range(0.15..0.85) * height,
            )
        })
        .collect();

    let pin_grid = 50.0; // meters; quantization creates duplicate pins
    let mut out = Vec::with_capacity(deliveries);
    for i in 0..deliveries {
        let (cx, cy) = centers[i % clusters];
        let (gx, gy) = normal(&mut rng);
        let x = (cx + gx * sigma_m).clamp(x0, x0 + width);
        let y = (cy + gy * sigma_m).clamp(y0, y0 + height);
        let x = (x / pin_grid).round() * pin_grid;
        let y = (y / pin_grid).round() * pin_grid;
        out.push(DeliveryRecord {
            pos: frame.unproject(x, y),
            timestamp: None,
        });
    }

    let initial_hubs: Vec<GeoPoint<f64>> = centers
        .iter()
        .map(|&(cx, cy)| {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = (cx + displace_m * angle.cos()).clamp(x0, x0 + width);
            let y = (cy + displace_m * angle.sin()).clamp(y0, y0 + height);
            frame.unproject(x, y)
        })
        .collect();

    SyntheticInstance {
        edges,
        graph,
        deliveries: out,
        initial_hubs,
        frame,
    }
}

/// The end-to-end analogue instance: 20x20 lattice with 500 m edges, 10%
/// one-way, 3 Gaussian demand clusters of ~2000 deliveries, hubs displaced
/// 2 km from the cluster centers.
pub fn lahore_analogue(seed: u64) -> SyntheticInstance {
    let spec = LatticeSpec {
        nx: 20,
        ny: 20,
        spacing_m: 500.0,
        one_way_fraction: 0.10,
    };
    synthetic_instance(&spec, 3, 2000, 1200.0, 2000.0, seed)
}

/// Population cells on a km grid covering the lattice extent, with integer
/// ppp values.
pub fn population_grid(spec: &LatticeSpec, graph: &RoadGraph<f64>, seed: u64) -> Vec<PopulationCell<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let positions: Vec<GeoPoint<f64>> = graph.nodes().iter().map(|n| n.pos).collect();
    let frame = PlanarFrame::centered_on(&positions).expect("lattice non-empty");
    let (x0, y0) = frame.project(graph.nodes()[0].pos);
    let width = (spec.nx - 1) as f64 * spec.spacing_m;
    let height = (spec.ny - 1) as f64 * spec.spacing_m;
    let nx = (width / 1000.0).ceil() as usize;
    let ny = (height / 1000.0).ceil() as usize;
    let mut cells = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            cells.push(PopulationCell {
                center: frame.unproject(
                    x0 + (ix as f64 + 0.5) * 1000.0,
                    y0 + (iy as f64 + 0.5) * 1000.0,
                ),
                ppp: rng.gen_range(10..=5000) as f64,
            });
        }
    }
    cells
}

fn write_file(path: &Path, contents: &str) {
    let mut f = std::fs::File::create(path).expect("create fixture file");
    f.write_all(contents.as_bytes()).expect("write fixture file");
}

/// Writes an edges CSV in the ingestion format.
pub fn write_edges_csv(path: &Path, records: &[EdgeRecord<f64>]) {
    let mut text =
        String::from("edge_id,from_id,to_id,from_lon,from_lat,to_lon,to_lat,length_m,direction,road_class\n");
    for r in records {
        let direction = r.direction.map(|d| d.as_str()).unwrap_or("None");
        let length = r.length_m.map(|l| l.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.edge_id,
            r.from,
            r.to,
            r.from_pos.lon,
            r.from_pos.lat,
            r.to_pos.lon,
            r.to_pos.lat,
            length,
            direction,
            r.road_class.as_str()
        ));
    }
    write_file(path, &text);
}

pub fn write_deliveries_csv(path: &Path, records: &[DeliveryRecord<f64>]) {
    let mut text = String::from("lon,lat\n");
    for r in records {
        text.push_str(&format!("{},{}\n", r.pos.lon, r.pos.lat));
    }
    write_file(path, &text);
}

pub fn write_points_csv(path: &Path, points: &[GeoPoint<f64>]) {
    let mut text = String::from("lon,lat\n");
    for p in points {
        text.push_str(&format!("{},{}\n", p.lon, p.lat));
    }
    write_file(path, &text);
}

pub fn write_population_csv(path: &Path, cells: &[PopulationCell<f64>]) {
    let mut text = String::from("lon,lat,ppp\n");
    for c in cells {
        text.push_str(&format!("{},{},{}\n", c.center.lon, c.center.lat, c.ppp));
    }
    write_file(path, &text);
}

/// Snapped node ids for a point set; panics on failure (fixture convenience).
pub fn snap_all(g: &RoadGraph<f64>, points: &[GeoPoint<f64>], max_snap_m: f64) -> Vec<NodeId> {
    points
        .iter()
        .map(|&p| hubopt_core::road_graph::snap_to_node(g, p, max_snap_m).expect("fixture snaps"))
        .collect()
}
