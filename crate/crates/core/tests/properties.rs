//! Property suites for the structural invariants.

use proptest::prelude::*;
use std::collections::BTreeSet;

use hubopt_core::demand::{aggregate_deliveries, blend_weight, DeliveryRecord, WeightBlend};
use hubopt_core::geo::{GeoPoint, PlanarFrame};
use hubopt_core::hull::convex_hull;
use hubopt_core::median_solver::{
    solve_1median, solve_pmedian_exact, verify_solution, MedianProblem,
};
use hubopt_core::road_graph::{
    load_road_graph, od_matrix, sssp, DirectionTag, EdgeRecord, RoadClass,
};
use hubopt_core::candidate_grid::{generate_candidates, grid_dims};

fn pt(lon: f64, lat: f64) -> GeoPoint<f64> {
    GeoPoint::new(lon, lat).unwrap()
}

/// Strategy: a connected random graph as (node_count, edges) where each edge
/// is (from, to, integer length, one_way).
fn graph_edges(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, u32, bool)>)> {
    (3usize..max_nodes).prop_flat_map(|n| {
        let edge = (0..n, 0..n, 1u32..5000, any::<bool>());
        // A spanning chain keeps things mostly connected; extras add cycles.
        let extras = proptest::collection::vec(edge, 0..2 * n);
        extras.prop_map(move |extra| {
            let mut edges: Vec<(usize, usize, u32, bool)> = (1..n)
                .map(|i| (i - 1, i, 1000 + (i as u32 % 17) * 100, false))
                .collect();
            edges.extend(extra.into_iter().filter(|&(a, b, _, _)| a != b));
            (n, edges)
        })
    })
}

fn build_graph(
    n: usize,
    edges: &[(usize, usize, u32, bool)],
    flip_one_ways: bool,
) -> hubopt_core::RoadGraph64 {
    let records: Vec<EdgeRecord<f64>> = edges
        .iter()
        .enumerate()
        .map(|(id, &(a, b, len, one_way))| {
            let (from, to) = if one_way && flip_one_ways { (b, a) } else { (a, b) };
            EdgeRecord {
                edge_id: id as u64,
                from: from as u64,
                to: to as u64,
                from_pos: pt(74.0 + from as f64 * 1e-4, 31.0 + (from % 7) as f64 * 1e-4),
                to_pos: pt(74.0 + to as f64 * 1e-4, 31.0 + (to % 7) as f64 * 1e-4),
                length_m: Some(len as f64),
                direction: one_way.then_some(DirectionTag::NorthBound),
                road_class: RoadClass::Local,
            }
        })
        .collect();
    let _ = n;
    load_road_graph(&records, &BTreeSet::new()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality_holds((n, edges) in graph_edges(16)) {
        let g = build_graph(n, &edges, false);
        let all: Vec<usize> = (0..g.node_count()).collect();
        let m = od_matrix(&g, &all, &all).unwrap();
        for x in 0..all.len() {
            for y in 0..all.len() {
                for z in 0..all.len() {
                    let (xz, xy, yz) = (m.get(x, z), m.get(x, y), m.get(y, z));
                    if xy.is_finite() && yz.is_finite() {
                        prop_assert!(xz <= xy + yz, "d({x},{z})={xz} > {xy}+{yz}");
                    }
                }
            }
        }
    }

    #[test]
    fn two_way_graphs_have_symmetric_matrices((n, edges) in graph_edges(16)) {
        let two_way: Vec<_> = edges.iter().map(|&(a, b, l, _)| (a, b, l, false)).collect();
        let g = build_graph(n, &two_way, false);
        let all: Vec<usize> = (0..g.node_count()).collect();
        let m = od_matrix(&g, &all, &all).unwrap();
        for i in 0..all.len() {
            prop_assert_eq!(m.get(i, i), 0.0);
            for j in 0..all.len() {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn reversing_one_ways_transposes_the_matrix((n, edges) in graph_edges(16)) {
        let g = build_graph(n, &edges, false);
        let rev = build_graph(n, &edges, true);
        let all: Vec<usize> = (0..g.node_count()).collect();
        let m = od_matrix(&g, &all, &all).unwrap();
        let mr = od_matrix(&rev, &all, &all).unwrap();
        for i in 0..all.len() {
            for j in 0..all.len() {
                prop_assert_eq!(m.get(i, j), mr.get(j, i));
            }
        }
    }

    #[test]
    fn aggregation_is_permutation_invariant(
        coords in proptest::collection::vec((0u8..6, 0u8..6), 0..40),
        shuffle_seed in any::<u64>(),
    ) {
        let records: Vec<DeliveryRecord<f64>> = coords
            .iter()
            .map(|&(a, b)| DeliveryRecord {
                pos: pt(74.0 + a as f64 * 0.01, 31.0 + b as f64 * 0.01),
                timestamp: None,
            })
            .collect();
        let mut shuffled = records.clone();
        // Fisher-Yates with a simple LCG so the shuffle is reproducible.
        let mut state = shuffle_seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let a = aggregate_deliveries(&records);
        let b = aggregate_deliveries(&shuffled);
        prop_assert_eq!(&a, &b);
        let total: u64 = a.iter().map(|&(_, c)| c).sum();
        prop_assert_eq!(total, records.len() as u64);
    }

    #[test]
    fn blend_is_monotone_in_both_arguments(
        x1 in 0.0f64..=1.0, x2 in 0.0f64..=1.0,
        y1 in 0.0f64..=1.0, y2 in 0.0f64..=1.0,
        alpha in 0.0f64..=1.0,
    ) {
        let blend = WeightBlend::new(alpha).unwrap();
        let (xl, xh) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let (yl, yh) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        let low = blend_weight(xl, yl, blend).unwrap();
        let high = blend_weight(xh, yh, blend).unwrap();
        prop_assert!(low <= high);
        let one = WeightBlend::new(1.0).unwrap();
        let zero = WeightBlend::new(0.0).unwrap();
        prop_assert_eq!(blend_weight(x1, y1, one).unwrap(), x1);
        prop_assert_eq!(blend_weight(x1, y1, zero).unwrap(), y1);
    }

    #[test]
    fn median_invariants(
        seed in 0u64..10_000,
        p in 1usize..3,
        factor in 1u32..50,
    ) {
        let prob = hubopt_testkit::random_median_problem(seed, 12, 8, p);
        let sol = solve_pmedian_exact(&prob).unwrap();
        prop_assert!(verify_solution(&prob, &sol).is_ok());

        // Positive scaling: same open set, linearly scaled cost.
        let scaled = hubopt_testkit::scale_weights(&prob, factor as f64);
        let scaled_sol = solve_pmedian_exact(&scaled).unwrap();
        prop_assert_eq!(&scaled_sol.open, &sol.open);
        prop_assert_eq!(scaled_sol.cost, sol.cost * factor as f64);

        // Zero-weight demand never affects the chosen candidate set.
        let mut weights = prob.weights().to_vec();
        let mut distances: Vec<Vec<f64>> = (0..prob.demand_count())
            .map(|i| (0..prob.candidate_count()).map(|j| prob.distance(i, j)).collect())
            .collect();
        weights.push(0.0);
        distances.push(vec![1.0; prob.candidate_count()]);
        let padded = MedianProblem::new(weights, distances.clone(), p).unwrap();
        let padded_sol = solve_pmedian_exact(&padded).unwrap();
        prop_assert_eq!(&padded_sol.open, &sol.open);
        prop_assert_eq!(padded_sol.cost, sol.cost);

        // Adding a candidate can never increase the optimal cost.
        let mut wider: Vec<Vec<f64>> = (0..prob.demand_count())
            .map(|i| (0..prob.candidate_count()).map(|j| prob.distance(i, j)).collect())
            .collect();
        for (i, row) in wider.iter_mut().enumerate() {
            row.push(((seed + i as u64) % 20_000) as f64);
        }
        let wider_prob = MedianProblem::new(prob.weights().to_vec(), wider, p).unwrap();
        let wider_sol = solve_pmedian_exact(&wider_prob).unwrap();
        prop_assert!(wider_sol.cost <= sol.cost);

        if p == 1 {
            let single = solve_1median(&prob).unwrap();
            prop_assert_eq!(&single.open, &sol.open);
            prop_assert_eq!(single.cost, sol.cost);
        }
    }

    #[test]
    fn hull_contains_every_input_point(
        raw in proptest::collection::vec((-500i32..500, -500i32..500), 1..60),
    ) {
        let points: Vec<(f64, f64)> = raw.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        let hull = convex_hull(&points).unwrap();
        prop_assert!(!hull.is_empty());
        if hull.len() >= 3 {
            for &p in &points {
                for i in 0..hull.len() {
                    let a = hull[i];
                    let b = hull[(i + 1) % hull.len()];
                    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                    prop_assert!(cross >= 0.0, "{p:?} outside edge {a:?}->{b:?}");
                }
            }
        }
    }

    #[test]
    fn candidate_grid_invariants(
        offsets in proptest::collection::vec((0u32..9000, 0u32..9000), 1..20),
        res_km in 1u32..4,
        incumbent in 0usize..20,
    ) {
        let g = hubopt_testkit::random_graph(7, 20, 40);
        let positions: Vec<GeoPoint<f64>> = g.nodes().iter().map(|n| n.pos).collect();
        let frame = PlanarFrame::centered_on(&positions).unwrap();
        let points: Vec<GeoPoint<f64>> = offsets
            .iter()
            .map(|&(x, y)| frame.unproject(x as f64 - 4500.0, y as f64 - 4500.0))
            .collect();
        let res = res_km as f64 * 1000.0;
        let set = generate_candidates(&g, &frame, &points, res, incumbent, 50_000.0).unwrap();

        // The incumbent is always a member.
        prop_assert!(set.index_of(incumbent).is_some());

        // Candidate count is bounded by cells + 1.
        let (nx, ny) = grid_dims(&frame, &points, res).unwrap();
        prop_assert!(set.sites.len() <= nx * ny + 1);

        // Doubling the resolution never increases the pre-snap cell count.
        let (nx2, ny2) = grid_dims(&frame, &points, res * 2.0).unwrap();
        prop_assert!(nx2 * ny2 <= nx * ny);

        // No two candidates share a node.
        let mut nodes = set.nodes();
        nodes.sort_unstable();
        nodes.dedup();
        prop_assert_eq!(nodes.len(), set.sites.len());
    }
}

#[test]
fn sssp_source_distance_is_zero_everywhere() {
    for seed in 0..10 {
        let g = hubopt_testkit::random_graph(seed, 20, 30);
        for source in 0..g.node_count() {
            let d = sssp(&g, source).unwrap();
            assert_eq!(d[source], 0.0);
            assert!(d.iter().all(|&x| x >= 0.0));
        }
    }
}
