//! End-to-end optimizer runs on synthetic instances: monotone descent,
//! convergence, local optimality at the fixed point, and the weight-blend
//! endpoints.

use hubopt_core::candidate_grid::generate_candidates;
use hubopt_core::demand::{
    build_phase1_demand, build_phase2_demand, NormScheme, WeightBlend,
};
use hubopt_core::hub_optimizer::{
    baseline_report, run, OptimizerConfig, StopReason,
};
use hubopt_core::median_solver::{solve_1median, verify_solution, MedianProblem};
use hubopt_core::road_graph::{od_matrix, SnapPolicy};
use hubopt_core::DemandPoint64;
use hubopt_testkit as testkit;

fn config() -> OptimizerConfig<f64> {
    OptimizerConfig::default()
}

#[test]
fn objective_never_increases_on_synthetic_instances() {
    for seed in 0..8 {
        let spec = testkit::LatticeSpec {
            nx: 10,
            ny: 10,
            spacing_m: 500.0,
            one_way_fraction: 0.15,
        };
        let k = 2 + (seed as usize % 3);
        let inst = testkit::synthetic_instance(&spec, k, 400, 800.0, 1500.0, seed);
        let (demand, _) =
            build_phase1_demand(&inst.graph, &inst.deliveries, 2000.0, SnapPolicy::Strict)
                .unwrap();
        let report = run(&inst.graph, &inst.frame, &demand, &inst.initial_hubs, &config()).unwrap();
        let objectives: Vec<f64> = report.iterations.iter().map(|s| s.objective_m).collect();
        for w in objectives.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: objective rose in {objectives:?}");
        }
        assert!(report.iterations.len() <= 10);
        assert!(matches!(
            report.stop_reason,
            StopReason::CutoffMet | StopReason::MaxIterations
        ));
    }
}

#[test]
fn final_centroids_are_one_median_optimal_for_their_clusters() {
    let inst = testkit::lahore_analogue(11);
    let (demand, _) =
        build_phase1_demand(&inst.graph, &inst.deliveries, 2000.0, SnapPolicy::Strict).unwrap();
    let cfg = config();
    let report = run(&inst.graph, &inst.frame, &demand, &inst.initial_hubs, &cfg).unwrap();
    assert_eq!(report.stop_reason, StopReason::CutoffMet);

    for hub in &report.final_hubs {
        let members: Vec<&DemandPoint64> = demand
            .iter()
            .filter(|d| report.final_assignment[d.id] == Some(hub.cluster))
            .collect();
        assert!(!members.is_empty(), "cluster {} is empty", hub.cluster);

        // Rebuild the candidate set and the 1-median instance independently.
        let positions: Vec<_> = members.iter().map(|d| d.pos).collect();
        let candidates = generate_candidates(
            &inst.graph,
            &inst.frame,
            &positions,
            cfg.grid_res_m,
            hub.node,
            cfg.max_snap_m,
        )
        .unwrap();
        let nodes = candidates.nodes();
        let member_nodes: Vec<usize> = members.iter().map(|d| d.node).collect();
        let od = od_matrix(&inst.graph, &nodes, &member_nodes).unwrap();
        let distances: Vec<Vec<f64>> = (0..member_nodes.len())
            .map(|i| (0..nodes.len()).map(|j| od.get(j, i)).collect())
            .collect();
        let weights: Vec<f64> = members.iter().map(|d| d.weight).collect();
        let prob = MedianProblem::new(weights, distances, 1).unwrap();
        let sol = solve_1median(&prob).unwrap();
        assert!(verify_solution(&prob, &sol).is_ok());
        assert_eq!(
            nodes[sol.open[0]], hub.node,
            "cluster {}: hub is not the 1-median of its final cluster",
            hub.cluster
        );
    }
}

#[test]
fn optimized_objective_beats_displaced_baseline() {
    let inst = testkit::lahore_analogue(3);
    let (demand, _) =
        build_phase1_demand(&inst.graph, &inst.deliveries, 2000.0, SnapPolicy::Strict).unwrap();
    let cfg = config();
    let baseline = baseline_report(&inst.graph, &demand, &inst.initial_hubs, &cfg).unwrap();
    let report = run(&inst.graph, &inst.frame, &demand, &inst.initial_hubs, &cfg).unwrap();
    assert_eq!(report.baseline_objective_m, baseline.objective_m);
    assert!(report.final_objective_m() < baseline.objective_m);
}

#[test]
fn identical_inputs_produce_identical_reports() {
    let inst = testkit::lahore_analogue(5);
    let (demand, _) =
        build_phase1_demand(&inst.graph, &inst.deliveries, 2000.0, SnapPolicy::Strict).unwrap();
    let a = run(&inst.graph, &inst.frame, &demand, &inst.initial_hubs, &config()).unwrap();
    let b = run(&inst.graph, &inst.frame, &demand, &inst.initial_hubs, &config()).unwrap();
    assert_eq!(a, b);
    let ja = serde_json::to_string(&a).unwrap();
    let jb = serde_json::to_string(&b).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn clusters_partition_the_demand_every_run() {
    let inst = testkit::lahore_analogue(8);
    let (demand, _) =
        build_phase1_demand(&inst.graph, &inst.deliveries, 2000.0, SnapPolicy::Strict).unwrap();
    let report = run(&inst.graph, &inst.frame, &demand, &inst.initial_hubs, &config()).unwrap();
    let assigned = report
        .final_assignment
        .iter()
        .filter(|c| c.is_some())
        .count();
    assert_eq!(assigned + report.dropped_demand.len(), demand.len());
    for (i, cluster) in report.final_assignment.iter().enumerate() {
        if cluster.is_none() {
            assert!(report.dropped_demand.contains(&i));
        }
    }
}

/// With a power-of-two maximum per-cell count, max-normalization is an exact
/// binary scaling, so the alpha = 1 phase-2 run must equal the phase-1 run on
/// the same binned demand bit for bit.
#[test]
fn alpha_one_equals_phase1_on_binned_demand() {
    let spec = testkit::LatticeSpec {
        nx: 14,
        ny: 14,
        spacing_m: 500.0,
        one_way_fraction: 0.1,
    };
    let inst = testkit::synthetic_instance(&spec, 3, 509, 900.0, 1500.0, 21);
    let cells = testkit::population_grid(&spec, &inst.graph, 21);

    // Pad delivery counts in one cell so the maximum is a power of two.
    let mut deliveries = inst.deliveries.clone();
    let (binned_probe, _) = build_phase2_demand(
        &inst.graph,
        &deliveries,
        &cells,
        WeightBlend::new(1.0).unwrap(),
        NormScheme::Max,
        2000.0,
        SnapPolicy::Lenient,
    )
    .unwrap();
    let max_count = binned_probe.iter().map(|d| d.count).max().unwrap();
    let target = max_count.next_power_of_two();
    let busiest = binned_probe
        .iter()
        .max_by_key(|d| d.count)
        .expect("non-empty demand");
    for _ in 0..(target - max_count) {
        deliveries.push(hubopt_core::demand::DeliveryRecord {
            pos: busiest.pos,
            timestamp: None,
        });
    }

    let (phase2, _) = build_phase2_demand(
        &inst.graph,
        &deliveries,
        &cells,
        WeightBlend::new(1.0).unwrap(),
        NormScheme::Max,
        2000.0,
        SnapPolicy::Lenient,
    )
    .unwrap();
    assert_eq!(phase2.iter().map(|d| d.count).max().unwrap(), target);

    // Phase-1 weighting on the same binned demand: weight = raw count.
    let phase1_binned: Vec<DemandPoint64> = phase2
        .iter()
        .map(|d| DemandPoint64 {
            weight: d.count as f64,
            ..d.clone()
        })
        .collect();

    let a = run(&inst.graph, &inst.frame, &phase2, &inst.initial_hubs, &config()).unwrap();
    let b = run(
        &inst.graph,
        &inst.frame,
        &phase1_binned,
        &inst.initial_hubs,
        &config(),
    )
    .unwrap();
    assert_eq!(a, b);
}

/// At alpha = 0 the delivery counts multiply into the weights with factor
/// zero, so permuting them cannot change the outcome.
#[test]
fn alpha_zero_is_independent_of_delivery_counts() {
    let spec = testkit::LatticeSpec {
        nx: 14,
        ny: 14,
        spacing_m: 500.0,
        one_way_fraction: 0.1,
    };
    let inst = testkit::synthetic_instance(&spec, 3, 700, 900.0, 1500.0, 33);
    let cells = testkit::population_grid(&spec, &inst.graph, 33);
    let blend = WeightBlend::new(0.0).unwrap();

    // Second delivery set: all deliveries shifted to a different cell, which
    // permutes (in fact rewrites) the per-cell counts.
    let moved: Vec<_> = inst
        .deliveries
        .iter()
        .map(|_| hubopt_core::demand::DeliveryRecord {
            pos: cells[0].center,
            timestamp: None,
        })
        .collect();

    let (demand_a, _) = build_phase2_demand(
        &inst.graph,
        &inst.deliveries,
        &cells,
        blend,
        NormScheme::Max,
        2000.0,
        SnapPolicy::Lenient,
    )
    .unwrap();
    let (demand_b, _) = build_phase2_demand(
        &inst.graph,
        &moved,
        &cells,
        blend,
        NormScheme::Max,
        2000.0,
        SnapPolicy::Lenient,
    )
    .unwrap();

    let weights_a: Vec<f64> = demand_a.iter().map(|d| d.weight).collect();
    let weights_b: Vec<f64> = demand_b.iter().map(|d| d.weight).collect();
    assert_eq!(weights_a, weights_b, "population-only weights must match");

    let a = run(&inst.graph, &inst.frame, &demand_a, &inst.initial_hubs, &config()).unwrap();
    let b = run(&inst.graph, &inst.frame, &demand_b, &inst.initial_hubs, &config()).unwrap();
    assert_eq!(a, b);
}
