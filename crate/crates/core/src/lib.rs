//! Road-network logistics hub placement.
//!
//! The library places distribution hubs for last-mile delivery by running a
//! network k-means loop: demand points are clustered by road-network distance
//! to the nearest hub, then each cluster's hub is relocated to the exact
//! 1-median over a grid of road-snapped candidate sites. The objective is the
//! average road distance per delivery, which the loop decreases monotonically.
//!
//! All metric quantities (meters, weights, projected coordinates) are generic
//! over [`scalar::Scalar`], so the same code runs in `f32` or `f64`. The type
//! aliases below pin the common instantiations; the CLI works in `f64`.

pub mod candidate_grid;
pub mod demand;
pub mod geo;
pub mod hub_optimizer;
pub mod hull;
pub mod io;
pub mod median_solver;
pub mod report;
pub mod road_graph;
pub mod scalar;

pub use scalar::Scalar;

pub type GeoPoint64 = geo::GeoPoint<f64>;
pub type PlanarFrame64 = geo::PlanarFrame<f64>;
pub type RoadGraph64 = road_graph::RoadGraph<f64>;
pub type DistanceMatrix64 = road_graph::DistanceMatrix<f64>;
pub type DemandPoint64 = demand::DemandPoint<f64>;
pub type MedianProblem64 = median_solver::MedianProblem<f64>;
pub type MedianSolution64 = median_solver::MedianSolution<f64>;
pub type OptimizerConfig64 = hub_optimizer::OptimizerConfig<f64>;
pub type OptimizationReport64 = hub_optimizer::OptimizationReport<f64>;

pub type GeoPoint32 = geo::GeoPoint<f32>;
pub type PlanarFrame32 = geo::PlanarFrame<f32>;
pub type RoadGraph32 = road_graph::RoadGraph<f32>;
pub type DistanceMatrix32 = road_graph::DistanceMatrix<f32>;
pub type DemandPoint32 = demand::DemandPoint<f32>;
pub type MedianProblem32 = median_solver::MedianProblem<f32>;
pub type MedianSolution32 = median_solver::MedianSolution<f32>;
pub type OptimizerConfig32 = hub_optimizer::OptimizerConfig<f32>;
pub type OptimizationReport32 = hub_optimizer::OptimizationReport<f32>;
