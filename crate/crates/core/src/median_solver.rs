//! P-median solvers over a demand-by-candidate distance matrix: exact for
//! p = 1 (the per-cluster centroid update), exact by enumeration for small
//! instances, and vertex-substitution local search for the rest.
//!
//! Throughout, an infinite distance disqualifies a candidate set only against
//! demand with positive weight, and ties break toward the smallest index.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{to_f64, Scalar};

/// Default cap on the number of subsets exact enumeration will visit.
pub const EXACT_ENUMERATION_CAP: u128 = 200_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("no candidate can serve every positively-weighted demand")]
    Infeasible,
    #[error("{combinations} candidate subsets exceed the enumeration cap of {cap}")]
    TooLarge { combinations: u128, cap: u128 },
}

/// A p-median instance: demand weights, a demand-by-candidate distance
/// matrix in meters (entries may be `+inf` for unreachable pairs), and the
/// number of sites to open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct MedianProblem<T> {
    weights: Vec<T>,
    #[serde(with = "infinite_matrix")]
    distances: Vec<Vec<T>>,
    p: usize,
}

impl<T: Scalar> MedianProblem<T> {
    /// Validates: weights non-negative and finite with at least one positive,
    /// a rectangular matrix with one row per weight, entries >= 0 (possibly
    /// infinite), and 1 <= p <= candidate count.
    pub fn new(weights: Vec<T>, distances: Vec<Vec<T>>, p: usize) -> Result<Self, SolverError> {
        if weights.is_empty() {
            return Err(SolverError::InvalidProblem("no demand points".into()));
        }
        if weights.len() != distances.len() {
            return Err(SolverError::InvalidProblem(format!(
                "{} weights but {} distance rows",
                weights.len(),
                distances.len()
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w >= T::zero()) {
                return Err(SolverError::InvalidProblem(format!(
                    "weight {i} is {}",
                    to_f64(w)
                )));
            }
        }
        if !weights.iter().any(|&w| w > T::zero()) {
            return Err(SolverError::InvalidProblem(
                "all demand weights are zero".into(),
            ));
        }
        let candidates = distances.first().map(|r| r.len()).unwrap_or(0);
        if candidates == 0 {
            return Err(SolverError::InvalidProblem("no candidates".into()));
        }
        for (i, row) in distances.iter().enumerate() {
            if row.len() != candidates {
                return Err(SolverError::InvalidProblem(format!(
                    "distance row {i} has {} entries, expected {candidates}",
                    row.len()
                )));
            }
            for (j, &d) in row.iter().enumerate() {
                if d.is_nan() || d < T::zero() {
                    return Err(SolverError::InvalidProblem(format!(
                        "distance ({i}, {j}) is {}",
                        to_f64(d)
                    )));
                }
            }
        }
        if p == 0 || p > candidates {
            return Err(SolverError::InvalidProblem(format!(
                "p = {p} with {candidates} candidates"
            )));
        }
        Ok(Self {
            weights,
            distances,
            p,
        })
    }

    pub fn demand_count(&self) -> usize {
        self.weights.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.distances[0].len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn distance(&self, demand: usize, candidate: usize) -> T {
        self.distances[demand][candidate]
    }
}

/// A solved placement: open candidate indices (ascending), the assignment of
/// each demand to an open candidate, and the weighted cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianSolution<T> {
    pub open: Vec<usize>,
    pub assign: Vec<usize>,
    pub cost: T,
}

/// Assigns every demand to its nearest subset member (ties to the smallest
/// index) and accumulates the weighted cost in demand order. Returns `None`
/// if some positively-weighted demand cannot reach any subset member.
fn evaluate_subset<T: Scalar>(
    prob: &MedianProblem<T>,
    subset: &[usize],
) -> Option<(Vec<usize>, T)> {
    let mut assign = Vec::with_capacity(prob.demand_count());
    let mut cost = T::zero();
    for i in 0..prob.demand_count() {
        let mut best = subset[0];
        let mut best_d = prob.distance(i, subset[0]);
        for &j in &subset[1..] {
            let d = prob.distance(i, j);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        let w = prob.weights[i];
        if w > T::zero() {
            if best_d.is_infinite() {
                return None;
            }
            cost = cost + w * best_d;
        }
        assign.push(best);
    }
    Some((assign, cost))
}

/// Exact 1-median: the candidate minimizing the weighted distance sum.
/// Ties break to the smallest candidate index.
pub fn solve_1median<T: Scalar>(prob: &MedianProblem<T>) -> Result<MedianSolution<T>, SolverError> {
    if prob.p != 1 {
        return Err(SolverError::InvalidProblem(format!(
            "solve_1median requires p = 1, got {}",
            prob.p
        )));
    }
    let mut best: Option<(usize, T)> = None;
    for j in 0..prob.candidate_count() {
        let mut cost = T::zero();
        let mut feasible = true;
        for i in 0..prob.demand_count() {
            let w = prob.weights[i];
            if w > T::zero() {
                let d = prob.distance(i, j);
                if d.is_infinite() {
                    feasible = false;
                    break;
                }
                cost = cost + w * d;
            }
        }
        if feasible && best.map_or(true, |(_, c)| cost < c) {
            best = Some((j, cost));
        }
    }
    let (j, cost) = best.ok_or(SolverError::Infeasible)?;
    Ok(MedianSolution {
        open: vec![j],
        assign: vec![j; prob.demand_count()],
        cost,
    })
}

/// Exact p-median by exhaustive enumeration of p-subsets in lexicographic
/// order; ties keep the lexicographically smallest subset.
pub fn solve_pmedian_exact<T: Scalar>(
    prob: &MedianProblem<T>,
) -> Result<MedianSolution<T>, SolverError> {
    solve_pmedian_exact_capped(prob, EXACT_ENUMERATION_CAP)
}

pub fn solve_pmedian_exact_capped<T: Scalar>(
    prob: &MedianProblem<T>,
    cap: u128,
) -> Result<MedianSolution<T>, SolverError> {
    let combinations = binomial(prob.candidate_count() as u128, prob.p as u128);
    if combinations > cap {
        return Err(SolverError::TooLarge { combinations, cap });
    }
    let mut best: Option<(Vec<usize>, Vec<usize>, T)> = None;
    for subset in (0..prob.candidate_count()).combinations(prob.p) {
        if let Some((assign, cost)) = evaluate_subset(prob, &subset) {
            if best.as_ref().map_or(true, |(_, _, c)| cost < *c) {
                best = Some((subset, assign, cost));
            }
        }
    }
    let (open, assign, cost) = best.ok_or(SolverError::Infeasible)?;
    Ok(MedianSolution { open, assign, cost })
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul(n - i) / (i + 1);
    }
    result
}

/// Vertex-substitution local search: from a seeded random p-subset, repeatedly
/// apply the best cost-improving single swap until none improves.
///
/// Equal-cost swaps that reach a lexicographically smaller subset are also
/// taken, so at p = 1 the search lands on exactly the [`solve_1median`]
/// answer, ties included. Deterministic given the seed.
pub fn solve_pmedian_interchange<T: Scalar>(
    prob: &MedianProblem<T>,
    rng_seed: u64,
) -> Result<MedianSolution<T>, SolverError> {
    let candidates = prob.candidate_count();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut current: Vec<usize> = rand::seq::index::sample(&mut rng, candidates, prob.p).into_vec();
    current.sort_unstable();
    let mut current_eval = evaluate_subset(prob, &current);

    loop {
        // Best feasible neighbor by (cost, lexicographic subset).
        let mut best_move: Option<(Vec<usize>, Vec<usize>, T)> = None;
        for out_pos in 0..current.len() {
            for swap_in in 0..candidates {
                if current.contains(&swap_in) {
                    continue;
                }
                let mut next = current.clone();
                next[out_pos] = swap_in;
                next.sort_unstable();
                let Some((assign, cost)) = evaluate_subset(prob, &next) else {
                    continue;
                };
                let better = match &best_move {
                    None => true,
                    Some((subset, _, best_cost)) => {
                        cost < *best_cost || (cost == *best_cost && next < *subset)
                    }
                };
                if better {
                    best_move = Some((next, assign, cost));
                }
            }
        }
        // Move only on strict (cost, lex) descent so the loop terminates;
        // an infeasible current subset accepts any feasible neighbor.
        let Some((subset, assign, cost)) = best_move else {
            break;
        };
        let improves = match &current_eval {
            None => true,
            Some((_, cur_cost)) => cost < *cur_cost || (cost == *cur_cost && subset < current),
        };
        if !improves {
            break;
        }
        current = subset;
        current_eval = Some((assign, cost));
    }

    let (assign, cost) = current_eval.ok_or(SolverError::Infeasible)?;
    Ok(MedianSolution {
        open: current,
        assign,
        cost,
    })
}

/// One verification failure, tied to the constraint it breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The open set must contain exactly p distinct candidates.
    OpenCountMismatch { expected: usize, found: usize },
    OpenOutOfRange { candidate: usize },
    AssignLengthMismatch { expected: usize, found: usize },
    /// A demand is assigned to a candidate that is not open.
    AssignedToClosed { demand: usize, candidate: usize },
    /// A demand is assigned to an open candidate farther than another.
    NotNearestOpen {
        demand: usize,
        assigned: usize,
        nearer: usize,
    },
    /// The recorded cost does not match the recomputed weighted sum.
    CostMismatch { expected: f64, found: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::OpenCountMismatch { expected, found } => {
                write!(f, "open set has {found} sites, expected exactly {expected}")
            }
            Violation::OpenOutOfRange { candidate } => {
                write!(f, "open candidate {candidate} out of range")
            }
            Violation::AssignLengthMismatch { expected, found } => {
                write!(f, "assignment covers {found} demands, expected {expected}")
            }
            Violation::AssignedToClosed { demand, candidate } => {
                write!(f, "demand {demand} assigned to closed candidate {candidate}")
            }
            Violation::NotNearestOpen {
                demand,
                assigned,
                nearer,
            } => write!(
                f,
                "demand {demand} assigned to {assigned} but open candidate {nearer} is nearer"
            ),
            Violation::CostMismatch { expected, found } => {
                write!(f, "cost {found} does not recompute to {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub violations: Vec<Violation>,
}

impl Verification {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that a solution opens exactly p sites, assigns every demand to an
/// open nearest candidate, and that the cost recomputes exactly.
pub fn verify_solution<T: Scalar>(
    prob: &MedianProblem<T>,
    sol: &MedianSolution<T>,
) -> Verification {
    let mut violations = Vec::new();

    let mut open = sol.open.clone();
    open.sort_unstable();
    open.dedup();
    if open.len() != prob.p {
        violations.push(Violation::OpenCountMismatch {
            expected: prob.p,
            found: open.len(),
        });
    }
    for &j in &open {
        if j >= prob.candidate_count() {
            violations.push(Violation::OpenOutOfRange { candidate: j });
        }
    }
    if sol.assign.len() != prob.demand_count() {
        violations.push(Violation::AssignLengthMismatch {
            expected: prob.demand_count(),
            found: sol.assign.len(),
        });
    }
    if !violations.is_empty() {
        return Verification { violations };
    }

    for (i, &j) in sol.assign.iter().enumerate() {
        if !open.contains(&j) {
            violations.push(Violation::AssignedToClosed {
                demand: i,
                candidate: j,
            });
            continue;
        }
        let assigned_d = prob.distance(i, j);
        for &k in &open {
            if prob.distance(i, k) < assigned_d {
                violations.push(Violation::NotNearestOpen {
                    demand: i,
                    assigned: j,
                    nearer: k,
                });
                break;
            }
        }
    }

    let mut cost = T::zero();
    for (i, &j) in sol.assign.iter().enumerate() {
        let w = prob.weights[i];
        if w > T::zero() {
            cost = cost + w * prob.distance(i, j);
        }
    }
    if !(cost == sol.cost) {
        violations.push(Violation::CostMismatch {
            expected: to_f64(cost),
            found: to_f64(sol.cost),
        });
    }

    Verification { violations }
}

/// Serializes distance entries with `+inf` as JSON `null` (JSON has no
/// infinity literal); deserialization maps `null` back to `+inf`.
mod infinite_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scalar::Scalar;

    pub fn serialize<T: Scalar + Serialize, S: Serializer>(
        matrix: &[Vec<T>],
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Option<T>>> = matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&d| if d.is_infinite() { None } else { Some(d) })
                    .collect()
            })
            .collect();
        rows.serialize(serializer)
    }

    pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Vec<Vec<T>>, D::Error> {
        let rows: Vec<Vec<Option<T>>> = Vec::deserialize(deserializer)?;
        Ok(rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|d| d.unwrap_or_else(T::infinity))
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(weights: Vec<f64>, distances: Vec<Vec<f64>>, p: usize) -> MedianProblem<f64> {
        MedianProblem::new(weights, distances, p).unwrap()
    }

    /// Path graph 0-1-2 with unit edges: distance matrix over all nodes.
    fn path3() -> MedianProblem<f64> {
        problem(
            vec![1.0, 1.0, 1.0],
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            1,
        )
    }

    #[test]
    fn single_candidate_is_forced() {
        let prob = problem(vec![2.0, 3.0], vec![vec![10.0], vec![20.0]], 1);
        let sol = solve_1median(&prob).unwrap();
        assert_eq!(sol.open, vec![0]);
        assert_eq!(sol.cost, 2.0 * 10.0 + 3.0 * 20.0);
        assert!(verify_solution(&prob, &sol).is_ok());
    }

    #[test]
    fn path_median_is_the_middle() {
        let sol = solve_1median(&path3()).unwrap();
        assert_eq!(sol.open, vec![1]);
        assert_eq!(sol.cost, 2.0);
    }

    #[test]
    fn weight_scaling_preserves_argmin() {
        let base = path3();
        let scaled = problem(
            base.weights().iter().map(|w| w * 10.0).collect(),
            (0..3).map(|i| (0..3).map(|j| base.distance(i, j)).collect()).collect(),
            1,
        );
        let a = solve_1median(&base).unwrap();
        let b = solve_1median(&scaled).unwrap();
        assert_eq!(a.open, b.open);
        assert_eq!(b.cost, a.cost * 10.0);
    }

    #[test]
    fn infinite_distance_disqualifies_against_positive_weight() {
        let prob = problem(
            vec![1.0, 1.0],
            vec![vec![f64::INFINITY, 5.0], vec![1.0, 5.0]],
            1,
        );
        let sol = solve_1median(&prob).unwrap();
        assert_eq!(sol.open, vec![1]);

        // Zero weight tolerates unreachability.
        let prob = problem(
            vec![0.0, 1.0],
            vec![vec![f64::INFINITY, 5.0], vec![1.0, 5.0]],
            1,
        );
        let sol = solve_1median(&prob).unwrap();
        assert_eq!(sol.open, vec![0]);
        assert_eq!(sol.cost, 1.0);
    }

    #[test]
    fn fully_unreachable_is_infeasible() {
        let prob = problem(vec![1.0], vec![vec![f64::INFINITY]], 1);
        assert!(matches!(solve_1median(&prob), Err(SolverError::Infeasible)));
    }

    #[test]
    fn exact_with_p_equal_to_candidates_opens_all() {
        let prob = problem(
            vec![1.0, 2.0],
            vec![vec![0.0, 9.0], vec![9.0, 0.0]],
            2,
        );
        let sol = solve_pmedian_exact(&prob).unwrap();
        assert_eq!(sol.open, vec![0, 1]);
        assert_eq!(sol.assign, vec![0, 1]);
        assert_eq!(sol.cost, 0.0);
        assert!(verify_solution(&prob, &sol).is_ok());
    }

    #[test]
    fn exact_cap_exceeded() {
        let weights = vec![1.0; 2];
        let distances = vec![vec![1.0; 40]; 2];
        let prob = problem(weights, distances, 10);
        assert!(matches!(
            solve_pmedian_exact_capped(&prob, 1000),
            Err(SolverError::TooLarge { .. })
        ));
    }

    #[test]
    fn interchange_fixed_point_stays_put() {
        // Candidate 0 is optimal; any seed reaching it stays.
        let prob = problem(vec![1.0], vec![vec![0.0, 5.0, 9.0]], 1);
        for seed in 0..5 {
            let sol = solve_pmedian_interchange(&prob, seed).unwrap();
            assert_eq!(sol.open, vec![0]);
        }
    }

    #[test]
    fn verify_flags_wrong_open_count() {
        let prob = path3();
        let mut sol = solve_1median(&prob).unwrap();
        sol.open = vec![0, 1];
        let v = verify_solution(&prob, &sol);
        assert!(!v.is_ok());
        assert!(matches!(
            v.violations[0],
            Violation::OpenCountMismatch { expected: 1, found: 2 }
        ));
    }

    #[test]
    fn verify_flags_assignment_to_closed() {
        let prob = problem(
            vec![1.0, 1.0],
            vec![vec![0.0, 9.0], vec![9.0, 0.0]],
            1,
        );
        let sol = MedianSolution {
            open: vec![0],
            assign: vec![0, 1],
            cost: 9.0,
        };
        let v = verify_solution(&prob, &sol);
        assert!(v
            .violations
            .iter()
            .any(|x| matches!(x, Violation::AssignedToClosed { demand: 1, candidate: 1 })));
    }

    #[test]
    fn verify_flags_not_nearest_and_cost() {
        let prob = problem(
            vec![1.0, 1.0],
            vec![vec![0.0, 9.0], vec![9.0, 0.0]],
            2,
        );
        let sol = MedianSolution {
            open: vec![0, 1],
            assign: vec![1, 1],
            cost: 9.0,
        };
        let v = verify_solution(&prob, &sol);
        assert!(v
            .violations
            .iter()
            .any(|x| matches!(x, Violation::NotNearestOpen { demand: 0, .. })));
    }

    #[test]
    fn problem_json_round_trips_infinity() {
        let prob = problem(
            vec![1.0, 1.0],
            vec![vec![f64::INFINITY, 5.0], vec![1.0, 5.0]],
            1,
        );
        let text = serde_json::to_string(&prob).unwrap();
        assert!(text.contains("null"));
        let back: MedianProblem<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, prob);
    }

    #[test]
    fn solves_in_f32() {
        let prob = MedianProblem::<f32>::new(
            vec![1.0, 1.0, 1.0],
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            1,
        )
        .unwrap();
        assert_eq!(solve_1median(&prob).unwrap().open, vec![1]);
    }
}
