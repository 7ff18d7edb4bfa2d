//! Convex hulls of projected cluster points (Andrew's monotone chain),
//! used for the per-cluster polygon outputs.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum HullError {
    #[error("cannot compute the hull of an empty point set")]
    Empty,
    #[error("hull input contains a non-finite coordinate")]
    NonFinite,
}

/// Cross product of (a - o) x (b - o); positive for a counter-clockwise turn.
fn cross<T: Scalar>(o: (T, T), a: (T, T), b: (T, T)) -> T {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull in counter-clockwise order, starting at the lexicographically
/// smallest vertex. Collinear interior points are excluded. Degenerate inputs
/// return the single point or the two segment endpoints.
pub fn convex_hull<T: Scalar>(points: &[(T, T)]) -> Result<Vec<(T, T)>, HullError> {
    if points.is_empty() {
        return Err(HullError::Empty);
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(HullError::NonFinite);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite coordinates")
            .then_with(|| a.1.partial_cmp(&b.1).expect("finite coordinates"))
    });
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(pts);
    }

    fn build_chain<T: Scalar>(points: impl Iterator<Item = (T, T)>) -> Vec<(T, T)> {
        let mut chain: Vec<(T, T)> = Vec::new();
        for p in points {
            while chain.len() >= 2
                && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= T::zero()
            {
                chain.pop();
            }
            chain.push(p);
        }
        chain
    }
    let mut lower = build_chain(pts.iter().copied());
    let mut upper = build_chain(pts.iter().rev().copied());

    // Each chain's last vertex starts the other chain.
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Ok(lower)
}
