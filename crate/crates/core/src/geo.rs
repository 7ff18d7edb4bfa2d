//! Geographic primitives: WGS84 points, great-circle distance, and a local
//! planar frame used for grid tiling and hull construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cast, to_f64, Scalar};

/// Mean Earth radius, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per degree of latitude (and of longitude at the equator) in the
/// local equirectangular projection.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("coordinate out of range: lon {lon}, lat {lat}")]
    OutOfRange { lon: f64, lat: f64 },
    #[error("planar frame origin too close to a pole: lat {lat}")]
    DegenerateFrame { lat: f64 },
    #[error("cannot build a planar frame from an empty point set")]
    EmptyFrame,
}

/// A WGS84 longitude/latitude pair, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    pub lon: T,
    pub lat: T,
}

impl<T: Scalar> GeoPoint<T> {
    /// Validates ranges: lon in [-180, 180], lat in [-90, 90], both finite.
    pub fn new(lon: T, lat: T) -> Result<Self, GeoError> {
        let ok = lon.is_finite()
            && lat.is_finite()
            && lon >= cast(-180.0)
            && lon <= cast(180.0)
            && lat >= cast(-90.0)
            && lat <= cast(90.0);
        if ok {
            Ok(Self { lon, lat })
        } else {
            Err(GeoError::OutOfRange {
                lon: to_f64(lon),
                lat: to_f64(lat),
            })
        }
    }
}

/// Haversine distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
///
/// Symmetric, and exactly zero for identical points.
pub fn great_circle_m<T: Scalar>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let two: T = cast(2.0);
    let half = T::one() / two;
    let s_lat = (dlat * half).sin();
    let s_lon = (dlon * half).sin();
    let h = s_lat * s_lat + lat_a.cos() * lat_b.cos() * s_lon * s_lon;
    // Clamp guards rounding when points are antipodal.
    let arc = two * h.sqrt().min(T::one()).asin();
    cast::<T>(EARTH_RADIUS_M) * arc
}

/// Local equirectangular projection anchored at a dataset origin.
///
/// `x = (lon - lon0) * cos(lat0) * 111320`, `y = (lat - lat0) * 111320`,
/// both in meters. Adequate at city scale, invertible via [`unproject`].
///
/// [`unproject`]: PlanarFrame::unproject
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarFrame<T> {
    pub origin: GeoPoint<T>,
    m_per_deg_lon: T,
    m_per_deg_lat: T,
}

impl<T: Scalar> PlanarFrame<T> {
    pub fn new(origin: GeoPoint<T>) -> Result<Self, GeoError> {
        // The longitude scale collapses toward the poles; cap at 85 degrees.
        if origin.lat.abs() > cast(85.0) {
            return Err(GeoError::DegenerateFrame {
                lat: to_f64(origin.lat),
            });
        }
        let m_per_deg_lat: T = cast(METERS_PER_DEGREE);
        let m_per_deg_lon = m_per_deg_lat * origin.lat.to_radians().cos();
        Ok(Self {
            origin,
            m_per_deg_lon,
            m_per_deg_lat,
        })
    }

    /// Frame centered on the arithmetic mean of `points`.
    pub fn centered_on(points: &[GeoPoint<T>]) -> Result<Self, GeoError> {
        if points.is_empty() {
            return Err(GeoError::EmptyFrame);
        }
        let n = T::from_usize(points.len()).expect("point count fits scalar");
        let mut lon = T::zero();
        let mut lat = T::zero();
        for p in points {
            lon = lon + p.lon;
            lat = lat + p.lat;
        }
        Self::new(GeoPoint {
            lon: lon / n,
            lat: lat / n,
        })
    }

    /// Projects to local planar meters relative to the origin.
    pub fn project(&self, p: GeoPoint<T>) -> (T, T) {
        (
            (p.lon - self.origin.lon) * self.m_per_deg_lon,
            (p.lat - self.origin.lat) * self.m_per_deg_lat,
        )
    }

    pub fn unproject(&self, x: T, y: T) -> GeoPoint<T> {
        GeoPoint {
            lon: self.origin.lon + x / self.m_per_deg_lon,
            lat: self.origin.lat + y / self.m_per_deg_lat,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lon: f64, lat: f64) -> GeoPoint<f64> {
        GeoPoint::new(lon, lat).unwrap()
    }

    #[test]
    fn rejects_out_of_range_coordinates() {
        assert!(GeoPoint::new(181.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -90.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(180.0, 90.0).is_ok());
    }

    #[test]
    fn great_circle_identity_is_zero() {
        let a = p(74.35, 31.52);
        assert_eq!(great_circle_m(a, a), 0.0);
    }

    #[test]
    fn great_circle_one_degree_latitude() {
        // Closed form: 6371000 * pi / 180.
        let d = great_circle_m(p(0.0, 0.0), p(0.0, 1.0));
        assert!((d - 111_194.926).abs() < 1.0, "got {d}");
    }

    #[test]
    fn great_circle_is_symmetric() {
        let mut state = 0x1234_5678_u64;
        let mut next = || {
            // xorshift, plenty for coordinate jitter
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 10_000) as f64 / 10_000.0
        };
        for _ in 0..100 {
            let a = p(next() * 360.0 - 180.0, next() * 180.0 - 90.0);
            let b = p(next() * 360.0 - 180.0, next() * 180.0 - 90.0);
            assert_eq!(great_circle_m(a, b), great_circle_m(b, a));
        }
    }

    #[test]
    fn projection_origin_maps_to_zero() {
        let frame = PlanarFrame::new(p(74.0, 31.0)).unwrap();
        assert_eq!(frame.project(frame.origin), (0.0, 0.0));
    }

    #[test]
    fn projection_round_trips() {
        let frame = PlanarFrame::new(p(74.0, 31.0)).unwrap();
        let q = p(74.123, 31.456);
        let (x, y) = frame.project(q);
        let back = frame.unproject(x, y);
        assert!((back.lon - q.lon).abs() < 1e-9);
        assert!((back.lat - q.lat).abs() < 1e-9);
    }

    #[test]
    fn projection_scale_at_equator() {
        let frame = PlanarFrame::new(p(0.0, 0.0)).unwrap();
        let (x, _) = frame.project(p(0.01, 0.0));
        assert!((x - 1113.2).abs() < 1e-6, "got {x}");
    }

    #[test]
    fn frame_rejects_poles() {
        assert!(PlanarFrame::new(p(0.0, 90.0)).is_err());
    }

    #[test]
    fn works_in_f32() {
        let a = GeoPoint::<f32>::new(0.0, 0.0).unwrap();
        let b = GeoPoint::<f32>::new(0.0, 1.0).unwrap();
        let d = great_circle_m(a, b);
        assert!((d - 111_195.0).abs() < 16.0, "got {d}");
    }
}
