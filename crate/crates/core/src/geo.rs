//! Spherical-earth geodesy: great-circle distance, bearings, beacon speed
//! estimation and time of arrival at a bump.

use core::f64::consts::PI;

use libm::{asin, atan2, cos, fmod, sin, sqrt};
use thiserror::Error;

use crate::protocol::EvBeacon;

/// Euclidean remainder modulo 360; `f64::rem_euclid` is std-only.
fn rem360(x: f64) -> f64 {
    let r = fmod(x, 360.0);
    if r < 0.0 {
        r + 360.0
    } else {
        r
    }
}

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Upper bound on a differenced beacon speed; anything faster is a GPS glitch.
pub const DEFAULT_SPEED_CAP_MPS: f64 = 55.0;

/// Below this speed a vehicle is treated as stationary and never arrives.
pub const STATIONARY_THRESHOLD_MPS: f64 = 0.5;

/// Speed assumed for a vehicle whose first beacon has no predecessor.
pub const DEFAULT_NOMINAL_SPEED_MPS: f64 = 15.0;

pub const DEFAULT_APPROACH_CONE_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeoError {
    #[error("latitude out of range [-90, 90] or not finite")]
    InvalidLatitude,
    #[error("longitude not finite")]
    InvalidLongitude,
    #[error("heading not finite")]
    InvalidHeading,
    #[error("undefined bearing: coincident points")]
    UndefinedBearing,
    #[error("non-monotonic beacon: timestamps must strictly increase")]
    NonMonotonicBeacon,
    #[error("beacons belong to different vehicles")]
    VehicleMismatch,
}

/// A point on the sphere. Latitude is in `[-90, 90]`; longitude is kept in
/// `[-180, 180)`, so `180` is stored as `-180`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, GeoError> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
            return Err(GeoError::InvalidLatitude);
        }
        if !lon_deg.is_finite() {
            return Err(GeoError::InvalidLongitude);
        }
        Ok(Self {
            lat_deg,
            lon_deg: wrap_longitude(lon_deg),
        })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }
}

fn wrap_longitude(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let wrapped = rem360(lon + 180.0) - 180.0;
    // the remainder can round up to the modulus itself for tiny negative inputs
    if wrapped >= 180.0 {
        -180.0
    } else {
        wrapped
    }
}

/// Degrees clockwise from true north, normalized into `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Heading(f64);

impl Heading {
    pub const NORTH: Heading = Heading(0.0);

    pub fn new(deg: f64) -> Result<Self, GeoError> {
        if !deg.is_finite() {
            return Err(GeoError::InvalidHeading);
        }
        Ok(Self(normalize_degrees(deg)))
    }

    pub fn deg(&self) -> f64 {
        self.0
    }

    /// Smallest angle between two headings, in `[0, 180]`.
    pub fn difference(&self, other: Heading) -> f64 {
        let d = rem360(self.0 - other.0);
        if d > 180.0 {
            360.0 - d
        } else {
            d
        }
    }
}

fn normalize_degrees(deg: f64) -> f64 {
    let n = rem360(deg);
    if n >= 360.0 {
        0.0
    } else {
        n
    }
}

/// Great-circle distance in meters (haversine formula).
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat_deg.to_radians();
    let phi2 = b.lat_deg.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon_deg - a.lon_deg).to_radians();

    let s1 = sin(dphi / 2.0);
    let s2 = sin(dlambda / 2.0);
    let h = (s1 * s1 + cos(phi1) * cos(phi2) * s2 * s2).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * atan2(sqrt(h), sqrt(1.0 - h))
}

/// Initial bearing of the great circle from `a` toward `b`.
pub fn initial_bearing(a: GeoPoint, b: GeoPoint) -> Result<Heading, GeoError> {
    if a == b {
        return Err(GeoError::UndefinedBearing);
    }
    let phi1 = a.lat_deg.to_radians();
    let phi2 = b.lat_deg.to_radians();
    let dlambda = (b.lon_deg - a.lon_deg).to_radians();

    let y = sin(dlambda) * cos(phi2);
    let x = cos(phi1) * sin(phi2) - sin(phi1) * cos(phi2) * cos(dlambda);
    Heading::new(atan2(y, x).to_degrees())
}

/// Point reached by travelling `distance_m` from `origin` along the great
/// circle that leaves it with `bearing`.
pub fn destination(origin: GeoPoint, bearing: Heading, distance_m: f64) -> GeoPoint {
    let delta = distance_m / EARTH_RADIUS_M;
    let theta = bearing.deg().to_radians();
    let phi1 = origin.lat_deg.to_radians();
    let lambda1 = origin.lon_deg.to_radians();

    let sin_phi2 = (sin(phi1) * cos(delta) + cos(phi1) * sin(delta) * cos(theta)).clamp(-1.0, 1.0);
    let phi2 = asin(sin_phi2);
    let lambda2 = lambda1 + atan2(sin(theta) * sin(delta) * cos(phi1), cos(delta) - sin(phi1) * sin_phi2);

    let lat = phi2.to_degrees().clamp(-90.0, 90.0);
    GeoPoint {
        lat_deg: lat,
        lon_deg: wrap_longitude(lambda2.to_degrees()),
    }
}

/// Speed from two successive beacons of one vehicle, capped at
/// [`DEFAULT_SPEED_CAP_MPS`].
pub fn estimate_speed(prev: &EvBeacon, curr: &EvBeacon) -> Result<f64, GeoError> {
    estimate_speed_capped(prev, curr, DEFAULT_SPEED_CAP_MPS)
}

pub fn estimate_speed_capped(prev: &EvBeacon, curr: &EvBeacon, cap_mps: f64) -> Result<f64, GeoError> {
    if prev.vehicle_id != curr.vehicle_id {
        return Err(GeoError::VehicleMismatch);
    }
    if curr.timestamp <= prev.timestamp {
        return Err(GeoError::NonMonotonicBeacon);
    }
    let dt = f64::from(curr.timestamp - prev.timestamp);
    let speed = haversine_distance(prev.position, curr.position) / dt;
    Ok(speed.clamp(0.0, cap_mps))
}

/// Seconds until a vehicle at `ev_pos` moving at `speed_mps` reaches
/// `bump_pos`. Returns `f64::INFINITY` for a stationary vehicle.
pub fn eta_seconds(ev_pos: GeoPoint, speed_mps: f64, bump_pos: GeoPoint) -> f64 {
    if speed_mps < STATIONARY_THRESHOLD_MPS {
        return f64::INFINITY;
    }
    haversine_distance(ev_pos, bump_pos) / speed_mps
}

/// Whether the beacon's heading points at the bump within the cone half angle.
/// A beacon sitting exactly on the bump counts as approaching.
pub fn is_approaching(beacon: &EvBeacon, bump_pos: GeoPoint, cone_half_angle_deg: f64) -> bool {
    match initial_bearing(beacon.position, bump_pos) {
        Ok(bearing) => beacon.heading.difference(bearing) <= cone_half_angle_deg,
        Err(_) => true,
    }
}

/// Upper bound of [`haversine_distance`]: half the circumference.
pub const MAX_DISTANCE_M: f64 = PI * EARTH_RADIUS_M;
