//! Vehicle arrivals and the zone-transit delay model.
//!
//! A bump's influence zone runs `upstream_m` before it and `downstream_m`
//! after it. A vehicle crosses the zone at a single average speed, so its
//! transit time is zone length over that speed and its net delay is transit
//! minus the time it would take at cruise speed.

use alloc::vec::Vec;

use libm::log;
use rand::Rng;
use thiserror::Error;

use crate::bump::CrossingRegime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TrafficError {
    #[error("stalled vehicle: average zone speed must be positive")]
    StalledVehicle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ZoneGeometry {
    pub upstream_m: f64,
    pub downstream_m: f64,
}

impl Default for ZoneGeometry {
    fn default() -> Self {
        Self {
            upstream_m: 15.0,
            downstream_m: 15.0,
        }
    }
}

impl ZoneGeometry {
    pub fn length_m(&self) -> f64 {
        self.upstream_m + self.downstream_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum VehicleKind {
    Civilian,
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum BumpType {
    Conventional,
    #[cfg_attr(feature = "serde", serde(rename = "ssbump"))]
    SsBump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub id: u32,
    pub kind: VehicleKind,
    pub cruise_speed_mps: f64,
    pub spawn_time_s: f64,
    /// Slows to the speed limit before the bump.
    pub compliant: bool,
}

impl VehicleSpec {
    /// Speed at which the vehicle reaches the sensor and the bump.
    pub fn approach_speed(&self, speed_limit_mps: f64) -> f64 {
        if self.compliant {
            self.cruise_speed_mps.min(speed_limit_mps)
        } else {
            self.cruise_speed_mps
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayRecord {
    pub vehicle_id: u32,
    pub vehicle_kind: VehicleKind,
    pub bump_id: u32,
    pub bump_type: BumpType,
    /// Produced by the all-conventional control pass.
    pub control: bool,
    pub regime: CrossingRegime,
    pub entered_at_s: f64,
    pub cruise_speed_mps: f64,
    pub avg_zone_speed_mps: f64,
    pub transit_time_s: f64,
    pub free_flow_time_s: f64,
    pub net_delay_s: f64,
}

/// Fixed zone-average speeds per crossing regime.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Calibration {
    pub conventional_avg_mps: f64,
    pub liquid_avg_mps: f64,
    pub solid_avg_mps: f64,
    pub penalty_avg_mps: f64,
}

impl Default for Calibration {
    /// 12 km/h over a conventional bump and 30 km/h over a compliant
    /// crossing. A hardened layer is treated like a conventional bump; the
    /// penalty height scales that by the ratio of crossing speeds.
    fn default() -> Self {
        Self {
            conventional_avg_mps: 3.2,
            liquid_avg_mps: 8.3,
            solid_avg_mps: 3.2,
            penalty_avg_mps: 3.2 * 2.22 / 3.33,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum SpeedModel {
    /// Zone-average speeds looked up from a [`Calibration`] table.
    Calibrated(Calibration),
    /// Mean of entry (cruise) and crossing speeds.
    Kinematic,
}

impl Default for SpeedModel {
    fn default() -> Self {
        SpeedModel::Calibrated(Calibration::default())
    }
}

pub fn zone_transit_time(avg_zone_speed_mps: f64, zone: &ZoneGeometry) -> Result<f64, TrafficError> {
    if !(avg_zone_speed_mps > 0.0) {
        return Err(TrafficError::StalledVehicle);
    }
    Ok(zone.length_m() / avg_zone_speed_mps)
}

pub fn kinematic_avg_speed(cruise_speed_mps: f64, crossing_speed_mps: f64) -> f64 {
    (cruise_speed_mps + crossing_speed_mps) / 2.0
}

/// Average speed over the zone. Never exceeds cruise, so transit is never
/// shorter than free flow.
pub fn avg_zone_speed(
    model: &SpeedModel,
    regime: CrossingRegime,
    cruise_speed_mps: f64,
    crossing_speed_mps: f64,
) -> f64 {
    match model {
        SpeedModel::Kinematic => kinematic_avg_speed(cruise_speed_mps, crossing_speed_mps).min(cruise_speed_mps),
        SpeedModel::Calibrated(c) => {
            let table = match regime {
                CrossingRegime::Bypass => return cruise_speed_mps,
                CrossingRegime::Conventional => c.conventional_avg_mps,
                CrossingRegime::Liquid => c.liquid_avg_mps,
                CrossingRegime::Solid => c.solid_avg_mps,
                CrossingRegime::Penalty => c.penalty_avg_mps,
            };
            table.min(cruise_speed_mps)
        }
    }
}

pub fn free_flow_time(cruise_speed_mps: f64, zone: &ZoneGeometry) -> f64 {
    zone.length_m() / cruise_speed_mps
}

fn exponential_gap<R: Rng + ?Sized>(rate_per_s: f64, rng: &mut R) -> f64 {
    // 1 - u lies in (0, 1], so the log is finite
    -log(1.0 - rng.random::<f64>()) / rate_per_s
}

/// Poisson arrival times in `[0, duration_s)`, sorted.
pub fn generate_arrivals<R: Rng + ?Sized>(rate_per_s: f64, duration_s: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    if !(rate_per_s > 0.0) {
        return out;
    }
    let mut t = exponential_gap(rate_per_s, rng);
    while t < duration_s {
        out.push(t);
        t += exponential_gap(rate_per_s, rng);
    }
    out
}

/// Exactly `count` arrivals of a Poisson process, sorted.
pub fn generate_n_arrivals<R: Rng + ?Sized>(rate_per_s: f64, count: usize, rng: &mut R) -> Vec<f64> {
    if !(rate_per_s > 0.0) {
        return Vec::new();
    }
    let mut t = 0.0;
    (0..count)
        .map(|_| {
            t += exponential_gap(rate_per_s, rng);
            t
        })
        .collect()
}
