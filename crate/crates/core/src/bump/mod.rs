//! Bump controller.
//!
//! Transitions:
//!
//! ```text
//! Raised | PenaltyRaised | Raising --(approaching beacon, ETA <= threshold)--> Lowering
//! Raised | PenaltyRaised | Raising --(RFID detection)-----------------------> Lowering
//! Lowering --(lower_duration elapsed)--> Lowered
//! Lowering | Lowered --(vehicle passed, or beacon timeout)--> Raising
//! Raising --(raise_duration elapsed)--> Raised, or PenaltyRaised if a speeder is pending
//! Raised --(speed reading above the limit)--> PenaltyRaised
//! PenaltyRaised --(platoon crossed)--> Raised
//! ```
//!
//! All transitions are pure functions of `(state, config, input, now)`.
//! Times are seconds on the simulation clock.

mod oobleck;

pub use oobleck::{crossing_regime, crossing_speed, regime_speed, viscosity, CrossingRegime, OobleckParams};

use alloc::vec::Vec;

use thiserror::Error;

use crate::geo::{
    estimate_speed_capped, eta_seconds, haversine_distance, initial_bearing, is_approaching, GeoPoint,
    DEFAULT_APPROACH_CONE_DEG, DEFAULT_NOMINAL_SPEED_MPS, DEFAULT_SPEED_CAP_MPS,
};
use crate::protocol::{EvBeacon, VehicleId};

/// Slack for comparing actuation deadlines against clock values that went
/// through microsecond rounding.
const DEADLINE_SLACK_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum BumpMode {
    Raised,
    Lowering,
    Lowered,
    Raising,
    PenaltyRaised,
}

impl BumpMode {
    pub const ALL: [BumpMode; 5] = [
        BumpMode::Raised,
        BumpMode::Lowering,
        BumpMode::Lowered,
        BumpMode::Raising,
        BumpMode::PenaltyRaised,
    ];

    pub fn code(self) -> u8 {
        match self {
            BumpMode::Raised => 0,
            BumpMode::Lowering => 1,
            BumpMode::Lowered => 2,
            BumpMode::Raising => 3,
            BumpMode::PenaltyRaised => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code)).copied()
    }

    pub fn is_deflating(self) -> bool {
        matches!(self, BumpMode::Lowering | BumpMode::Lowered)
    }

    pub fn is_transition(self) -> bool {
        matches!(self, BumpMode::Lowering | BumpMode::Raising)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BumpConfig {
    pub bump_id: u32,
    pub position: GeoPoint,
    pub deflate_eta_threshold_s: f64,
    pub lower_duration_s: f64,
    pub raise_duration_s: f64,
    pub nominal_height_m: f64,
    pub penalty_height_m: f64,
    pub speed_limit_mps: f64,
    pub oobleck: OobleckParams,
    pub approach_cone_deg: f64,
    pub pass_radius_m: f64,
    pub beacon_timeout_s: f64,
    /// Distance upstream of the bump where the speed sensor reads.
    pub sensor_offset_m: f64,
    /// Distance upstream of the bump of the RFID reader used as a fallback
    /// emergency-vehicle detector.
    pub rfid_offset_m: f64,
    /// Speed assumed for an emergency vehicle's first beacon.
    pub nominal_ev_speed_mps: f64,
    pub ev_speed_cap_mps: f64,
}

impl Default for BumpConfig {
    fn default() -> Self {
        Self {
            bump_id: 1,
            position: GeoPoint::new(0.0, 0.0).expect("origin is valid"),
            deflate_eta_threshold_s: 30.0,
            lower_duration_s: 3.0,
            raise_duration_s: 3.0,
            nominal_height_m: 0.08,
            penalty_height_m: 0.12,
            speed_limit_mps: 8.33,
            oobleck: OobleckParams::default(),
            approach_cone_deg: DEFAULT_APPROACH_CONE_DEG,
            pass_radius_m: 20.0,
            beacon_timeout_s: 15.0,
            sensor_offset_m: 30.0,
            rfid_offset_m: 100.0,
            nominal_ev_speed_mps: DEFAULT_NOMINAL_SPEED_MPS,
            ev_speed_cap_mps: DEFAULT_SPEED_CAP_MPS,
        }
    }
}

/// One violated configuration constraint: the offending field and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: &'static str,
    pub message: &'static str,
}

impl BumpConfig {
    pub fn validate(&self) -> Result<(), Vec<ConfigIssue>> {
        let mut issues = Vec::new();
        let mut check = |ok: bool, field, message| {
            if !ok {
                issues.push(ConfigIssue { field, message });
            }
        };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let o = &self.oobleck;

        check(pos(self.nominal_height_m), "nominal_height_m", "must be positive");
        check(
            self.penalty_height_m > self.nominal_height_m,
            "penalty_height_m",
            "must exceed nominal_height_m",
        );
        check(pos(self.lower_duration_s), "lower_duration_s", "must be positive");
        check(pos(self.raise_duration_s), "raise_duration_s", "must be positive");
        check(
            self.deflate_eta_threshold_s >= self.lower_duration_s,
            "deflate_eta_threshold_s",
            "must be at least lower_duration_s",
        );
        check(pos(self.speed_limit_mps), "speed_limit_mps", "must be positive");
        check(
            self.approach_cone_deg > 0.0 && self.approach_cone_deg <= 180.0,
            "approach_cone_deg",
            "must be in (0, 180]",
        );
        check(pos(self.pass_radius_m), "pass_radius_m", "must be positive");
        check(pos(self.beacon_timeout_s), "beacon_timeout_s", "must be positive");
        check(self.sensor_offset_m >= 0.0, "sensor_offset_m", "must be non-negative");
        check(self.rfid_offset_m >= 0.0, "rfid_offset_m", "must be non-negative");
        check(
            pos(self.nominal_ev_speed_mps),
            "nominal_ev_speed_mps",
            "must be positive",
        );
        check(pos(self.ev_speed_cap_mps), "ev_speed_cap_mps", "must be positive");
        check(
            pos(o.layer_thickness_m),
            "oobleck.layer_thickness_m",
            "must be positive",
        );
        check(
            o.flow_index_n > 1.0,
            "oobleck.flow_index_n",
            "must exceed 1 (shear-thickening)",
        );
        check(o.consistency_k >= 0.0, "oobleck.consistency_k", "must be non-negative");
        check(
            o.penalty_crossing_speed_mps > 0.0
                && o.penalty_crossing_speed_mps < o.solid_crossing_speed_mps
                && o.solid_crossing_speed_mps < o.critical_speed_mps,
            "oobleck",
            "requires 0 < penalty_crossing < solid_crossing < critical_speed",
        );

        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

/// A speed-sensor detection upstream of the bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedReading {
    pub vehicle_ref: u32,
    pub speed_mps: f64,
    pub at_time: f64,
}

/// Vehicles whose beacons the controller acts on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VehicleRegistry(Vec<VehicleId>);

impl VehicleRegistry {
    pub fn new(ids: impl IntoIterator<Item = VehicleId>) -> Self {
        let mut v: Vec<VehicleId> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn contains(&self, id: VehicleId) -> bool {
        self.0.binary_search(&id).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("beacon from unregistered vehicle {0}")]
pub struct SpoofRejected(pub VehicleId);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpState {
    pub mode: BumpMode,
    pub transition_started_at: Option<f64>,
    pub active_ev: Option<VehicleId>,
    pub last_beacon_at: Option<f64>,
    pub prev_ev_distance_m: Option<f64>,
    /// The active vehicle has reported a position within `pass_radius_m`.
    pub ev_was_near: bool,
    /// Fastest speed read since the last platoon cleared the bump.
    pub pending_fastest_mps: f64,
}

/// True when the bump lies in the half-plane behind the vehicle's heading.
fn bump_behind(beacon: &EvBeacon, bump: GeoPoint) -> bool {
    initial_bearing(beacon.position, bump).is_ok_and(|b| b.difference(beacon.heading) > 90.0)
}

impl Default for BumpState {
    fn default() -> Self {
        Self::new()
    }
}

impl BumpState {
    pub fn new() -> Self {
        Self {
            mode: BumpMode::Raised,
            transition_started_at: None,
            active_ev: None,
            last_beacon_at: None,
            prev_ev_distance_m: None,
            ev_was_near: false,
            pending_fastest_mps: 0.0,
        }
    }

    fn start_lowering(&mut self, id: VehicleId, now: f64) {
        self.mode = BumpMode::Lowering;
        self.transition_started_at = Some(now);
        self.active_ev = Some(id);
        self.ev_was_near = false;
    }

    fn start_raising(&mut self, now: f64) {
        self.mode = BumpMode::Raising;
        self.transition_started_at = Some(now);
        self.active_ev = None;
        self.ev_was_near = false;
    }

    fn can_start_lowering(&self) -> bool {
        matches!(
            self.mode,
            BumpMode::Raised | BumpMode::PenaltyRaised | BumpMode::Raising
        )
    }

    /// React to a delivered beacon. `prev` is the previous beacon this bump
    /// received from the same vehicle, used for speed differencing.
    pub fn on_beacon(
        &self,
        cfg: &BumpConfig,
        beacon: &EvBeacon,
        prev: Option<&EvBeacon>,
        now: f64,
        registry: &VehicleRegistry,
    ) -> Result<BumpState, SpoofRejected> {
        if !registry.contains(beacon.vehicle_id) {
            return Err(SpoofRejected(beacon.vehicle_id));
        }
        let mut next = *self;
        let id = beacon.vehicle_id;
        let distance = haversine_distance(beacon.position, cfg.position);
        let approaching = is_approaching(beacon, cfg.position, cfg.approach_cone_deg);
        let speed = prev
            .and_then(|p| estimate_speed_capped(p, beacon, cfg.ev_speed_cap_mps).ok())
            .unwrap_or(cfg.nominal_ev_speed_mps);
        let eta = eta_seconds(beacon.position, speed, cfg.position);
        let tracks_this_ev = self.active_ev.is_none_or(|a| a == id);

        if approaching && eta <= cfg.deflate_eta_threshold_s && next.can_start_lowering() {
            next.start_lowering(id, now);
        } else if self.active_ev == Some(id) {
            let receding = self.prev_ev_distance_m.is_some_and(|d| distance > d);
            // Beacons come every few seconds, so a vehicle can jump past the
            // bump without ever reporting inside the pass radius.
            let behind = self.prev_ev_distance_m.is_some() && bump_behind(beacon, cfg.position);
            if (receding && self.ev_was_near) || behind {
                next.start_raising(now);
            }
        }

        if next.active_ev == Some(id) && distance <= cfg.pass_radius_m {
            next.ev_was_near = true;
        }
        if tracks_this_ev {
            next.last_beacon_at = Some(now);
            next.prev_ev_distance_m = Some(distance);
        }
        Ok(next)
    }

    /// Fallback detection of a registered vehicle by the roadside RFID reader.
    pub fn on_rfid_detect(&self, _cfg: &BumpConfig, vehicle: VehicleId, now: f64) -> BumpState {
        let mut next = *self;
        if next.can_start_lowering() {
            next.start_lowering(vehicle, now);
        }
        if next.active_ev == Some(vehicle) {
            next.last_beacon_at = Some(now);
        }
        next
    }

    pub fn on_speed_reading(&self, cfg: &BumpConfig, reading: &SpeedReading) -> BumpState {
        let mut next = *self;
        next.pending_fastest_mps = next.pending_fastest_mps.max(reading.speed_mps);
        if next.pending_fastest_mps > cfg.speed_limit_mps && next.mode == BumpMode::Raised {
            next.mode = BumpMode::PenaltyRaised;
        }
        next
    }

    /// The last tracked vehicle between the sensor and the bump has crossed.
    pub fn vehicle_crossed(&self, _cfg: &BumpConfig) -> BumpState {
        let mut next = *self;
        next.pending_fastest_mps = 0.0;
        if next.mode == BumpMode::PenaltyRaised {
            next.mode = BumpMode::Raised;
        }
        next
    }

    /// Complete due actuations and apply the silent-vehicle failsafe.
    pub fn tick(&self, cfg: &BumpConfig, now: f64) -> BumpState {
        let mut next = *self;
        let elapsed = self.transition_started_at.map(|t| now - t);
        match (next.mode, elapsed) {
            (BumpMode::Lowering, Some(e)) if e >= cfg.lower_duration_s - DEADLINE_SLACK_S => {
                next.mode = BumpMode::Lowered;
                next.transition_started_at = None;
            }
            (BumpMode::Raising, Some(e)) if e >= cfg.raise_duration_s - DEADLINE_SLACK_S => {
                next.mode = if next.pending_fastest_mps > cfg.speed_limit_mps {
                    BumpMode::PenaltyRaised
                } else {
                    BumpMode::Raised
                };
                next.transition_started_at = None;
            }
            _ => {}
        }
        if next.mode.is_deflating() && next.last_beacon_at.is_some_and(|t| now - t > cfg.beacon_timeout_s) {
            next.start_raising(now);
        }
        next
    }

    /// Time at which the running actuation completes.
    pub fn transition_deadline(&self, cfg: &BumpConfig) -> Option<f64> {
        let started = self.transition_started_at?;
        match self.mode {
            BumpMode::Lowering => Some(started + cfg.lower_duration_s),
            BumpMode::Raising => Some(started + cfg.raise_duration_s),
            _ => None,
        }
    }

    /// Time after which a silent active vehicle releases the bump.
    pub fn timeout_deadline(&self, cfg: &BumpConfig) -> Option<f64> {
        if self.mode.is_deflating() {
            self.last_beacon_at.map(|t| t + cfg.beacon_timeout_s)
        } else {
            None
        }
    }

    pub fn height_m(&self, cfg: &BumpConfig, now: f64) -> f64 {
        let fraction = |duration: f64| {
            let elapsed = self.transition_started_at.map_or(0.0, |t| now - t);
            (elapsed / duration).clamp(0.0, 1.0)
        };
        match self.mode {
            BumpMode::Raised => cfg.nominal_height_m,
            BumpMode::PenaltyRaised => cfg.penalty_height_m,
            BumpMode::Lowered => 0.0,
            BumpMode::Lowering => cfg.nominal_height_m * (1.0 - fraction(cfg.lower_duration_s)),
            BumpMode::Raising => cfg.nominal_height_m * fraction(cfg.raise_duration_s),
        }
    }

    /// Structural invariants of the controller state.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        if self.transition_started_at.is_some() != self.mode.is_transition() {
            return Err("transition_started_at present iff mode is Lowering or Raising");
        }
        if self.active_ev.is_some() && !self.mode.is_deflating() {
            return Err("active_ev set outside Lowering/Lowered");
        }
        if self.mode == BumpMode::Lowered && self.active_ev.is_none() {
            return Err("Lowered without an active emergency vehicle");
        }
        if !(self.pending_fastest_mps >= 0.0) {
            return Err("pending_fastest_mps negative");
        }
        Ok(())
    }
}
