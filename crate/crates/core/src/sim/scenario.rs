use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::bump::BumpConfig;
use crate::geo::{destination, initial_bearing, GeoPoint, Heading};
use crate::protocol::VehicleId;
use crate::radio::{LoraLinkParams, UplinkParams};
use crate::traffic::{BumpType, SpeedModel, ZoneGeometry};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BEACON_INTERVAL_S: f64 = 5.0;

/// A straight road anchored on the globe: chainage `x` meters maps to the
/// point `x` meters from `origin` along the great circle leaving it at
/// `bearing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub length_m: f64,
    pub origin: GeoPoint,
    pub bearing: Heading,
}

impl Default for Road {
    fn default() -> Self {
        Self {
            length_m: 1_000.0,
            origin: GeoPoint::new(32.6546, 51.6680).expect("valid anchor"),
            bearing: Heading::new(90.0).expect("valid bearing"),
        }
    }
}

impl Road {
    pub fn point_at(&self, chainage_m: f64) -> GeoPoint {
        destination(self.origin, self.bearing, chainage_m)
    }

    /// Direction of travel at `chainage_m`.
    pub fn heading_at(&self, chainage_m: f64) -> Heading {
        if chainage_m <= 0.0 {
            return self.bearing;
        }
        let here = self.point_at(chainage_m);
        match initial_bearing(here, self.origin) {
            Ok(back) => Heading::new(back.deg() + 180.0).expect("finite"),
            Err(_) => self.bearing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpSite {
    pub chainage_m: f64,
    pub kind: BumpType,
    /// `config.position` is derived from `chainage_m` when a run starts.
    pub config: BumpConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvSpec {
    pub id: VehicleId,
    pub dispatch_s: f64,
    pub start_chainage_m: f64,
    pub cruise_speed_mps: f64,
    pub beacon_interval_s: f64,
    /// Present in the bumps' registry. Unregistered vehicles model spoofed
    /// beacons.
    pub registered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CivilianSpec {
    pub rate_per_s: f64,
    /// Spawn exactly this many vehicles instead of filling the run duration.
    pub count: Option<usize>,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    /// Probability that a vehicle slows to the limit before a bump.
    pub compliance: f64,
}

impl Default for CivilianSpec {
    fn default() -> Self {
        Self {
            rate_per_s: 0.0,
            count: None,
            speed_min_mps: 40.0 / 3.6,
            speed_max_mps: 60.0 / 3.6,
            compliance: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    pub seed: u64,
    pub speed_model: SpeedModel,
    pub rfid_fallback: bool,
    /// Also run every bump as a conventional bump and report both.
    pub control_run: bool,
    pub road: Road,
    pub zone: ZoneGeometry,
    pub lora: LoraLinkParams,
    /// Metadata only.
    pub carrier_mhz: f64,
    pub uplink: UplinkParams,
    pub bumps: Vec<BumpSite>,
    pub evs: Vec<EvSpec>,
    pub civilians: CivilianSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".to_string(),
            duration_s: 3_600.0,
            seed: DEFAULT_SEED,
            speed_model: SpeedModel::default(),
            rfid_fallback: false,
            control_run: false,
            road: Road::default(),
            zone: ZoneGeometry::default(),
            lora: LoraLinkParams::default(),
            carrier_mhz: 433.0,
            uplink: UplinkParams::default(),
            bumps: Vec::new(),
            evs: Vec::new(),
            civilians: CivilianSpec::default(),
        }
    }
}

/// A single validation problem, addressed by a dotted path such as
/// `bump[2].penalty_height_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl ValidationIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl Scenario {
    /// Distance before the bump at which its influence on traffic starts.
    pub(crate) fn lead_in_m(&self, site: &BumpSite) -> f64 {
        let mut lead = self.zone.upstream_m;
        if site.kind == BumpType::SsBump {
            lead = lead.max(site.config.sensor_offset_m);
            if self.rfid_fallback {
                lead = lead.max(site.config.rfid_offset_m);
            }
        }
        lead
    }

    /// Bump indices sorted by chainage.
    pub fn bump_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.bumps.len()).collect();
        order.sort_by(|&a, &b| self.bumps[a].chainage_m.total_cmp(&self.bumps[b].chainage_m));
        order
    }

    /// Checks every invariant and reports all violations.
    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        let mut fail = |path: String, msg: String| issues.push(ValidationIssue { path, message: msg });

        if !positive(self.duration_s) {
            fail("scenario.duration_s".into(), "must be positive".into());
        }
        if !positive(self.road.length_m) {
            fail("road.length_m".into(), "must be positive".into());
        }
        if !positive(self.zone.upstream_m) {
            fail("zone.upstream_m".into(), "must be positive".into());
        }
        if !positive(self.zone.downstream_m) {
            fail("zone.downstream_m".into(), "must be positive".into());
        }
        if let SpeedModel::Calibrated(c) = &self.speed_model {
            for (name, v) in [
                ("conventional_avg_mps", c.conventional_avg_mps),
                ("liquid_avg_mps", c.liquid_avg_mps),
                ("solid_avg_mps", c.solid_avg_mps),
                ("penalty_avg_mps", c.penalty_avg_mps),
            ] {
                if !positive(v) {
                    fail(format!("calibration.{name}"), "must be positive".into());
                }
            }
        }
        if let Err(e) = self.lora.validate() {
            fail("lora".into(), e.to_string());
        }
        if let Err(e) = self.uplink.validate() {
            fail("uplink".into(), e.to_string());
        }

        let mut bump_ids = BTreeSet::new();
        for (i, site) in self.bumps.iter().enumerate() {
            let id = site.config.bump_id;
            if !bump_ids.insert(id) {
                fail(format!("bump[{i}].id"), format!("duplicate bump_id {id}"));
            }
            if let Err(list) = site.config.validate() {
                for issue in list {
                    fail(format!("bump[{i}].{}", issue.field), issue.message.into());
                }
            }
            if !site.chainage_m.is_finite() {
                fail(format!("bump[{i}].chainage_m"), "must be finite".into());
                continue;
            }
            if site.kind == BumpType::SsBump {
                if site.config.sensor_offset_m < self.zone.upstream_m {
                    fail(
                        format!("bump[{i}].sensor_offset_m"),
                        "speed sensor must sit at or before the start of the zone".into(),
                    );
                }
                if self.rfid_fallback && site.config.rfid_offset_m < self.zone.upstream_m {
                    fail(
                        format!("bump[{i}].rfid_offset_m"),
                        "RFID reader must sit at or before the start of the zone".into(),
                    );
                }
            }
            if site.chainage_m - self.lead_in_m(site) < 0.0 {
                fail(
                    format!("bump[{i}].chainage_m"),
                    "bump's lead-in starts before the road".into(),
                );
            }
            if site.chainage_m + self.zone.downstream_m > self.road.length_m {
                fail(
                    format!("bump[{i}].chainage_m"),
                    "bump's zone runs past the end of the road".into(),
                );
            }
        }
        let order = self.bump_order();
        for pair in order.windows(2) {
            let (a, b) = (&self.bumps[pair[0]], &self.bumps[pair[1]]);
            if b.chainage_m - self.lead_in_m(b) < a.chainage_m + self.zone.downstream_m {
                fail(
                    format!("bump[{}].chainage_m", pair[1]),
                    format!(
                        "bump {} overlaps the zone of bump {}",
                        b.config.bump_id, a.config.bump_id
                    ),
                );
            }
        }

        let mut ev_ids = BTreeSet::new();
        for (i, ev) in self.evs.iter().enumerate() {
            if !ev_ids.insert(ev.id) {
                fail(format!("ev[{i}].id"), format!("duplicate ev id {}", ev.id));
            }
            if !positive(ev.cruise_speed_mps) {
                fail(format!("ev[{i}].cruise_kmh"), "must be positive".into());
            }
            if !positive(ev.beacon_interval_s) {
                fail(format!("ev[{i}].beacon_interval_s"), "must be positive".into());
            }
            if !(ev.dispatch_s.is_finite() && ev.dispatch_s >= 0.0) {
                fail(format!("ev[{i}].dispatch_s"), "must be non-negative".into());
            }
            if !(ev.start_chainage_m >= 0.0 && ev.start_chainage_m < self.road.length_m) {
                fail(format!("ev[{i}].start_chainage_m"), "must lie on the road".into());
            }
        }

        let c = &self.civilians;
        if !(c.rate_per_s.is_finite() && c.rate_per_s >= 0.0) {
            fail("civilians.rate_per_s".into(), "must be non-negative".into());
        }
        if c.count.is_some_and(|n| n > 0) && !(c.rate_per_s > 0.0) {
            fail("civilians.count".into(), "requires a positive rate_per_s".into());
        }
        if !positive(c.speed_min_mps) {
            fail("civilians.speed_min_kmh".into(), "must be positive".into());
        }
        if !(c.speed_max_mps >= c.speed_min_mps) || !c.speed_max_mps.is_finite() {
            fail(
                "civilians.speed_max_kmh".into(),
                "must be at least speed_min_kmh".into(),
            );
        }
        if !(0.0..=1.0).contains(&c.compliance) {
            fail("civilians.compliance".into(), "must be a probability in [0, 1]".into());
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}
