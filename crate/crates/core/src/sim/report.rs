use alloc::string::String;
use alloc::vec::Vec;

use libm::round;
use thiserror::Error;

use crate::bump::BumpMode;
use crate::traffic::{BumpType, DelayRecord, VehicleKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LinkCounters {
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
}

impl LinkCounters {
    pub(crate) fn record(&mut self, delivered: bool) {
        self.sent += 1;
        if delivered {
            self.delivered += 1;
        } else {
            self.lost += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PacketStats {
    /// Vehicle-to-bump receptions; one attempt per listening bump per beacon.
    pub lora: LinkCounters,
    pub uplink: LinkCounters,
    pub spoof_rejected: u64,
    pub rfid_detections: u64,
    pub telemetry_received: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TransitionRecord {
    pub time_s: f64,
    pub bump_id: u32,
    pub from: BumpMode,
    pub to: BumpMode,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BeaconLog {
    pub ev_id: u32,
    pub tx_times_us: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EvDelay {
    pub ev_id: u32,
    pub bump_id: u32,
    pub control: bool,
    pub delay_s: f64,
}

/// Civilian aggregates for one bump type.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TypeSummary {
    pub crossings: usize,
    pub mean_transit_s: Option<f64>,
    pub mean_net_delay_s: Option<f64>,
}

impl TypeSummary {
    fn from_records<'a>(records: impl Iterator<Item = &'a DelayRecord>) -> Self {
        let (mut n, mut transit, mut delay) = (0usize, 0.0, 0.0);
        for r in records {
            n += 1;
            transit += r.transit_time_s;
            delay += r.net_delay_s;
        }
        if n == 0 {
            return Self::default();
        }
        Self {
            crossings: n,
            mean_transit_s: Some(transit / n as f64),
            mean_net_delay_s: Some(delay / n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub records: Vec<DelayRecord>,
    pub conventional: TypeSummary,
    pub ssbump: TypeSummary,
    /// `(1 - ssbump / conventional) * 100` on mean civilian transit.
    pub reduction_percent: Option<f64>,
    /// Same, with both means first rounded to 0.1 s.
    pub reduction_percent_rounded: Option<f64>,
    pub ev_delays: Vec<EvDelay>,
    pub ev_total_delay_s: f64,
    pub ev_total_delay_control_s: f64,
    pub packets: PacketStats,
    pub transitions: Vec<TransitionRecord>,
    pub beacon_log: Vec<BeaconLog>,
}

fn round1(x: f64) -> f64 {
    round(x * 10.0) / 10.0
}

impl Report {
    pub(crate) fn assemble(
        scenario: String,
        seed: u64,
        records: Vec<DelayRecord>,
        packets: PacketStats,
        transitions: Vec<TransitionRecord>,
        beacon_log: Vec<BeaconLog>,
    ) -> Self {
        let civilian = |t: BumpType| {
            records
                .iter()
                .filter(move |r| r.vehicle_kind == VehicleKind::Civilian && r.bump_type == t)
        };
        let conventional = TypeSummary::from_records(civilian(BumpType::Conventional));
        let ssbump = TypeSummary::from_records(civilian(BumpType::SsBump));
        let (reduction_percent, reduction_percent_rounded) = match (conventional.mean_transit_s, ssbump.mean_transit_s)
        {
            (Some(c), Some(s)) => (Some((1.0 - s / c) * 100.0), Some((1.0 - round1(s) / round1(c)) * 100.0)),
            _ => (None, None),
        };

        let ev_delays: Vec<EvDelay> = records
            .iter()
            .filter(|r| r.vehicle_kind == VehicleKind::Emergency)
            .map(|r| EvDelay {
                ev_id: r.vehicle_id,
                bump_id: r.bump_id,
                control: r.control,
                delay_s: r.net_delay_s,
            })
            .collect();
        let total = |control: bool| {
            ev_delays
                .iter()
                .filter(|d| d.control == control)
                .map(|d| d.delay_s)
                .sum()
        };

        Self {
            scenario,
            seed,
            conventional,
            ssbump,
            reduction_percent,
            reduction_percent_rounded,
            ev_total_delay_s: total(false),
            ev_total_delay_control_s: total(true),
            ev_delays,
            records,
            packets,
            transitions,
            beacon_log,
        }
    }

    pub fn beacon_times(&self, ev_id: u32) -> Option<&[u64]> {
        self.beacon_log
            .iter()
            .find(|l| l.ev_id == ev_id)
            .map(|l| l.tx_times_us.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no crossing of bump {bump_id} by emergency vehicle {ev_id}")]
pub struct LookupError {
    pub ev_id: u32,
    pub bump_id: u32,
}

fn lookup(report: &Report, ev_id: u32, bump_id: u32, control: bool) -> Result<f64, LookupError> {
    report
        .ev_delays
        .iter()
        .find(|d| d.ev_id == ev_id && d.bump_id == bump_id && d.control == control)
        .map(|d| d.delay_s)
        .ok_or(LookupError { ev_id, bump_id })
}

/// Seconds the bump added to the emergency vehicle's zone transit.
pub fn ev_response_delay(report: &Report, ev_id: u32, bump_id: u32) -> Result<f64, LookupError> {
    lookup(report, ev_id, bump_id, false)
}

/// As [`ev_response_delay`], from the all-conventional control pass.
pub fn ev_control_delay(report: &Report, ev_id: u32, bump_id: u32) -> Result<f64, LookupError> {
    lookup(report, ev_id, bump_id, true)
}

/// Delay summed over every bump the vehicle crossed; zero on a bump-free road.
pub fn ev_total_delay(report: &Report, ev_id: u32) -> f64 {
    report
        .ev_delays
        .iter()
        .filter(|d| d.ev_id == ev_id && !d.control)
        .map(|d| d.delay_s)
        .sum()
}
