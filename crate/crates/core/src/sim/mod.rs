//! Discrete-event simulation of a road with bumps, civilian traffic and
//! beaconing emergency vehicles.

mod engine;
pub mod queue;
pub mod report;
pub mod scenario;

pub use engine::{run, stream};
pub use queue::{Event, EventKind, EventQueue, SimTime};
pub use report::{
    ev_control_delay, ev_response_delay, ev_total_delay, BeaconLog, EvDelay, LinkCounters, LookupError, PacketStats,
    Report, TransitionRecord, TypeSummary,
};
pub use scenario::{
    BumpSite, CivilianSpec, EvSpec, Road, Scenario, ValidationIssue, DEFAULT_BEACON_INTERVAL_S, DEFAULT_SEED,
};
