#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation core for a network of smart speed bumps.
//!
//! Emergency vehicles broadcast position beacons over a long-range radio
//! link. Each bump controller estimates the vehicle's time of arrival and
//! deflates ahead of it, while a shear-thickening fluid layer slows only the
//! vehicles that exceed the critical speed. The [`sim`] module ties these
//! pieces together in a deterministic discrete-event engine and aggregates
//! per-vehicle zone transit times into a [`sim::Report`].
//!
//! Everything here is `no_std` + `alloc`. File formats, report rendering and
//! the command-line front end live in the `ssbump` crate.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bump;
pub mod geo;
pub mod protocol;
pub mod radio;
pub mod sim;
pub mod traffic;

pub use crate::bump::{BumpConfig, BumpMode, BumpState, OobleckParams, SpeedReading};
pub use crate::geo::{GeoError, GeoPoint, Heading};
pub use crate::protocol::{BumpTelemetry, EvBeacon, Frame, FrameError, VehicleId};
pub use crate::radio::{LoraLinkParams, UplinkParams};
pub use crate::sim::{Report, Scenario};
pub use crate::traffic::{DelayRecord, ZoneGeometry};
