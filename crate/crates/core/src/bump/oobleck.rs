//! Shear-thickening surface layer.
//!
//! The layer is modeled as a power-law fluid, `mu = K * rate^(n - 1)`, with
//! n = 2 so that apparent viscosity is proportional to shear rate. A rolling
//! wheel's shear rate is taken as `speed / layer_thickness`; above the critical
//! rate the layer acts as a solid and the vehicle is forced down to a fixed
//! crossing speed.

use libm::pow;

use super::{BumpConfig, BumpMode, BumpState};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OobleckParams {
    pub layer_thickness_m: f64,
    pub critical_speed_mps: f64,
    /// Consistency coefficient of the power law.
    pub consistency_k: f64,
    pub flow_index_n: f64,
    pub solid_crossing_speed_mps: f64,
    pub penalty_crossing_speed_mps: f64,
}

impl Default for OobleckParams {
    fn default() -> Self {
        Self {
            layer_thickness_m: 0.05,
            critical_speed_mps: 8.33,
            consistency_k: 1.0,
            flow_index_n: 2.0,
            solid_crossing_speed_mps: 3.33,
            penalty_crossing_speed_mps: 2.22,
        }
    }
}

impl OobleckParams {
    pub fn shear_rate(&self, speed_mps: f64) -> f64 {
        speed_mps / self.layer_thickness_m
    }

    pub fn critical_shear_rate(&self) -> f64 {
        self.shear_rate(self.critical_speed_mps)
    }
}

/// Apparent viscosity at `shear_rate` (model units).
pub fn viscosity(shear_rate: f64, p: &OobleckParams) -> f64 {
    p.consistency_k * pow(shear_rate, p.flow_index_n - 1.0)
}

/// How the bump responds to one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum CrossingRegime {
    /// Fully lowered; no effect.
    Bypass,
    /// Below the critical shear rate; the layer flows.
    Liquid,
    /// Above the critical shear rate on a nominal-height bump.
    Solid,
    /// Above the critical shear rate on a penalty-height bump.
    Penalty,
    /// Rigid conventional bump.
    Conventional,
}

pub fn crossing_regime(approach_speed_mps: f64, state: &BumpState, cfg: &BumpConfig, now: f64) -> CrossingRegime {
    if state.height_m(cfg, now) <= 0.0 {
        return CrossingRegime::Bypass;
    }
    let p = &cfg.oobleck;
    if p.shear_rate(approach_speed_mps) <= p.critical_shear_rate() {
        CrossingRegime::Liquid
    } else if state.mode == BumpMode::PenaltyRaised {
        CrossingRegime::Penalty
    } else {
        CrossingRegime::Solid
    }
}

/// Speed at which a vehicle approaching at `approach_speed_mps` rolls over
/// the bump. Never exceeds the approach speed.
pub fn crossing_speed(approach_speed_mps: f64, state: &BumpState, cfg: &BumpConfig, now: f64) -> f64 {
    regime_speed(
        crossing_regime(approach_speed_mps, state, cfg, now),
        approach_speed_mps,
        &cfg.oobleck,
    )
}

pub fn regime_speed(regime: CrossingRegime, approach_speed_mps: f64, p: &OobleckParams) -> f64 {
    match regime {
        CrossingRegime::Bypass | CrossingRegime::Liquid => approach_speed_mps,
        CrossingRegime::Solid | CrossingRegime::Conventional => approach_speed_mps.min(p.solid_crossing_speed_mps),
        CrossingRegime::Penalty => approach_speed_mps.min(p.penalty_crossing_speed_mps),
    }
}
