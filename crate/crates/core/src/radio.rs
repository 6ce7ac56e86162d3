//! Link models for the vehicle-to-bump long-range hop and the bump-to-server
//! uplink.
//!
//! The long-range hop is a disc of fixed radius with Bernoulli loss inside it
//! and a deterministic time-on-air delay. The uplink is a mean latency with
//! uniform jitter and Bernoulli loss. Stochastic draws come from the caller's
//! seeded stream.

use libm::{ceil, pow};
use rand::Rng;
use thiserror::Error;

use crate::geo::{haversine_distance, GeoPoint};

/// Ten statute miles, the ideal-conditions range of the radio module.
pub const IDEAL_RANGE_M: f64 = 16_093.44;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadioError {
    #[error("spreading factor {0} outside 7..=12")]
    SpreadingFactor(u8),
    #[error("bandwidth {0} Hz not one of 125000, 250000, 500000")]
    Bandwidth(u32),
    #[error("coding rate denominator {0} outside 5..=8")]
    CodingRate(u8),
    #[error("{0} must be a probability in [0, 1]")]
    Probability(&'static str),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LoraLinkParams {
    pub max_range_m: f64,
    pub loss_prob: f64,
    pub spreading_factor: u8,
    pub bandwidth_hz: u32,
    /// Coding rate 4/n, stored as n.
    pub coding_rate_denom: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    pub low_data_rate_optimize: bool,
}

impl Default for LoraLinkParams {
    fn default() -> Self {
        Self {
            max_range_m: 8_000.0,
            loss_prob: 0.01,
            spreading_factor: 7,
            bandwidth_hz: 125_000,
            coding_rate_denom: 5,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            low_data_rate_optimize: false,
        }
    }
}

impl LoraLinkParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !(7..=12).contains(&self.spreading_factor) {
            return Err(RadioError::SpreadingFactor(self.spreading_factor));
        }
        if !matches!(self.bandwidth_hz, 125_000 | 250_000 | 500_000) {
            return Err(RadioError::Bandwidth(self.bandwidth_hz));
        }
        if !(5..=8).contains(&self.coding_rate_denom) {
            return Err(RadioError::CodingRate(self.coding_rate_denom));
        }
        if !is_probability(self.loss_prob) {
            return Err(RadioError::Probability("loss_prob"));
        }
        if !(self.max_range_m > 0.0) || !self.max_range_m.is_finite() {
            return Err(RadioError::NonPositive("max_range_m"));
        }
        Ok(())
    }

    /// Symbol duration in milliseconds.
    pub fn symbol_time_ms(&self) -> f64 {
        pow(2.0, f64::from(self.spreading_factor)) / f64::from(self.bandwidth_hz) * 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct UplinkParams {
    pub latency_ms_mean: f64,
    pub latency_ms_jitter: f64,
    pub loss_prob: f64,
}

impl Default for UplinkParams {
    fn default() -> Self {
        Self {
            latency_ms_mean: 20.0,
            latency_ms_jitter: 10.0,
            loss_prob: 0.0,
        }
    }
}

impl UplinkParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !(self.latency_ms_mean >= 0.0) || !self.latency_ms_mean.is_finite() {
            return Err(RadioError::NonPositive("latency_ms_mean"));
        }
        if !(self.latency_ms_jitter >= 0.0) || !self.latency_ms_jitter.is_finite() {
            return Err(RadioError::NonPositive("latency_ms_jitter"));
        }
        if !is_probability(self.loss_prob) {
            return Err(RadioError::Probability("loss_prob"));
        }
        Ok(())
    }
}

fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delivery {
    Delivered,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UplinkOutcome {
    Delivered { after_ms: f64 },
    Lost,
}

pub fn in_range(tx: GeoPoint, rx: GeoPoint, params: &LoraLinkParams) -> bool {
    haversine_distance(tx, rx) <= params.max_range_m
}

/// Out-of-range packets are lost without touching the stream; in-range
/// packets consume exactly one draw.
pub fn deliver<R: Rng + ?Sized>(params: &LoraLinkParams, distance_m: f64, rng: &mut R) -> Delivery {
    if distance_m > params.max_range_m {
        return Delivery::Lost;
    }
    if rng.random::<f64>() < params.loss_prob {
        Delivery::Lost
    } else {
        Delivery::Delivered
    }
}

/// Time on air in milliseconds for a `payload_len`-byte packet.
pub fn airtime_ms(params: &LoraLinkParams, payload_len: usize) -> f64 {
    let sf = f64::from(params.spreading_factor);
    let crc = if params.crc_on { 1.0 } else { 0.0 };
    let header = if params.explicit_header { 0.0 } else { 1.0 };
    let de = if params.low_data_rate_optimize { 1.0 } else { 0.0 };

    let numerator = 8.0 * payload_len as f64 - 4.0 * sf + 28.0 + 16.0 * crc - 20.0 * header;
    let per_block = ceil(numerator / (4.0 * (sf - 2.0 * de)));
    let payload_symbols = 8.0 + (per_block * f64::from(params.coding_rate_denom)).max(0.0);

    (f64::from(params.preamble_symbols) + 4.25 + payload_symbols) * params.symbol_time_ms()
}

/// Always consumes two draws (loss, then jitter) so the stream position does
/// not depend on the outcome.
pub fn uplink_deliver<R: Rng + ?Sized>(params: &UplinkParams, rng: &mut R) -> UplinkOutcome {
    let lost = rng.random::<f64>() < params.loss_prob;
    let u = rng.random::<f64>();
    if lost {
        return UplinkOutcome::Lost;
    }
    let latency = params.latency_ms_mean + (2.0 * u - 1.0) * params.latency_ms_jitter;
    UplinkOutcome::Delivered {
        after_ms: latency.max(0.0),
    }
}
