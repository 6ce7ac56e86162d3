//! Wire frames for emergency-vehicle beacons and bump telemetry.
//!
//! Beacon frame, 22 bytes:
//!
//! | bytes  | field                                         |
//! |--------|-----------------------------------------------|
//! | 0      | version (`0x01`)                              |
//! | 1      | message type (`0x01`)                         |
//! | 2..6   | vehicle id, `u32` LE                          |
//! | 6..10  | latitude, `i32` LE microdegrees               |
//! | 10..14 | longitude, `i32` LE microdegrees              |
//! | 14..16 | heading, `u16` LE centidegrees (0..=35999)    |
//! | 16..20 | timestamp, `u32` LE seconds                   |
//! | 20..22 | CRC-16/CCITT-FALSE over bytes 0..20, BE       |
//!
//! Telemetry frame, 15 bytes:
//!
//! | bytes  | field                                         |
//! |--------|-----------------------------------------------|
//! | 0      | version (`0x01`)                              |
//! | 1      | message type (`0x02`)                         |
//! | 2..6   | bump id, `u32` LE                             |
//! | 6      | state code (0..=4)                            |
//! | 7..9   | last speed reading, `u16` LE centimeters/s    |
//! | 9..13  | timestamp, `u32` LE seconds                   |
//! | 13..15 | CRC-16/CCITT-FALSE over bytes 0..13, BE       |
//!
//! Coordinates are rounded half away from zero.

use core::fmt;
use core::num::NonZeroU32;

use libm::round;
use thiserror::Error;

use crate::bump::BumpMode;
use crate::geo::{GeoPoint, Heading};

pub const FRAME_VERSION: u8 = 0x01;
pub const MSG_BEACON: u8 = 0x01;
pub const MSG_TELEMETRY: u8 = 0x02;
pub const BEACON_FRAME_LEN: usize = 22;
pub const TELEMETRY_FRAME_LEN: usize = 15;

const MICRO: f64 = 1_000_000.0;
const CENTI: f64 = 100.0;

/// Registered emergency-vehicle identifier. Zero is reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(transparent))]
pub struct VehicleId(NonZeroU32);

impl VehicleId {
    pub fn new(id: u32) -> Option<Self> {
        NonZeroU32::new(id).map(Self)
    }

    pub fn get(self) -> u32 {
        self.0.get()
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The emergency vehicle's broadcast: who, where, which way, and when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvBeacon {
    pub vehicle_id: VehicleId,
    pub position: GeoPoint,
    pub heading: Heading,
    /// Seconds since the scenario epoch.
    pub timestamp: u32,
}

impl EvBeacon {
    /// The beacon as it looks after a trip through the wire format.
    pub fn quantized(&self) -> EvBeacon {
        match decode_frame(&encode_beacon(self)) {
            Ok(Frame::Beacon(b)) => b,
            _ => unreachable!("encoded beacon always decodes"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BumpTelemetry {
    pub bump_id: u32,
    pub mode: BumpMode,
    /// Centimeters per second.
    pub last_speed_reading: u16,
    pub timestamp: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Beacon(EvBeacon),
    Telemetry(BumpTelemetry),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("integrity failure: crc {computed:#06x} does not match {received:#06x}")]
    Integrity { computed: u16, received: u16 },
    #[error("unsupported frame: version {version:#04x}, type {msg_type:#04x}")]
    Unsupported { version: u8, msg_type: u8 },
    #[error("invalid field: {0}")]
    InvalidField(&'static str),
}

const CRC_TABLE: [u16; 256] = build_crc_table();

const fn build_crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
pub fn crc16(bytes: &[u8]) -> u16 {
    bytes.iter().fold(0xFFFF, |crc, &b| {
        (crc << 8) ^ CRC_TABLE[usize::from((crc >> 8) as u8 ^ b)]
    })
}

fn to_micro(deg: f64) -> i32 {
    round(deg * MICRO) as i32
}

fn longitude_micro(lon_deg: f64) -> i32 {
    let m = to_micro(lon_deg);
    // 179.9999996 rounds onto the excluded +180 edge
    if m >= 180_000_000 {
        m - 360_000_000
    } else {
        m
    }
}

fn heading_centi(heading: Heading) -> u16 {
    let c = round(heading.deg() * CENTI) as u32;
    (c % 36_000) as u16
}

pub fn encode_beacon(b: &EvBeacon) -> [u8; BEACON_FRAME_LEN] {
    let mut out = [0u8; BEACON_FRAME_LEN];
    out[0] = FRAME_VERSION;
    out[1] = MSG_BEACON;
    out[2..6].copy_from_slice(&b.vehicle_id.get().to_le_bytes());
    out[6..10].copy_from_slice(&to_micro(b.position.lat_deg()).to_le_bytes());
    out[10..14].copy_from_slice(&longitude_micro(b.position.lon_deg()).to_le_bytes());
    out[14..16].copy_from_slice(&heading_centi(b.heading).to_le_bytes());
    out[16..20].copy_from_slice(&b.timestamp.to_le_bytes());
    let crc = crc16(&out[..20]);
    out[20..22].copy_from_slice(&crc.to_be_bytes());
    out
}

pub fn encode_telemetry(t: &BumpTelemetry) -> [u8; TELEMETRY_FRAME_LEN] {
    let mut out = [0u8; TELEMETRY_FRAME_LEN];
    out[0] = FRAME_VERSION;
    out[1] = MSG_TELEMETRY;
    out[2..6].copy_from_slice(&t.bump_id.to_le_bytes());
    out[6] = t.mode.code();
    out[7..9].copy_from_slice(&t.last_speed_reading.to_le_bytes());
    out[9..13].copy_from_slice(&t.timestamp.to_le_bytes());
    let crc = crc16(&out[..13]);
    out[13..15].copy_from_slice(&crc.to_be_bytes());
    out
}

/// Encoded length for a message type, if the type is known.
pub fn frame_len(msg_type: u8) -> Option<usize> {
    match msg_type {
        MSG_BEACON => Some(BEACON_FRAME_LEN),
        MSG_TELEMETRY => Some(TELEMETRY_FRAME_LEN),
        _ => None,
    }
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

fn le_i32(b: &[u8]) -> i32 {
    i32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, FrameError> {
    if bytes.len() < 2 {
        return Err(FrameError::Truncated {
            expected: BEACON_FRAME_LEN.min(TELEMETRY_FRAME_LEN),
            got: bytes.len(),
        });
    }
    let (version, msg_type) = (bytes[0], bytes[1]);
    let expected = match frame_len(msg_type) {
        Some(n) if version == FRAME_VERSION => n,
        _ => return Err(FrameError::Unsupported { version, msg_type }),
    };
    if bytes.len() != expected {
        return Err(FrameError::Truncated {
            expected,
            got: bytes.len(),
        });
    }

    let body = &bytes[..expected - 2];
    let received = u16::from_be_bytes([bytes[expected - 2], bytes[expected - 1]]);
    let computed = crc16(body);
    if computed != received {
        return Err(FrameError::Integrity { computed, received });
    }

    match msg_type {
        MSG_BEACON => {
            let vehicle_id = VehicleId::new(le_u32(&body[2..6])).ok_or(FrameError::InvalidField("vehicle id 0"))?;
            let lat = f64::from(le_i32(&body[6..10])) / MICRO;
            let lon = le_i32(&body[10..14]);
            if !(-180_000_000..180_000_000).contains(&lon) {
                return Err(FrameError::InvalidField("longitude"));
            }
            let position =
                GeoPoint::new(lat, f64::from(lon) / MICRO).map_err(|_| FrameError::InvalidField("latitude"))?;
            let centi = le_u16(&body[14..16]);
            if centi >= 36_000 {
                return Err(FrameError::InvalidField("heading"));
            }
            let heading = Heading::new(f64::from(centi) / CENTI).map_err(|_| FrameError::InvalidField("heading"))?;
            Ok(Frame::Beacon(EvBeacon {
                vehicle_id,
                position,
                heading,
                timestamp: le_u32(&body[16..20]),
            }))
        }
        _ => {
            let mode = BumpMode::from_code(body[6]).ok_or(FrameError::InvalidField("state code"))?;
            Ok(Frame::Telemetry(BumpTelemetry {
                bump_id: le_u32(&body[2..6]),
                mode,
                last_speed_reading: le_u16(&body[7..9]),
                timestamp: le_u32(&body[9..13]),
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::vec::Vec;

    /// Bitwise CRC, independent of the table path.
    fn reference_crc(data: &[u8]) -> u16 {
        let mut crc: u16 = 0xFFFF;
        for &byte in data {
            for i in (0..8).rev() {
                let bit = (byte >> i) & 1 == 1;
                let top = crc & 0x8000 != 0;
                crc <<= 1;
                if bit ^ top {
                    crc ^= 0x1021;
                }
            }
        }
        crc
    }

    fn beacon(id: u32, lat: f64, lon: f64, heading: f64, ts: u32) -> EvBeacon {
        EvBeacon {
            vehicle_id: VehicleId::new(id).unwrap(),
            position: GeoPoint::new(lat, lon).unwrap(),
            heading: Heading::new(heading).unwrap(),
            timestamp: ts,
        }
    }

    #[test]
    fn crc_check_values() {
        assert_eq!(crc16(b""), 0xFFFF);
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(reference_crc(b"123456789"), 0x29B1);
    }

    #[test]
    fn zero_beacon_layout() {
        let frame = encode_beacon(&beacon(1, 0.0, 0.0, 0.0, 0));
        let mut expected = [0u8; 22];
        expected[..6].copy_from_slice(&[0x01, 0x01, 0x01, 0x00, 0x00, 0x00]);
        let crc = reference_crc(&expected[..20]);
        assert_eq!(crc, 0xED25);
        expected[20..].copy_from_slice(&crc.to_be_bytes());
        assert_eq!(frame, expected);
    }

    #[test]
    fn coordinate_scaling_and_rounding() {
        let f = encode_beacon(&beacon(1, 35.700001, 0.0, 0.0, 0));
        assert_eq!(le_i32(&f[6..10]), 35_700_001);
        let f = encode_beacon(&beacon(1, -0.0000005, 0.0, 0.0, 0));
        assert_eq!(le_i32(&f[6..10]), -1);
        let f = encode_beacon(&beacon(1, 0.0, 179.9999996, 359.996, 0));
        assert_eq!(le_i32(&f[10..14]), -180_000_000);
        assert_eq!(le_u16(&f[14..16]), 0);
    }

    #[test]
    fn decode_errors_are_distinct() {
        let frame = encode_beacon(&beacon(9, 32.65, 51.67, 123.45, 77));
        assert!(matches!(
            decode_frame(&frame[..21]),
            Err(FrameError::Truncated { expected: 22, got: 21 })
        ));
        let mut bad = frame;
        bad[21] ^= 0xFF;
        assert!(matches!(decode_frame(&bad), Err(FrameError::Integrity { .. })));
        let mut v2 = frame;
        v2[0] = 0x02;
        assert!(matches!(decode_frame(&v2), Err(FrameError::Unsupported { .. })));
        let mut t = frame;
        t[1] = 0x07;
        assert!(matches!(decode_frame(&t), Err(FrameError::Unsupported { .. })));
        assert!(matches!(decode_frame(&[]), Err(FrameError::Truncated { .. })));
    }

    #[test]
    fn telemetry_round_trip() {
        let t = BumpTelemetry {
            bump_id: 42,
            mode: BumpMode::PenaltyRaised,
            last_speed_reading: 950,
            timestamp: 3600,
        };
        let bytes = encode_telemetry(&t);
        assert_eq!(bytes.len(), TELEMETRY_FRAME_LEN);
        assert_eq!(bytes[6], 4);
        assert_eq!(decode_frame(&bytes), Ok(Frame::Telemetry(t)));

        let mut bad_state = bytes;
        bad_state[6] = 5;
        let crc = crc16(&bad_state[..13]);
        bad_state[13..].copy_from_slice(&crc.to_be_bytes());
        assert_eq!(decode_frame(&bad_state), Err(FrameError::InvalidField("state code")));
    }

    fn arb_beacon() -> impl Strategy<Value = EvBeacon> {
        (1u32.., -90.0f64..=90.0, -180.0f64..180.0, 0.0f64..360.0, any::<u32>())
            .prop_map(|(id, la, lo, h, ts)| beacon(id, la, lo, h, ts))
    }

    proptest! {
        #[test]
        fn beacon_round_trip_is_quantized_fixed_point(b in arb_beacon()) {
            let bytes = encode_beacon(&b);
            let Frame::Beacon(d) = decode_frame(&bytes).unwrap() else { panic!("wrong frame type") };
            prop_assert_eq!(d.vehicle_id, b.vehicle_id);
            prop_assert_eq!(d.timestamp, b.timestamp);
            prop_assert!((d.position.lat_deg() - b.position.lat_deg()).abs() <= 0.5e-6 + 1e-12);
            let dlon = (d.position.lon_deg() - b.position.lon_deg()).abs();
            prop_assert!(dlon <= 0.5e-6 + 1e-12 || (360.0 - dlon) <= 0.5e-6 + 1e-12);
            prop_assert!(d.heading.difference(b.heading) <= 0.005 + 1e-9);
            prop_assert_eq!(encode_beacon(&d), bytes);
        }

        #[test]
        fn every_single_bit_flip_is_rejected(b in arb_beacon()) {
            let frame = encode_beacon(&b);
            for bit in 0..(BEACON_FRAME_LEN * 8) {
                let mut f = frame;
                f[bit / 8] ^= 1 << (bit % 8);
                prop_assert!(decode_frame(&f).is_err(), "bit {} accepted", bit);
            }
        }

        #[test]
        fn table_crc_matches_bitwise(data in proptest::collection::vec(any::<u8>(), 0..64)) {
            prop_assert_eq!(crc16(&data), reference_crc(&data));
        }

        #[test]
        fn single_bit_flips_change_crc(data in proptest::collection::vec(any::<u8>(), 22..=22)) {
            let base = crc16(&data);
            for bit in 0..(data.len() * 8) {
                let mut d: Vec<u8> = data.clone();
                d[bit / 8] ^= 1 << (bit % 8);
                prop_assert_ne!(crc16(&d), base);
            }
        }
    }
}
