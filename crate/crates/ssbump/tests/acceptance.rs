//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssbump::output::structured;
use ssbump::{load_scenario, TABLE1_SCENARIO};
use ssbump_core::bump::{
    crossing_speed, viscosity, BumpConfig, BumpMode, BumpState, OobleckParams, SpeedReading, VehicleRegistry,
};
use ssbump_core::geo::{destination, GeoPoint, Heading};
use ssbump_core::protocol::{
    crc16, decode_frame, encode_beacon, encode_telemetry, EvBeacon, Frame, FrameError, VehicleId, BEACON_FRAME_LEN,
};
use ssbump_core::sim::{ev_control_delay, ev_response_delay, run, Report, Scenario};

const EV_ROUTE: &str = include_str!("../scenarios/ev_route.scn");
const LOSSY_LINK: &str = include_str!("../scenarios/lossy_link.scn");
const FRAME_VECTORS: &str = include_str!("../../core/testdata/frame_vectors.txt");

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixture(text: &str) -> Scenario {
    load_scenario(text).expect("shipped fixture is valid")
}

fn fixtures() -> [(&'static str, Scenario); 3] {
    [
        ("table1", fixture(TABLE1_SCENARIO)),
        ("ev_route", fixture(EV_ROUTE)),
        ("lossy_link", fixture(LOSSY_LINK)),
    ]
}

fn go(s: &Scenario, seed: u64) -> Report {
    run(s, seed).expect("valid scenario")
}

/// Free-flow and calibrated conventional transit over a 30 m zone at 40 km/h.
fn conventional_ev_delay() -> f64 {
    30.0 / 3.2 - 30.0 / (40.0 / 3.6)
}

fn criterion_1() -> Outcome {
    let s = fixture(TABLE1_SCENARIO);
    check(s.bumps.len() == 1, "fixture must have one bump")?;
    check(s.zone.length_m() == 30.0, "fixture zone must be 30 m")?;
    check(s.lora.loss_prob == 0.0, "fixture must be lossless")?;
    let started = Instant::now();
    let r = go(&s, 42);
    let elapsed = started.elapsed();
    let conv = r.conventional.mean_transit_s.ok_or("no conventional crossings")?;
    let ss = r.ssbump.mean_transit_s.ok_or("no SSBump crossings")?;
    let red = r.reduction_percent.ok_or("no reduction")?;
    let summary = format!(
        "conventional {conv:.3} s, SSBump {ss:.3} s over {} vehicles, reduction {red:.2}% ({:.1}% on rounded means), {elapsed:?}",
        r.ssbump.crossings,
        r.reduction_percent_rounded.unwrap_or(f64::NAN)
    );
    check(
        r.conventional.crossings == 200 && r.ssbump.crossings == 200,
        format!("expected 200 vehicles: {summary}"),
    )?;
    check((conv - 9.4).abs() <= 0.1, format!("conventional off: {summary}"))?;
    check((ss - 3.6).abs() <= 0.1, format!("SSBump off: {summary}"))?;
    check((61.0..=62.2).contains(&red), format!("reduction off: {summary}"))?;
    check(elapsed < Duration::from_secs(1), format!("too slow: {summary}"))?;
    Ok(summary)
}

fn criterion_2() -> Outcome {
    let s = fixture(EV_ROUTE);
    check(s.bumps.len() == 3, "fixture must have three bumps")?;
    check(s.lora.loss_prob == 0.0, "fixture must be lossless")?;
    let ev = &s.evs[0];
    for b in &s.bumps {
        let travel = (b.chainage_m - s.zone.upstream_m - ev.start_chainage_m) / ev.cruise_speed_mps;
        let needed = b.config.deflate_eta_threshold_s + b.config.lower_duration_s;
        check(
            travel >= needed,
            format!("bump {} only {travel:.1} s away", b.config.bump_id),
        )?;
    }
    let r = go(&s, 42);
    let id = ev.id.get();
    let mut controls = Vec::new();
    for b in &s.bumps {
        let bump = b.config.bump_id;
        let d = ev_response_delay(&r, id, bump).map_err(|e| e.to_string())?;
        check(d == 0.0, format!("bump {bump}: delay {d} s, expected exactly 0"))?;
        let c = ev_control_delay(&r, id, bump).map_err(|e| e.to_string())?;
        check(
            (c - conventional_ev_delay()).abs() < 1e-9,
            format!("bump {bump}: control delay {c}"),
        )?;
        controls.push(c);
    }
    Ok(format!(
        "delay 0 s at 3 bumps; conventional control {:.3} s per bump",
        controls[0]
    ))
}

fn criterion_3() -> Outcome {
    let mut intervals = 0usize;
    for (name, s) in fixtures() {
        for seed in [1, 42, 0xdead_beef] {
            let r = go(&s, seed);
            for ev in &s.evs {
                let times = r
                    .beacon_times(ev.id.get())
                    .ok_or(format!("{name}: no beacons from {}", ev.id))?;
                check(times.len() >= 2, format!("{name}: too few beacons"))?;
                for w in times.windows(2) {
                    check(
                        w[1] - w[0] == 5_000_000,
                        format!("{name} seed {seed}: beacons {} us apart", w[1] - w[0]),
                    )?;
                    intervals += 1;
                }
            }
        }
    }
    Ok(format!("{intervals} consecutive beacon pairs, all exactly 5.0 s apart"))
}

/// Bitwise CRC-16/CCITT-FALSE, independent of the table-driven codec.
fn reference_crc(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= u16::from(byte) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

fn criterion_4() -> Outcome {
    let mut vectors = 0;
    for line in FRAME_VECTORS
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f[0] {
            "beacon" | "telemetry" => {
                let bytes = unhex(f[f.len() - 1]);
                let reencoded = match decode_frame(&bytes) {
                    Ok(Frame::Beacon(b)) => encode_beacon(&b).to_vec(),
                    Ok(Frame::Telemetry(t)) => encode_telemetry(&t).to_vec(),
                    Err(e) => return Err(format!("vector {line}: {e}")),
                };
                check(reencoded == bytes, format!("vector does not round-trip: {line}"))?;
            }
            "crc" => {
                let input = if f[1] == "-" { Vec::new() } else { unhex(f[1]) };
                let want = u16::from_str_radix(f[2], 16).unwrap();
                check(crc16(&input) == want, format!("crc vector {line}"))?;
            }
            other => return Err(format!("unknown vector kind {other}")),
        }
        vectors += 1;
    }
    check(vectors >= 10, "too few vectors shipped")?;

    let check_value = crc16(b"123456789");
    check(
        reference_crc(b"123456789") == 0x29B1,
        "reference CRC disagrees with the check value",
    )?;
    check(check_value == 0x29B1, format!("check value {check_value:#06x}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rejected = 0;
    for _ in 0..100 {
        let beacon = EvBeacon {
            vehicle_id: VehicleId::new(rng.random_range(1..=u32::MAX)).unwrap(),
            position: GeoPoint::new(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..180.0)).unwrap(),
            heading: Heading::new(rng.random_range(0.0..360.0)).unwrap(),
            timestamp: rng.random(),
        };
        let frame = encode_beacon(&beacon);
        check(
            reference_crc(&frame[..20]) == u16::from_be_bytes([frame[20], frame[21]]),
            "frame CRC mismatch",
        )?;
        for bit in 0..BEACON_FRAME_LEN * 8 {
            let mut bad = frame;
            bad[bit / 8] ^= 1 << (bit % 8);
            match decode_frame(&bad) {
                Err(FrameError::Integrity { .. } | FrameError::Unsupported { .. }) => rejected += 1,
                other => return Err(format!("flip of bit {bit} accepted: {other:?}")),
            }
        }
    }
    check(rejected == 17_600, format!("{rejected} flips rejected"))?;
    Ok(format!(
        "{vectors} vectors round-trip, CRC(\"123456789\") = {check_value:#06X}, 17600/17600 bit flips rejected"
    ))
}

fn criterion_5() -> Outcome {
    for (name, s) in fixtures() {
        let a = structured(&go(&s, 42));
        let b = structured(&go(&s, 42));
        check(a == b, format!("{name}: reports differ between identical runs"))?;
    }
    let s = fixture(TABLE1_SCENARIO);
    let base = go(&s, 42);
    let (c0, s0) = (
        base.conventional.mean_transit_s.unwrap(),
        base.ssbump.mean_transit_s.unwrap(),
    );
    for seed in [1, 7, 1234, 0xffff_ffff_ffff] {
        let r = go(&s, seed);
        check(
            r.records != base.records,
            format!("seed {seed} did not change per-vehicle records"),
        )?;
        let (c, m) = (r.conventional.mean_transit_s.unwrap(), r.ssbump.mean_transit_s.unwrap());
        check(
            (c - c0).abs() <= 0.1 && (m - s0).abs() <= 0.1,
            format!("seed {seed} moved the means to {c}, {m}"),
        )?;
    }
    Ok("3 fixtures byte-identical on rerun; 4 other seeds change records but not the means".into())
}

const INTERLEAVINGS: usize = 100_000;

/// Random events against one controller, checking the safety invariant after
/// every step and liveness once the events stop.
fn fuzz_bump(cfg: &BumpConfig, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let registered = [VehicleId::new(1).unwrap(), VehicleId::new(2).unwrap()];
    let spoofed = VehicleId::new(99).unwrap();
    let registry = VehicleRegistry::new(registered);
    let mut prev: [Option<EvBeacon>; 3] = [None; 3];
    let mut state = BumpState::new();
    let mut now = 0.0f64;
    let steps = rng.random_range(1..=16);
    let mut trace = Vec::new();

    for _ in 0..steps {
        now += rng.random_range(0.0..8.0);
        let event = rng.random_range(0..6u8);
        trace.push((event, now));
        state = match event {
            0 | 1 => {
                let slot = rng.random_range(0..3usize);
                let id = if slot == 2 { spoofed } else { registered[slot] };
                let bearing = Heading::new(rng.random_range(0.0..360.0)).unwrap();
                let position = destination(cfg.position, bearing, rng.random_range(0.0..600.0));
                let heading = if rng.random_bool(0.6) {
                    // pointed at the bump, give or take
                    Heading::new(bearing.deg() + 180.0 + rng.random_range(-60.0..60.0)).unwrap()
                } else {
                    Heading::new(rng.random_range(0.0..360.0)).unwrap()
                };
                let beacon = EvBeacon {
                    vehicle_id: id,
                    position,
                    heading,
                    timestamp: now as u32,
                };
                let next = state.on_beacon(cfg, &beacon, prev[slot].as_ref(), now, &registry);
                prev[slot] = Some(beacon);
                next.unwrap_or(state)
            }
            2 => {
                let reading = SpeedReading {
                    vehicle_ref: 5,
                    speed_mps: rng.random_range(0.0..20.0),
                    at_time: now,
                };
                state.on_speed_reading(cfg, &reading)
            }
            3 => state.on_rfid_detect(cfg, registered[rng.random_range(0..2)], now),
            4 => state.vehicle_crossed(cfg),
            _ => state.tick(cfg, now),
        };
        state
            .check_invariants()
            .map_err(|e| format!("safety violated ({e}) after {trace:?}: {state:?}"))?;
        check(
            state.active_ev.is_none() || matches!(state.mode, BumpMode::Lowering | BumpMode::Lowered),
            format!("active_ev outside deflation after {trace:?}: {state:?}"),
        )?;
    }

    // silence: deliver only the ticks the engine would schedule
    let horizon = now + cfg.beacon_timeout_s + cfg.raise_duration_s + 1e-3;
    for _ in 0..8 {
        let next = [
            state.transition_deadline(cfg),
            state.timeout_deadline(cfg).map(|t| t + 1e-6),
        ]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
        if !next.is_finite() {
            break;
        }
        now = now.max(next);
        state = state.tick(cfg, now);
        state
            .check_invariants()
            .map_err(|e| format!("safety violated ({e}) while idle: {state:?}"))?;
    }
    let raised = match state.mode {
        BumpMode::Raised => true,
        BumpMode::PenaltyRaised => state.pending_fastest_mps > cfg.speed_limit_mps,
        _ => false,
    };
    check(
        raised && state.active_ev.is_none(),
        format!("not raised after silence, {trace:?}: {state:?}"),
    )?;
    check(
        now <= horizon,
        format!("raised only at {now}, bound {horizon}, {trace:?}"),
    )
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let mut total = 0usize;
    for (i, (name, s)) in fixtures().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + i as u64);
        let configs: Vec<BumpConfig> = s
            .bumps
            .iter()
            .map(|b| BumpConfig {
                position: s.road.point_at(b.chainage_m),
                ..b.config.clone()
            })
            .collect();
        for n in 0..INTERLEAVINGS {
            fuzz_bump(&configs[n % configs.len()], &mut rng).map_err(|e| format!("{name} #{n}: {e}"))?;
        }
        total += INTERLEAVINGS;
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{total} interleavings over 3 fixtures, no violation, {elapsed:?}"
    ))
}

fn criterion_7() -> Outcome {
    let cfg = BumpConfig::default();
    let p = OobleckParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let modes = BumpMode::ALL;
    for _ in 0..100_000 {
        let mode = modes[rng.random_range(0..modes.len())];
        let state = BumpState {
            mode,
            transition_started_at: mode.is_transition().then_some(0.0),
            active_ev: mode.is_deflating().then(|| VehicleId::new(1).unwrap()),
            ..BumpState::new()
        };
        let approach = rng.random_range(0.0..60.0);
        let now = rng.random_range(0.0..5.0);
        let crossing = crossing_speed(approach, &state, &cfg, now);
        check(
            crossing <= approach,
            format!("crossing {crossing} above approach {approach} in {mode:?}"),
        )?;
    }

    let raised = BumpState::new();
    let compliant = 30.0 / 3.6 - 0.01;
    check(
        crossing_speed(compliant, &raised, &cfg, 0.0) == compliant,
        "compliant approach was slowed",
    )?;
    let speeding = 40.0 / 3.6;
    let solid = crossing_speed(speeding, &raised, &cfg, 0.0);
    check(solid == 3.33, format!("speeder crosses at {solid}"))?;

    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let rate = rng.random_range(1e-3..1e4);
        let rel = (viscosity(2.0 * rate, &p) - 2.0 * viscosity(rate, &p)).abs() / (2.0 * viscosity(rate, &p));
        worst = worst.max(rel);
    }
    check(
        worst <= f64::EPSILON,
        format!("viscosity proportionality off by {worst:e}"),
    )?;
    Ok(format!(
        "crossing never above approach; compliant unchanged; speeder at {solid} m/s; viscosity ratio error {worst:e}"
    ))
}

fn criterion_8() -> Outcome {
    let with = fixture(LOSSY_LINK);
    check(
        with.lora.loss_prob == 1.0 && with.rfid_fallback,
        "fixture must lose every beacon with fallback on",
    )?;
    let without = Scenario {
        rfid_fallback: false,
        ..with.clone()
    };
    let ev = with.evs[0].id.get();
    let bump = with.bumps[0].config.bump_id;

    let r_on = go(&with, 42);
    let r_off = go(&without, 42);
    check(
        r_on.packets.lora.delivered == 0 && r_off.packets.lora.delivered == 0,
        "a beacon got through",
    )?;
    let on = ev_response_delay(&r_on, ev, bump).map_err(|e| e.to_string())?;
    let off = ev_response_delay(&r_off, ev, bump).map_err(|e| e.to_string())?;
    let conventional = ev_control_delay(&r_off, ev, bump).map_err(|e| e.to_string())?;
    check(on == 0.0, format!("fallback on: delay {on} s"))?;
    check(
        off == conventional,
        format!("fallback off: delay {off} s vs conventional {conventional} s"),
    )?;
    check(
        (off - conventional_ev_delay()).abs() < 1e-9,
        format!("conventional delay {off}"),
    )?;
    check(on <= off, "fallback made things worse")?;
    Ok(format!(
        "fallback on 0 s; fallback off {off:.3} s = conventional {conventional:.3} s"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("average delay table", criterion_1),
        ("zero emergency delay", criterion_2),
        ("beacon cadence", criterion_3),
        ("codec conformance", criterion_4),
        ("determinism", criterion_5),
        ("state machine fuzzing", criterion_6),
        ("oobleck properties", criterion_7),
        ("lossy link degradation", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
