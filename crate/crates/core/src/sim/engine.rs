use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use libm::floor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::queue::{EventKind, EventQueue, SimTime};
use super::report::{BeaconLog, PacketStats, Report, TransitionRecord};
use super::scenario::{Scenario, ValidationIssue};
use crate::bump::{
    crossing_regime, regime_speed, BumpConfig, BumpState, CrossingRegime, SpeedReading, VehicleRegistry,
};
use crate::geo::haversine_distance;
use crate::protocol::{
    decode_frame, encode_beacon, encode_telemetry, BumpTelemetry, EvBeacon, Frame, VehicleId, BEACON_FRAME_LEN,
};
use crate::radio::{airtime_ms, deliver, uplink_deliver, Delivery, UplinkOutcome};
use crate::traffic::{
    avg_zone_speed, free_flow_time, generate_arrivals, generate_n_arrivals, zone_transit_time, BumpType, DelayRecord,
    VehicleKind, VehicleSpec,
};

const LINK_STREAM: &str = "link";
const ARRIVALS_STREAM: &str = "arrivals";
const UPLINK_STREAM: &str = "uplink";

/// Independent generator for one subsystem, derived from the run seed and a
/// fixed label.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Runs the scenario, plus its all-conventional control pass when
/// `control_run` is set, and aggregates a report.
pub fn run(scenario: &Scenario, seed: u64) -> Result<Report, Vec<ValidationIssue>> {
    scenario.validate()?;

    let primary = Pass::new(scenario, seed, false).execute();
    let mut records = primary.records;
    if scenario.control_run {
        let mut control = scenario.clone();
        for site in &mut control.bumps {
            site.kind = BumpType::Conventional;
        }
        records.extend(Pass::new(&control, seed, true).execute().records);
    }

    let beacon_log = primary
        .beacon_log
        .into_iter()
        .map(|(ev_id, tx_times_us)| BeaconLog { ev_id, tx_times_us })
        .collect();
    Ok(Report::assemble(
        scenario.name.clone(),
        seed,
        records,
        primary.packets,
        primary.transitions,
        beacon_log,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WaypointKind {
    RfidReader,
    SpeedSensor,
    ZoneEntry,
    BumpCrossing,
    ZoneExit,
}

#[derive(Debug, Clone, Copy)]
struct Waypoint {
    x: f64,
    bump: usize,
    kind: WaypointKind,
}

#[derive(Debug, Clone, Copy)]
struct ZoneVisit {
    entered: SimTime,
    regime: CrossingRegime,
    avg: f64,
    transit: f64,
    free_flow: f64,
}

#[derive(Debug)]
struct EvRuntime {
    id: VehicleId,
    interval: SimTime,
    registered: bool,
}

#[derive(Debug)]
struct Vehicle {
    spec: VehicleSpec,
    ev: Option<EvRuntime>,
    seg_time: SimTime,
    seg_x: f64,
    seg_speed: f64,
    waypoints: Vec<Waypoint>,
    next: usize,
    zone: Option<ZoneVisit>,
    tracked_at: Option<usize>,
}

impl Vehicle {
    fn position_at(&self, now: SimTime) -> f64 {
        let dt = (now.as_micros() - self.seg_time.as_micros()) as f64 / 1e6;
        self.seg_x + self.seg_speed * dt
    }
}

#[derive(Debug)]
struct Bump {
    chainage: f64,
    kind: BumpType,
    cfg: BumpConfig,
    state: BumpState,
    /// Vehicles read by the sensor that have not yet crossed.
    tracked: usize,
}

struct PassOutput {
    records: Vec<DelayRecord>,
    packets: PacketStats,
    transitions: Vec<TransitionRecord>,
    beacon_log: BTreeMap<u32, Vec<u64>>,
}

struct Pass<'a> {
    sc: &'a Scenario,
    control: bool,
    queue: EventQueue,
    bumps: Vec<Bump>,
    vehicles: Vec<Vehicle>,
    registry: VehicleRegistry,
    link_rng: ChaCha8Rng,
    uplink_rng: ChaCha8Rng,
    last_rx: BTreeMap<(usize, VehicleId), EvBeacon>,
    beacon_airtime: SimTime,
    out: PassOutput,
}

impl<'a> Pass<'a> {
    fn new(sc: &'a Scenario, seed: u64, control: bool) -> Self {
        let bumps: Vec<Bump> = sc
            .bump_order()
            .into_iter()
            .map(|i| {
                let site = &sc.bumps[i];
                let mut cfg = site.config.clone();
                cfg.position = sc.road.point_at(site.chainage_m);
                Bump {
                    chainage: site.chainage_m,
                    kind: site.kind,
                    cfg,
                    state: BumpState::new(),
                    tracked: 0,
                }
            })
            .collect();
        let registry = VehicleRegistry::new(sc.evs.iter().filter(|e| e.registered).map(|e| e.id));

        let mut pass = Self {
            sc,
            control,
            queue: EventQueue::new(),
            bumps,
            vehicles: Vec::new(),
            registry,
            link_rng: stream(seed, LINK_STREAM),
            uplink_rng: stream(seed, UPLINK_STREAM),
            last_rx: BTreeMap::new(),
            beacon_airtime: SimTime::from_secs(airtime_ms(&sc.lora, BEACON_FRAME_LEN) / 1000.0),
            out: PassOutput {
                records: Vec::new(),
                packets: PacketStats::default(),
                transitions: Vec::new(),
                beacon_log: BTreeMap::new(),
            },
        };
        pass.queue
            .schedule(SimTime::from_secs(sc.duration_s), EventKind::SimEnd);
        pass.spawn_civilians(seed);
        pass.spawn_evs();
        pass
    }

    fn waypoints_from(&self, start_x: f64, kind: VehicleKind, registered: bool) -> Vec<Waypoint> {
        let mut wps = Vec::new();
        for (i, b) in self.bumps.iter().enumerate() {
            let entry = b.chainage - self.sc.zone.upstream_m;
            if b.kind == BumpType::SsBump {
                let probe = match kind {
                    VehicleKind::Civilian => Some((b.cfg.sensor_offset_m, WaypointKind::SpeedSensor)),
                    VehicleKind::Emergency if self.sc.rfid_fallback && registered => {
                        Some((b.cfg.rfid_offset_m, WaypointKind::RfidReader))
                    }
                    VehicleKind::Emergency => None,
                };
                if let Some((offset, wk)) = probe {
                    let x = b.chainage - offset;
                    if x >= start_x {
                        wps.push(Waypoint { x, bump: i, kind: wk });
                    }
                }
            }
            if entry >= start_x {
                wps.push(Waypoint {
                    x: entry,
                    bump: i,
                    kind: WaypointKind::ZoneEntry,
                });
                wps.push(Waypoint {
                    x: b.chainage,
                    bump: i,
                    kind: WaypointKind::BumpCrossing,
                });
                wps.push(Waypoint {
                    x: b.chainage + self.sc.zone.downstream_m,
                    bump: i,
                    kind: WaypointKind::ZoneExit,
                });
            }
        }
        wps
    }

    fn spawn_civilians(&mut self, seed: u64) {
        let c = &self.sc.civilians;
        let mut rng = stream(seed, ARRIVALS_STREAM);
        let times = match c.count {
            Some(n) => generate_n_arrivals(c.rate_per_s, n, &mut rng),
            None => generate_arrivals(c.rate_per_s, self.sc.duration_s, &mut rng),
        };
        for (n, spawn) in times.into_iter().enumerate() {
            let u_speed = rng.random::<f64>();
            let u_comply = rng.random::<f64>();
            let cruise = c.speed_min_mps + (c.speed_max_mps - c.speed_min_mps) * u_speed;
            let spec = VehicleSpec {
                id: n as u32 + 1,
                kind: VehicleKind::Civilian,
                cruise_speed_mps: cruise,
                spawn_time_s: spawn,
                compliant: u_comply < c.compliance,
            };
            let start = SimTime::from_secs(spawn);
            let waypoints = self.waypoints_from(0.0, VehicleKind::Civilian, false);
            self.vehicles.push(Vehicle {
                spec,
                ev: None,
                seg_time: start,
                seg_x: 0.0,
                seg_speed: cruise,
                waypoints,
                next: 0,
                zone: None,
                tracked_at: None,
            });
            let v = self.vehicles.len() - 1;
            self.schedule_next_waypoint(v, start);
        }
    }

    fn spawn_evs(&mut self) {
        for ev in &self.sc.evs {
            let spec = VehicleSpec {
                id: ev.id.get(),
                kind: VehicleKind::Emergency,
                cruise_speed_mps: ev.cruise_speed_mps,
                spawn_time_s: ev.dispatch_s,
                compliant: false,
            };
            let dispatch = SimTime::from_secs(ev.dispatch_s);
            let waypoints = self.waypoints_from(ev.start_chainage_m, VehicleKind::Emergency, ev.registered);
            self.vehicles.push(Vehicle {
                spec,
                ev: Some(EvRuntime {
                    id: ev.id,
                    interval: SimTime::from_secs(ev.beacon_interval_s),
                    registered: ev.registered,
                }),
                seg_time: dispatch,
                seg_x: ev.start_chainage_m,
                seg_speed: ev.cruise_speed_mps,
                waypoints,
                next: 0,
                zone: None,
                tracked_at: None,
            });
            let v = self.vehicles.len() - 1;
            self.queue.schedule(dispatch, EventKind::EvDispatch { vehicle: v });
        }
    }

    fn execute(mut self) -> PassOutput {
        while let Some(event) = self.queue.pop() {
            let now = event.time;
            match event.kind {
                EventKind::SimEnd => break,
                EventKind::EvDispatch { vehicle } => {
                    self.schedule_next_waypoint(vehicle, now);
                    self.queue.schedule(now, EventKind::BeaconTx { vehicle });
                }
                EventKind::BeaconTx { vehicle } => self.on_beacon_tx(vehicle, now),
                EventKind::BeaconRx { bump, frame } => self.on_beacon_rx(bump, &frame, now),
                EventKind::SpeedReading { bump, vehicle } => {
                    self.arrive(vehicle, bump, WaypointKind::SpeedSensor, now);
                    self.on_speed_reading(bump, vehicle, now);
                    self.schedule_next_waypoint(vehicle, now);
                }
                EventKind::RfidDetect { bump, vehicle } => {
                    self.arrive(vehicle, bump, WaypointKind::RfidReader, now);
                    self.on_rfid(bump, vehicle, now);
                    self.schedule_next_waypoint(vehicle, now);
                }
                EventKind::VehicleEntersZone { bump, vehicle } => {
                    self.arrive(vehicle, bump, WaypointKind::ZoneEntry, now);
                    self.on_zone_entry(bump, vehicle, now);
                    self.schedule_next_waypoint(vehicle, now);
                }
                EventKind::VehicleCrossesBump { bump, vehicle } => {
                    self.arrive(vehicle, bump, WaypointKind::BumpCrossing, now);
                    self.on_bump_crossing(bump, vehicle, now);
                    self.schedule_next_waypoint(vehicle, now);
                }
                EventKind::VehicleExitsZone { bump, vehicle } => {
                    self.arrive(vehicle, bump, WaypointKind::ZoneExit, now);
                    self.on_zone_exit(bump, vehicle);
                    self.schedule_next_waypoint(vehicle, now);
                }
                EventKind::ActuationTick { bump } => self.advance_bump(bump, now),
                EventKind::TelemetryUplink { frame, .. } => {
                    let decoded = decode_frame(&frame);
                    debug_assert!(matches!(decoded, Ok(Frame::Telemetry(_))), "{decoded:?}");
                    self.out.packets.telemetry_received += 1;
                }
            }
        }
        self.out
    }

    fn arrive(&mut self, v: usize, bump: usize, kind: WaypointKind, now: SimTime) {
        let vehicle = &mut self.vehicles[v];
        let wp = vehicle.waypoints[vehicle.next];
        assert!(
            wp.bump == bump && wp.kind == kind,
            "vehicle {v} expected {wp:?}, got {kind:?} at bump {bump}"
        );
        vehicle.seg_time = now;
        vehicle.seg_x = wp.x;
        vehicle.next += 1;
    }

    fn schedule_next_waypoint(&mut self, v: usize, now: SimTime) {
        let vehicle = &self.vehicles[v];
        let Some(wp) = vehicle.waypoints.get(vehicle.next) else {
            return;
        };
        let at = now.after_secs((wp.x - vehicle.seg_x) / vehicle.seg_speed);
        let (bump, vehicle) = (wp.bump, v);
        let kind = match wp.kind {
            WaypointKind::RfidReader => EventKind::RfidDetect { bump, vehicle },
            WaypointKind::SpeedSensor => EventKind::SpeedReading { bump, vehicle },
            WaypointKind::ZoneEntry => EventKind::VehicleEntersZone { bump, vehicle },
            WaypointKind::BumpCrossing => EventKind::VehicleCrossesBump { bump, vehicle },
            WaypointKind::ZoneExit => EventKind::VehicleExitsZone { bump, vehicle },
        };
        self.queue.schedule(at, kind);
    }

    /// Bring a bump's actuation up to date with the clock.
    fn advance_bump(&mut self, b: usize, now: SimTime) {
        let next = self.bumps[b].state.tick(&self.bumps[b].cfg, now.as_secs());
        self.commit(b, next, now);
    }

    /// Install a new controller state; log, report and schedule follow-ups.
    fn commit(&mut self, b: usize, next: BumpState, now: SimTime) {
        let bump = &mut self.bumps[b];
        let prev = core::mem::replace(&mut bump.state, next);
        debug_assert_eq!(next.check_invariants(), Ok(()));

        if prev.mode != next.mode {
            self.out.transitions.push(TransitionRecord {
                time_s: now.as_secs(),
                bump_id: bump.cfg.bump_id,
                from: prev.mode,
                to: next.mode,
            });
            let telemetry = BumpTelemetry {
                bump_id: bump.cfg.bump_id,
                mode: next.mode,
                last_speed_reading: floor(next.pending_fastest_mps * 100.0 + 0.5).clamp(0.0, 65_535.0) as u16,
                timestamp: floor(now.as_secs()) as u32,
            };
            let frame = encode_telemetry(&telemetry);
            match uplink_deliver(&self.sc.uplink, &mut self.uplink_rng) {
                UplinkOutcome::Delivered { after_ms } => {
                    self.out.packets.uplink.record(true);
                    self.queue.schedule(
                        now.after_secs(after_ms / 1000.0),
                        EventKind::TelemetryUplink { bump: b, frame },
                    );
                }
                UplinkOutcome::Lost => self.out.packets.uplink.record(false),
            }
        }

        let cfg = &self.bumps[b].cfg;
        if let Some(deadline) = next.transition_deadline(cfg) {
            if prev.transition_deadline(cfg) != Some(deadline) {
                let at = SimTime::from_secs(deadline).max(now);
                self.queue.schedule(at, EventKind::ActuationTick { bump: b });
            }
        }
        if let Some(deadline) = next.timeout_deadline(cfg) {
            if prev.timeout_deadline(cfg) != Some(deadline) {
                // the failsafe fires strictly after the timeout
                let at = (SimTime::from_secs(deadline) + SimTime::from_micros(1)).max(now);
                self.queue.schedule(at, EventKind::ActuationTick { bump: b });
            }
        }
    }

    fn on_beacon_tx(&mut self, v: usize, now: SimTime) {
        let vehicle = &self.vehicles[v];
        let ev = vehicle.ev.as_ref().expect("only emergency vehicles beacon");
        let x = vehicle.position_at(now);
        if x > self.sc.road.length_m {
            return;
        }
        let beacon = EvBeacon {
            vehicle_id: ev.id,
            position: self.sc.road.point_at(x),
            heading: self.sc.road.heading_at(x),
            timestamp: floor(now.as_secs()) as u32,
        };
        let interval = ev.interval;
        let frame = encode_beacon(&beacon);
        self.out
            .beacon_log
            .entry(ev.id.get())
            .or_default()
            .push(now.as_micros());

        for (b, bump) in self.bumps.iter().enumerate() {
            if bump.kind != BumpType::SsBump {
                continue;
            }
            let distance = haversine_distance(beacon.position, bump.cfg.position);
            let delivered = deliver(&self.sc.lora, distance, &mut self.link_rng) == Delivery::Delivered;
            self.out.packets.lora.record(delivered);
            if delivered {
                self.queue
                    .schedule(now + self.beacon_airtime, EventKind::BeaconRx { bump: b, frame });
            }
        }
        self.queue.schedule(now + interval, EventKind::BeaconTx { vehicle: v });
    }

    fn on_beacon_rx(&mut self, b: usize, frame: &[u8], now: SimTime) {
        let beacon = match decode_frame(frame) {
            Ok(Frame::Beacon(beacon)) => beacon,
            other => panic!("corrupt beacon frame in flight: {other:?}"),
        };
        self.advance_bump(b, now);
        let key = (b, beacon.vehicle_id);
        let bump = &self.bumps[b];
        let result = bump.state.on_beacon(
            &bump.cfg,
            &beacon,
            self.last_rx.get(&key),
            now.as_secs(),
            &self.registry,
        );
        match result {
            Ok(next) => {
                self.commit(b, next, now);
                self.last_rx.insert(key, beacon);
            }
            Err(_) => self.out.packets.spoof_rejected += 1,
        }
    }

    fn on_rfid(&mut self, b: usize, v: usize, now: SimTime) {
        let id = match &self.vehicles[v].ev {
            Some(ev) if ev.registered => ev.id,
            _ => return,
        };
        self.advance_bump(b, now);
        self.out.packets.rfid_detections += 1;
        let bump = &self.bumps[b];
        let next = bump.state.on_rfid_detect(&bump.cfg, id, now.as_secs());
        self.commit(b, next, now);
    }

    fn on_speed_reading(&mut self, b: usize, v: usize, now: SimTime) {
        self.advance_bump(b, now);
        let vehicle = &mut self.vehicles[v];
        let bump = &mut self.bumps[b];
        let reading = SpeedReading {
            vehicle_ref: vehicle.spec.id,
            speed_mps: vehicle.spec.approach_speed(bump.cfg.speed_limit_mps),
            at_time: now.as_secs(),
        };
        bump.tracked += 1;
        vehicle.tracked_at = Some(b);
        let next = bump.state.on_speed_reading(&bump.cfg, &reading);
        self.commit(b, next, now);
    }

    fn on_zone_entry(&mut self, b: usize, v: usize, now: SimTime) {
        if self.bumps[b].kind == BumpType::SsBump {
            self.advance_bump(b, now);
        }
        let bump = &self.bumps[b];
        let vehicle = &mut self.vehicles[v];
        let cruise = vehicle.spec.cruise_speed_mps;
        let approach = vehicle.spec.approach_speed(bump.cfg.speed_limit_mps);
        let regime = match bump.kind {
            BumpType::Conventional => CrossingRegime::Conventional,
            BumpType::SsBump => crossing_regime(approach, &bump.state, &bump.cfg, now.as_secs()),
        };
        let crossing = regime_speed(regime, approach, &bump.cfg.oobleck);
        let avg = avg_zone_speed(&self.sc.speed_model, regime, cruise, crossing);
        let transit = zone_transit_time(avg, &self.sc.zone).expect("validated speeds are positive");
        vehicle.zone = Some(ZoneVisit {
            entered: now,
            regime,
            avg,
            transit,
            free_flow: free_flow_time(cruise, &self.sc.zone),
        });
        vehicle.seg_speed = avg;
    }

    fn on_bump_crossing(&mut self, b: usize, v: usize, now: SimTime) {
        if self.vehicles[v].tracked_at != Some(b) {
            return;
        }
        self.vehicles[v].tracked_at = None;
        self.bumps[b].tracked -= 1;
        if self.bumps[b].tracked == 0 {
            self.advance_bump(b, now);
            let bump = &self.bumps[b];
            let next = bump.state.vehicle_crossed(&bump.cfg);
            self.commit(b, next, now);
        }
    }

    fn on_zone_exit(&mut self, b: usize, v: usize) {
        let vehicle = &mut self.vehicles[v];
        let visit = vehicle.zone.take().expect("exit without entry");
        vehicle.seg_speed = vehicle.spec.cruise_speed_mps;
        let bump = &self.bumps[b];
        self.out.records.push(DelayRecord {
            vehicle_id: vehicle.spec.id,
            vehicle_kind: vehicle.spec.kind,
            bump_id: bump.cfg.bump_id,
            bump_type: bump.kind,
            control: self.control,
            regime: visit.regime,
            entered_at_s: visit.entered.as_secs(),
            cruise_speed_mps: vehicle.spec.cruise_speed_mps,
            avg_zone_speed_mps: visit.avg,
            transit_time_s: visit.transit,
            free_flow_time_s: visit.free_flow,
            net_delay_s: visit.transit - visit.free_flow,
        });
    }
}
