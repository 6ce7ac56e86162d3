use alloc::collections::BinaryHeap;
use core::cmp::{Ordering, Reverse};
use core::fmt;

use libm::round;

use crate::protocol::{BEACON_FRAME_LEN, TELEMETRY_FRAME_LEN};

/// Simulation clock in whole microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        Self(us)
    }

    /// Rounds to the nearest microsecond; negative input saturates at zero.
    pub fn from_secs(s: f64) -> Self {
        Self(round(s * 1e6).max(0.0) as u64)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn after_secs(self, dt: f64) -> Self {
        self + SimTime::from_secs(dt)
    }
}

impl core::ops::Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    EvDispatch {
        vehicle: usize,
    },
    BeaconTx {
        vehicle: usize,
    },
    BeaconRx {
        bump: usize,
        frame: [u8; BEACON_FRAME_LEN],
    },
    SpeedReading {
        bump: usize,
        vehicle: usize,
    },
    RfidDetect {
        bump: usize,
        vehicle: usize,
    },
    VehicleEntersZone {
        bump: usize,
        vehicle: usize,
    },
    VehicleCrossesBump {
        bump: usize,
        vehicle: usize,
    },
    VehicleExitsZone {
        bump: usize,
        vehicle: usize,
    },
    ActuationTick {
        bump: usize,
    },
    TelemetryUplink {
        bump: usize,
        frame: [u8; TELEMETRY_FRAME_LEN],
    },
    SimEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: SimTime,
    /// Insertion order; breaks ties between simultaneous events.
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue of events keyed by `(time, seq)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// # Panics
    ///
    /// If `time` is earlier than the event currently being processed. That
    /// is an engine bug, never a user error.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) {
        assert!(
            time >= self.now,
            "causality violation: {kind:?} scheduled at {time}, clock is at {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(ev) = self.heap.pop()?;
        self.now = ev.time;
        Some(ev)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
