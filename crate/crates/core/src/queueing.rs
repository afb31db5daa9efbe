//! Physical queue, packet ledger and the AoI process.
//!
//! Arrivals are a deterministic mass flow of `A` packets per slot. Integer
//! packet `i` arrives at `(i / A) tau` and departs at the end of the first
//! slot after which the cumulative served mass reaches `i + 1`. The queue
//! length itself follows the fluid recursion `Q' = max(Q - R, 0) + A`, so
//! both views agree at every slot boundary.

use std::ops::Range;

use serde::Serialize;

/// Served-mass slack absorbing accumulated rounding when stamping departures.
const STAMP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PacketLedger {
    arrivals_per_slot: f64,
    slot: f64,
    cursor: u64,
    newest: Option<u64>,
    departures: Option<Vec<f64>>,
}

impl PacketLedger {
    pub fn new(arrivals_per_slot: f64, slot: f64) -> PacketLedger {
        PacketLedger {
            arrivals_per_slot,
            slot,
            cursor: 0,
            newest: None,
            departures: None,
        }
    }

    /// Keeps every departure instant (tests and debugging only).
    pub fn recording(mut self) -> PacketLedger {
        self.departures = Some(Vec::new());
        self
    }

    pub fn arrival_instant(&self, i: u64) -> f64 {
        i as f64 / self.arrivals_per_slot * self.slot
    }

    /// Index of the next packet still waiting to depart.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn newest_departed(&self) -> Option<u64> {
        self.newest
    }

    pub fn departures(&self) -> Option<&[f64]> {
        self.departures.as_deref()
    }

    /// Stamps departure instant `at` on every packet `i` with `i + 1 <= served`.
    pub fn stamp_through(&mut self, served: f64, at: f64) -> Range<u64> {
        let start = self.cursor;
        while (self.cursor + 1) as f64 <= served + STAMP_EPS {
            if let Some(d) = &mut self.departures {
                d.push(at);
            }
            self.newest = Some(self.cursor);
            self.cursor += 1;
        }
        start..self.cursor
    }

    pub fn has_departed(&self, i: u64) -> bool {
        i < self.cursor
    }
}

/// Queue state of one transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct TxState {
    pub queue: f64,
    pub served: f64,
    /// Index of the slot about to be served.
    pub slot_index: u64,
    arrivals_per_slot: f64,
    pub ledger: PacketLedger,
}

impl TxState {
    pub fn new(arrivals_per_slot: f64, slot: f64) -> TxState {
        TxState {
            queue: 0.0,
            served: 0.0,
            slot_index: 0,
            arrivals_per_slot,
            ledger: PacketLedger::new(arrivals_per_slot, slot),
        }
    }

    pub fn arrived(&self) -> f64 {
        self.slot_index as f64 * self.arrivals_per_slot
    }

    /// Instant at the end of the current slot, `tau (t + 1)`.
    pub fn slot_end(&self) -> f64 {
        (self.slot_index + 1) as f64 * self.ledger.slot
    }
}

/// Outcome of serving one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeOutcome {
    pub served: f64,
    pub departed: Range<u64>,
}

/// Serves one slot at rate `rate` and admits the slot's arrivals.
pub fn advance_queue(q: &mut TxState, rate: f64) -> ServeOutcome {
    debug_assert!(rate >= 0.0);
    let served = q.queue.min(rate);
    q.queue = (q.queue - rate).max(0.0) + q.arrivals_per_slot;
    q.served += served;
    let at = q.slot_end();
    let departed = q.ledger.stamp_through(q.served, at);
    q.slot_index += 1;
    ServeOutcome { served, departed }
}

/// Conditional excess `X = Q - R + psi` when `Q > R - psi`, otherwise `None`.
pub fn excess_event(queue: f64, rate: f64, psi: f64) -> Option<f64> {
    if queue > rate - psi {
        Some(queue - rate + psi)
    } else {
        None
    }
}

/// AoI at instant `at`: time since the arrival of the newest departed packet.
/// `None` before the first departure.
pub fn aoi_sample(ledger: &PacketLedger, at: f64) -> Option<f64> {
    ledger.newest_departed().map(|i| at - ledger.arrival_instant(i))
}

/// Relative slack when comparing an AoI sample with the age limit. With
/// periodic arrivals an AoI sample can equal the limit exactly, and the
/// floating-point difference `T - T^A(i)` may land on either side of it.
pub const AGE_TIE_TOLERANCE: f64 = 1e-9;

/// Whether `aoi` exceeds `age_limit`, ties within [`AGE_TIE_TOLERANCE`] excluded.
pub fn aoi_violation(aoi: f64, age_limit: f64) -> bool {
    aoi > age_limit * (1.0 + AGE_TIE_TOLERANCE)
}

/// Index of the first packet arriving at or after `at - age_limit`:
/// `ceil((A / tau) (at - d))`.
pub fn ihat(at: f64, age_limit: f64, arrivals_per_slot: f64, slot: f64) -> i64 {
    let x = arrivals_per_slot / slot * (at - age_limit);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as i64
    } else {
        x.ceil() as i64
    }
}

/// Whether packet `ihat(at)` is still undelivered at `at`.
pub fn ihat_pending(ledger: &PacketLedger, at: f64, age_limit: f64) -> bool {
    let i = ihat(at, age_limit, ledger.arrivals_per_slot, ledger.slot);
    i >= 0 && !ledger.has_departed(i as u64)
}

/// Running tally of the two sides of the AoI-to-queue bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AgeBoundTally {
    /// Slots with a defined AoI sample.
    pub samples: u64,
    /// AoI above the age limit.
    pub aoi_violations: u64,
    /// Packet `ihat` still pending at the slot boundary.
    pub ihat_pending: u64,
    /// Queue events `Q > R - psi`.
    pub queue_events: u64,
}

/// Below this many queue events a tally is flagged low-confidence.
pub const MIN_CONDITIONING_EVENTS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeBoundCheck {
    pub lhs: f64,
    pub lhs_ihat: f64,
    pub rhs: f64,
    /// Three binomial standard errors of `rhs`.
    pub slack: f64,
    pub holds: bool,
    pub low_confidence: bool,
}

impl AgeBoundTally {
    pub fn record(&mut self, aoi_violation: bool, ihat_pending: bool, queue_event: bool) {
        self.samples += 1;
        self.aoi_violations += aoi_violation as u64;
        self.ihat_pending += ihat_pending as u64;
        self.queue_events += queue_event as u64;
    }

    pub fn merge(&mut self, other: &AgeBoundTally) {
        self.samples += other.samples;
        self.aoi_violations += other.aoi_violations;
        self.ihat_pending += other.ihat_pending;
        self.queue_events += other.queue_events;
    }

    pub fn check(&self) -> AgeBoundCheck {
        let n = self.samples.max(1) as f64;
        let lhs = self.aoi_violations as f64 / n;
        let lhs_ihat = self.ihat_pending as f64 / n;
        let rhs = self.queue_events as f64 / n;
        let slack = 3.0 * (rhs * (1.0 - rhs) / n).sqrt();
        AgeBoundCheck {
            lhs,
            lhs_ihat,
            rhs,
            slack,
            holds: lhs <= rhs + slack,
            low_confidence: self.queue_events < MIN_CONDITIONING_EVENTS,
        }
    }
}
