//! Shared vocabulary: latches, values, events, traces, and transparency.
//!
//! Everything here is immutable after construction and freely shareable
//! across threads. Latches are referred to by dense [`LatchId`] indices
//! into a circuit's latch table; names live on the circuit itself.

use std::fmt;

use serde::ser::{Serialize, Serializer};

/// Master/slave parity of a latch. Neighboring latches alternate parity,
/// and odd latches update first in each synchronous cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

/// Dense index of a latch within its circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatchId(pub(crate) u32);

impl LatchId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A latch datum: a natural number or the undefined value `X`.
///
/// Equality is structural; `Num(n)` never equals `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Num(u64),
    X,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{n}"),
            Value::X => write!(f, "X"),
        }
    }
}

// JSON reports encode defined values as numbers and X as the string "X".
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Num(n) => serializer.serialize_u64(*n),
            Value::X => serializer.serialize_str("X"),
        }
    }
}

/// A rise (`l+`) or fall (`l-`) of one latch's local clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Rise(LatchId),
    Fall(LatchId),
}

impl Event {
    pub fn latch(self) -> LatchId {
        match self {
            Event::Rise(l) | Event::Fall(l) => l,
        }
    }

    pub fn is_rise(self) -> bool {
        matches!(self, Event::Rise(_))
    }

    pub fn is_fall(self) -> bool {
        matches!(self, Event::Fall(_))
    }

    /// Dense slot for per-event counters: two slots per latch.
    pub(crate) fn slot(self) -> usize {
        self.latch().index() * 2 + self.is_fall() as usize
    }
}

/// A finite sequence of events, oldest first. `push` appends at the end,
/// matching the way traces grow one event at a time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Trace {
    events: Vec<Event>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.events.pop()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn last(&self) -> Option<Event> {
        self.events.last().copied()
    }

    /// The prefix containing the first `len` events.
    pub fn prefix(&self, len: usize) -> Trace {
        Trace { events: self.events[..len].to_vec() }
    }
}

impl From<Vec<Event>> for Trace {
    fn from(events: Vec<Event>) -> Self {
        Trace { events }
    }
}

impl FromIterator<Event> for Trace {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        Trace { events: iter.into_iter().collect() }
    }
}

/// Whether a latch currently passes its input combinationally
/// (transparent) or holds its last latched value (opaque).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transparency {
    Transparent,
    Opaque,
}

/// Transparency of latch `l` (with the given parity) after trace `t`.
///
/// The last event of `l` in `t` decides: a rise leaves it transparent, a
/// fall opaque. With no event of `l`, odd latches are transparent and
/// even latches opaque.
pub fn transparency(t: &Trace, l: LatchId, parity: Parity) -> Transparency {
    for e in t.events().iter().rev() {
        if e.latch() == l {
            return if e.is_rise() {
                Transparency::Transparent
            } else {
                Transparency::Opaque
            };
        }
    }
    match parity {
        Parity::Odd => Transparency::Transparent,
        Parity::Even => Transparency::Opaque,
    }
}

/// Number of occurrences of `e` in `t`.
pub fn num_events(e: Event, t: &Trace) -> usize {
    t.events().iter().filter(|&&x| x == e).count()
}

/// A total assignment of values to a fixed circuit's latches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatchState {
    values: Vec<Value>,
}

impl LatchState {
    pub fn new(values: Vec<Value>) -> Self {
        LatchState { values }
    }

    pub fn all_x(n: usize) -> Self {
        LatchState { values: vec![Value::X; n] }
    }

    pub fn get(&self, l: LatchId) -> Value {
        self.values[l.index()]
    }

    pub fn set(&mut self, l: LatchId, v: Value) {
        self.values[l.index()] = v;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }
}
