//! Asynchronous execution of clock traces.
//!
//! Two implementations of the same semantics live here and are
//! cross-checked against each other in the test suite:
//!
//! * [`async_eval`] — a direct recursive evaluator over a whole trace.
//!   The value of a latch after a trace is decided by four cases: a
//!   transparent latch shows its next-state function applied to its
//!   left neighbors at the same trace; an opaque even latch at the
//!   empty trace holds its initial value; an opaque latch is untouched
//!   by events other than its own fall; and a trace ending in the
//!   latch's fall latches the next-state function over the left
//!   neighbors at the prefix.
//! * [`AsyncState`] — an event-stepped evaluator that folds a trace one
//!   event at a time, storing latched values as falls happen. This is
//!   the fast path used by the exhaustive checkers.
//!
//! Under the zero-delay model a chain of transparent latches evaluates
//! combinationally in one instant. If that chain closes into a cycle
//! there is no defined value; both evaluators report
//! [`EvalError::CyclicTransparency`] instead of diverging.

use std::collections::HashMap;

use thiserror::Error;

use crate::circuit::Circuit;
use crate::model::{Event, LatchId, LatchState, Parity, Trace, Transparency, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    /// A ring of latches was simultaneously transparent; the listed
    /// latches form the combinational cycle.
    #[error("combinational cycle through {} simultaneously transparent latches", .0.len())]
    CyclicTransparency(Vec<LatchId>),
    /// Defensive case: an odd latch opaque at the empty trace has no
    /// base value. Unreachable for the transparency function shipped
    /// here (odd latches start transparent).
    #[error("no base value for latch index {}", .0.index())]
    UndefinedBase(LatchId),
}

impl EvalError {
    pub fn describe(&self, c: &Circuit) -> String {
        match self {
            EvalError::CyclicTransparency(cycle) => {
                let names: Vec<&str> = cycle.iter().map(|&l| c.name(l)).collect();
                format!("combinational cycle through transparent latches: {}", names.join(" -> "))
            }
            EvalError::UndefinedBase(l) => {
                format!("no base value for {}", c.describe_latch(*l))
            }
        }
    }
}

enum Slot {
    InProgress,
    Done(Result<Value, EvalError>),
}

struct DirectEval<'a> {
    circuit: &'a Circuit,
    st0: &'a LatchState,
    trace: &'a Trace,
    memo: HashMap<(usize, LatchId), Slot>,
    visiting: Vec<LatchId>,
}

impl DirectEval<'_> {
    fn eval(&mut self, len: usize, l: LatchId) -> Result<Value, EvalError> {
        match self.memo.get(&(len, l)) {
            Some(Slot::Done(r)) => return r.clone(),
            Some(Slot::InProgress) => {
                // A transparent latch needed its own value at the same
                // prefix: no finite derivation exists.
                let start = self.visiting.iter().position(|&v| v == l).unwrap_or(0);
                let cycle = self.visiting[start..].to_vec();
                return Err(EvalError::CyclicTransparency(cycle));
            }
            None => {}
        }
        self.memo.insert((len, l), Slot::InProgress);
        self.visiting.push(l);
        let result = self.eval_uncached(len, l);
        self.visiting.pop();
        self.memo.insert((len, l), Slot::Done(result.clone()));
        result
    }

    fn eval_uncached(&mut self, len: usize, l: LatchId) -> Result<Value, EvalError> {
        let c = self.circuit;
        let prefix = self.trace.prefix(len);
        if c.transparency(&prefix, l) == Transparency::Transparent {
            return c.next_state(l).try_eval(&mut |lp| self.eval(len, lp));
        }
        if len == 0 {
            return match c.parity(l) {
                Parity::Even => Ok(self.st0.get(l)),
                // odd latches are transparent at the empty trace, so
                // this arm cannot be reached through the public API
                Parity::Odd => Err(EvalError::UndefinedBase(l)),
            };
        }
        let last = self.trace.events()[len - 1];
        if last == Event::Fall(l) {
            return c.next_state(l).try_eval(&mut |lp| self.eval(len - 1, lp));
        }
        self.eval(len - 1, l)
    }
}

/// Value of latch `l` after executing `t` from `st0`, by the direct
/// recursion. This is the reference evaluator; it does not require `t`
/// to be admitted by any protocol.
pub fn async_eval(
    circuit: &Circuit,
    st0: &LatchState,
    t: &Trace,
    l: LatchId,
) -> Result<Value, EvalError> {
    DirectEval { circuit, st0, trace: t, memo: HashMap::new(), visiting: Vec::new() }
        .eval(t.len(), l)
}

/// Incremental trace evaluator.
///
/// Maintains, after the events consumed so far: the latched value of
/// every opaque latch (`stored`), each latch's transparency (`phase`),
/// and per-event occurrence counters (`history`). `stored` for an even
/// latch that has never fallen is its initial value; for a transparent
/// latch it is stale and must not be read directly.
#[derive(Debug, Clone)]
pub struct AsyncState<'c> {
    circuit: &'c Circuit,
    stored: Vec<Value>,
    phase: Vec<Transparency>,
    history: Vec<u32>,
}

impl<'c> AsyncState<'c> {
    pub fn new(circuit: &'c Circuit, st0: &LatchState) -> Self {
        let phase = circuit
            .latches()
            .map(|l| match circuit.parity(l) {
                Parity::Even => Transparency::Opaque,
                Parity::Odd => Transparency::Transparent,
            })
            .collect();
        AsyncState {
            circuit,
            stored: st0.values().to_vec(),
            phase,
            history: vec![0; circuit.latch_count() * 2],
        }
    }

    pub fn circuit(&self) -> &'c Circuit {
        self.circuit
    }

    /// Consume one event. A rise only flips transparency; a fall
    /// latches the next-state function over the current left-neighbor
    /// values (which are exactly their values at the trace before this
    /// fall, since the fall itself touches no other latch).
    pub fn step(&mut self, e: Event) -> Result<(), EvalError> {
        match e {
            Event::Rise(l) => {
                self.phase[l.index()] = Transparency::Transparent;
            }
            Event::Fall(l) => {
                let mut visiting = Vec::new();
                let v = self.eval_combinational(l, &mut visiting)?;
                self.stored[l.index()] = v;
                self.phase[l.index()] = Transparency::Opaque;
            }
        }
        self.history[e.slot()] += 1;
        Ok(())
    }

    /// Fold a whole trace; the state is left at the first failing event
    /// if an error occurs.
    pub fn run(&mut self, t: &Trace) -> Result<(), EvalError> {
        for &e in t.events() {
            self.step(e)?;
        }
        Ok(())
    }

    /// Current value of a latch: the stored value if opaque, otherwise
    /// the combinational value seen through its transparent inputs.
    pub fn current_value(&self, l: LatchId) -> Result<Value, EvalError> {
        match self.phase[l.index()] {
            Transparency::Opaque => Ok(self.stored[l.index()]),
            Transparency::Transparent => {
                let mut visiting = Vec::new();
                self.eval_transparent(l, &mut visiting)
            }
        }
    }

    /// Next-state value of `l` over current left-neighbor values,
    /// regardless of `l`'s own phase. Used when `l` falls.
    fn eval_combinational(
        &self,
        l: LatchId,
        visiting: &mut Vec<LatchId>,
    ) -> Result<Value, EvalError> {
        visiting.push(l);
        let r = self.circuit.next_state(l).try_eval(&mut |lp| match self.phase[lp.index()] {
            Transparency::Opaque => Ok(self.stored[lp.index()]),
            Transparency::Transparent => self.eval_transparent(lp, visiting),
        });
        visiting.pop();
        r
    }

    fn eval_transparent(&self, l: LatchId, visiting: &mut Vec<LatchId>) -> Result<Value, EvalError> {
        if let Some(start) = visiting.iter().position(|&v| v == l) {
            return Err(EvalError::CyclicTransparency(visiting[start..].to_vec()));
        }
        self.eval_combinational(l, visiting)
    }

    pub fn phase(&self, l: LatchId) -> Transparency {
        self.phase[l.index()]
    }

    pub fn is_opaque(&self, l: LatchId) -> bool {
        self.phase[l.index()] == Transparency::Opaque
    }

    /// The stored (last latched) value; meaningful only when opaque.
    pub fn stored(&self, l: LatchId) -> Value {
        self.stored[l.index()]
    }

    pub fn num_events(&self, e: Event) -> u32 {
        self.history[e.slot()]
    }

    pub fn num_falls(&self, l: LatchId) -> u32 {
        self.history[Event::Fall(l).slot()]
    }

    pub fn num_rises(&self, l: LatchId) -> u32 {
        self.history[Event::Rise(l).slot()]
    }
}
