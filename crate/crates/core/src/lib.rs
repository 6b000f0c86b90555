//! Flow-equivalence verification for desynchronized latch-based
//! circuits.
//!
//! A synchronous latch-based design can be desynchronized by driving
//! each latch from a local handshake controller instead of the global
//! clock. The controllers constrain the possible orders of clock rises
//! and falls; those constraints form a marked graph over the events of
//! the circuit. This crate models the circuit semantics (synchronous
//! and asynchronous), builds the desynchronization, rise-decoupled, and
//! fall-decoupled protocol graphs, and decides — exhaustively, up to a
//! trace-length bound — whether a protocol preserves flow equivalence:
//! that every latch latches exactly the sequence of values it would
//! have latched under the global clock.
//!
//! The desynchronization protocol famously does not; `circuits/cex.json`
//! plus the trace in `circuits/tc.trace` reproduce a nine-event run in
//! which latch `C` latches its first synchronous value twice. The
//! rise- and fall-decoupled protocols pass every bounded check, and the
//! exact refinement checker shows both are conservative restrictions of
//! the desynchronization protocol.

pub mod async_exec;
pub mod circuit;
pub mod dsl;
pub mod flow;
pub mod marked_graph;
pub mod model;
pub mod protocols;
pub mod sync;
pub mod waveform;

pub use async_exec::{async_eval, AsyncState, EvalError};
pub use circuit::{Circuit, Expr};
pub use dsl::{load_circuit, parse_expr, parse_trace, Loaded};
pub use flow::{
    check_flow_equivalence, check_refinement, transfer_flow_equivalence, CheckOptions,
    FlowVerdict, RefinementResult, TransferOutcome, ViolationReport,
};
pub use marked_graph::{Admission, Marking, MarkedGraph, Place, PlaceKind};
pub use model::{Event, LatchId, LatchState, Parity, Trace, Transparency, Value};
pub use protocols::{build_protocol, ProtocolKind};
pub use sync::{sync_eval, sync_table, SyncEvaluator};
pub use waveform::render_waveform;
