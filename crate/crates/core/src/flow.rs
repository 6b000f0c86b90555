//! Top-level verdicts: bounded flow-equivalence checking,
//! counterexample search, and exact trace-language refinement between
//! protocols.
//!
//! Flow equivalence demands that for every protocol-admitted trace and
//! every latch opaque after it, the asynchronously latched value equals
//! the synchronous value at cycle `num_events(l-, trace)`. The checker
//! walks every admitted trace up to a depth bound, carrying an
//! incremental [`AsyncState`]; since a rise changes no stored value and
//! a fall changes only the falling latch, it suffices to compare the
//! falling latch at each step.

use std::collections::{HashMap, VecDeque};

use serde_json::json;
use thiserror::Error;

use crate::async_exec::{AsyncState, EvalError};
use crate::circuit::Circuit;
use crate::marked_graph::{Marking, MarkedGraph, SafetyViolation};
use crate::model::{Event, LatchId, LatchState, Trace, Value};
use crate::protocols::{build_protocol, ProtocolKind};
use crate::sync::SyncEvaluator;

/// A witnessed flow-equivalence failure: after `trace`, the opaque
/// latch holds `got` while the synchronous execution at cycle
/// `fall_count` expects `expected`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationReport {
    pub trace: Trace,
    pub latch: LatchId,
    pub got: Value,
    pub expected: Value,
    pub fall_count: u32,
}

/// A trace drove a ring of latches simultaneously transparent, so the
/// event marked here has no defined latched value. Reported as its own
/// finding category: it is neither a pass nor a value mismatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicFinding {
    pub trace: Trace,
    pub event: Event,
    pub cycle: Vec<LatchId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowVerdict {
    /// Every admitted trace up to the bound satisfies flow equivalence.
    Pass { depth: usize, traces_checked: u64 },
    Violation(ViolationReport),
    Cyclic(CyclicFinding),
}

impl FlowVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, FlowVerdict::Pass { .. })
    }

    pub fn to_json(&self, c: &Circuit) -> serde_json::Value {
        match self {
            FlowVerdict::Pass { depth, traces_checked } => json!({
                "verdict": "pass",
                "depth": depth,
                "traces_checked": traces_checked,
            }),
            FlowVerdict::Violation(v) => json!({
                "verdict": "violation",
                "trace": trace_tokens(c, &v.trace),
                "latch": c.name(v.latch),
                "got": v.got,
                "expected": v.expected,
                "fall_count": v.fall_count,
            }),
            FlowVerdict::Cyclic(f) => json!({
                "verdict": "cyclic-transparency",
                "trace": trace_tokens(c, &f.trace),
                "event": c.format_event(f.event),
                "cycle": f.cycle.iter().map(|&l| c.name(l)).collect::<Vec<_>>(),
            }),
        }
    }
}

pub fn trace_tokens(c: &Circuit, t: &Trace) -> Vec<String> {
    t.events().iter().map(|&e| c.format_event(e)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// Maximum trace length explored.
    pub depth: usize,
    /// Breadth-first search: the reported violation is a shortest one.
    pub shortest: bool,
    /// Worker threads for the depth-first search; 0 or 1 is sequential.
    pub threads: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { depth: 12, shortest: false, threads: 0 }
    }
}

/// Bounded flow-equivalence check of one protocol on one circuit.
///
/// Explores every admitted trace of length at most `opts.depth` and
/// returns the first finding in exploration order (depth-first by
/// transition declaration order, or breadth-first with `shortest`).
/// Exploration is prefix-closed, so a pass at depth `d` implies a pass
/// at every smaller depth.
pub fn check_flow_equivalence(
    c: &Circuit,
    st0: &LatchState,
    kind: ProtocolKind,
    opts: CheckOptions,
) -> FlowVerdict {
    check_flow_equivalence_on(c, st0, &build_protocol(kind, c), opts)
}

/// [`check_flow_equivalence`] against a caller-supplied marked graph
/// over the circuit's events; used directly by mutation tests.
pub fn check_flow_equivalence_on(
    c: &Circuit,
    st0: &LatchState,
    graph: &MarkedGraph,
    opts: CheckOptions,
) -> FlowVerdict {
    let sync = SyncEvaluator::new(c, st0);
    // every fall count along a depth-d trace is at most d
    let sync_rows = sync.table(opts.depth);

    if opts.depth == 0 {
        // only the empty trace: even latches hold st0, which is the
        // synchronous value at cycle 0 by definition
        return FlowVerdict::Pass { depth: 0, traces_checked: 1 };
    }
    if opts.shortest {
        return check_bfs(c, st0, graph, &sync_rows, opts.depth);
    }
    if opts.threads > 1 {
        return check_parallel(c, st0, graph, &sync_rows, opts.depth, opts.threads);
    }
    let mut traces_checked = 0u64;
    let root = AsyncState::new(c, st0);
    match dfs(graph, &sync_rows, graph.init_marking().clone(), root, &mut Trace::new(), opts.depth, &mut traces_checked) {
        Some(finding) => finding,
        None => FlowVerdict::Pass { depth: opts.depth, traces_checked },
    }
}

/// Compare the latch that just fell against the synchronous table.
fn check_fall(
    sync_rows: &[Vec<Value>],
    state: &AsyncState<'_>,
    trace: &Trace,
    l: LatchId,
) -> Option<ViolationReport> {
    let fall_count = state.num_falls(l);
    let got = state.stored(l);
    let expected = sync_rows[fall_count as usize][l.index()];
    if got != expected {
        Some(ViolationReport { trace: trace.clone(), latch: l, got, expected, fall_count })
    } else {
        None
    }
}

fn dfs(
    graph: &MarkedGraph,
    sync_rows: &[Vec<Value>],
    marking: Marking,
    state: AsyncState<'_>,
    trace: &mut Trace,
    depth_left: usize,
    traces_checked: &mut u64,
) -> Option<FlowVerdict> {
    *traces_checked += 1;
    if depth_left == 0 {
        return None;
    }
    for &event in graph.transitions() {
        if !graph.is_enabled(&marking, event).unwrap() {
            continue;
        }
        let next_marking = graph.fire(&marking, event).unwrap();
        let mut next_state = state.clone();
        trace.push(event);
        match next_state.step(event) {
            Err(EvalError::CyclicTransparency(cycle)) => {
                let mut prefix = trace.clone();
                prefix.pop();
                return Some(FlowVerdict::Cyclic(CyclicFinding { trace: prefix, event, cycle }));
            }
            Err(EvalError::UndefinedBase(_)) => unreachable!("validated circuits have base values"),
            Ok(()) => {}
        }
        if let Event::Fall(l) = event {
            if let Some(v) = check_fall(sync_rows, &next_state, trace, l) {
                return Some(FlowVerdict::Violation(v));
            }
        }
        if let Some(found) =
            dfs(graph, sync_rows, next_marking, next_state, trace, depth_left - 1, traces_checked)
        {
            return Some(found);
        }
        trace.pop();
    }
    None
}

fn check_bfs(
    c: &Circuit,
    st0: &LatchState,
    graph: &MarkedGraph,
    sync_rows: &[Vec<Value>],
    depth: usize,
) -> FlowVerdict {
    let mut traces_checked = 1u64;
    let mut queue: VecDeque<(Marking, AsyncState<'_>, Trace)> = VecDeque::new();
    queue.push_back((graph.init_marking().clone(), AsyncState::new(c, st0), Trace::new()));
    while let Some((marking, state, trace)) = queue.pop_front() {
        if trace.len() == depth {
            continue;
        }
        for &event in graph.transitions() {
            if !graph.is_enabled(&marking, event).unwrap() {
                continue;
            }
            let next_marking = graph.fire(&marking, event).unwrap();
            let mut next_state = state.clone();
            let mut next_trace = trace.clone();
            next_trace.push(event);
            match next_state.step(event) {
                Err(EvalError::CyclicTransparency(cycle)) => {
                    return FlowVerdict::Cyclic(CyclicFinding { trace, event, cycle });
                }
                Err(EvalError::UndefinedBase(_)) => unreachable!(),
                Ok(()) => {}
            }
            traces_checked += 1;
            if let Event::Fall(l) = event {
                if let Some(v) = check_fall(sync_rows, &next_state, &next_trace, l) {
                    return FlowVerdict::Violation(v);
                }
            }
            queue.push_back((next_marking, next_state, next_trace));
        }
    }
    FlowVerdict::Pass { depth, traces_checked }
}

/// Branch-parallel DFS: the first-level subtrees are distributed over
/// `threads` workers and findings are merged in branch order, so the
/// result matches the sequential search exactly.
fn check_parallel(
    c: &Circuit,
    st0: &LatchState,
    graph: &MarkedGraph,
    sync_rows: &[Vec<Value>],
    depth: usize,
    threads: usize,
) -> FlowVerdict {
    let init = graph.init_marking();
    let branches: Vec<Event> = graph.enabled_events(init);
    let chunk_size = branches.len().div_ceil(threads).max(1);
    let results: Vec<(Option<FlowVerdict>, u64)> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in branches.chunks(chunk_size) {
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                for &event in chunk {
                    let marking = graph.fire(init, event).unwrap();
                    let mut state = AsyncState::new(c, st0);
                    let mut trace = Trace::new();
                    trace.push(event);
                    let mut count = 0u64;
                    let finding = match state.step(event) {
                        Err(EvalError::CyclicTransparency(cycle)) => {
                            Some(FlowVerdict::Cyclic(CyclicFinding {
                                trace: Trace::new(),
                                event,
                                cycle,
                            }))
                        }
                        Err(EvalError::UndefinedBase(_)) => unreachable!(),
                        Ok(()) => {
                            let fall_violation = match event {
                                Event::Fall(l) => check_fall(sync_rows, &state, &trace, l)
                                    .map(FlowVerdict::Violation),
                                Event::Rise(_) => None,
                            };
                            fall_violation.or_else(|| {
                                dfs(graph, sync_rows, marking, state, &mut trace, depth - 1, &mut count)
                            })
                        }
                    };
                    out.push((finding, count));
                }
                out
            }));
        }
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    // merge in branch order so the result matches the sequential DFS
    let mut traces_checked = 1u64;
    for (finding, count) in results {
        traces_checked += count;
        if let Some(finding) = finding {
            return finding;
        }
    }
    FlowVerdict::Pass { depth, traces_checked }
}

/// Outcome of the exact trace-language inclusion check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefinementResult {
    /// Every trace admitted by the left graph is admitted by the right.
    Included,
    /// `trace` is admitted by both graphs, and `event` extends it on
    /// the left but is disabled on the right.
    Witness { trace: Trace, event: Event },
}

impl RefinementResult {
    pub fn to_json(&self, c: &Circuit) -> serde_json::Value {
        match self {
            RefinementResult::Included => json!({"refinement": "included"}),
            RefinementResult::Witness { trace, event } => json!({
                "refinement": "witness",
                "trace": trace_tokens(c, trace),
                "event": c.format_event(*event),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefinementError {
    #[error("marked graphs have different transition sets")]
    TransitionMismatch,
    #[error("left graph is not 1-safe: {0}")]
    LeftUnsafe(SafetyViolation),
    #[error("right graph is not 1-safe: {0}")]
    RightUnsafe(SafetyViolation),
}

/// Exact refinement check: does every `left`-admitted trace replay on
/// `right`?
///
/// Explores the product of joint markings reachable along left-admitted
/// traces, breadth-first, so a returned witness is a shortest one.
/// 1-safety of both graphs (verified up front) bounds the product space
/// and guarantees termination.
pub fn check_refinement(
    left: &MarkedGraph,
    right: &MarkedGraph,
) -> Result<RefinementResult, RefinementError> {
    if left.transitions() != right.transitions() {
        return Err(RefinementError::TransitionMismatch);
    }
    left.reachable_markings().map_err(RefinementError::LeftUnsafe)?;
    right.reachable_markings().map_err(RefinementError::RightUnsafe)?;

    let start = (left.init_marking().clone(), right.init_marking().clone());
    let mut seen: HashMap<(Marking, Marking), usize> = HashMap::new();
    let mut order: Vec<(Marking, Marking)> = Vec::new();
    let mut parents: Vec<Option<(usize, Event)>> = Vec::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone(), 0);
    order.push(start);
    parents.push(None);
    queue.push_back(0usize);

    while let Some(cur) = queue.pop_front() {
        for &event in left.transitions() {
            let (ml, mr) = &order[cur];
            if !left.is_enabled(ml, event).unwrap() {
                continue;
            }
            if !right.is_enabled(mr, event).unwrap() {
                let mut events = Vec::new();
                let mut at = cur;
                while let Some((prev, e)) = parents[at] {
                    events.push(e);
                    at = prev;
                }
                events.reverse();
                return Ok(RefinementResult::Witness { trace: Trace::from(events), event });
            }
            let next = (left.fire(ml, event).unwrap(), right.fire(mr, event).unwrap());
            if !seen.contains_key(&next) {
                let idx = order.len();
                seen.insert(next.clone(), idx);
                order.push(next);
                parents.push(Some((cur, event)));
                queue.push_back(idx);
            }
        }
    }
    Ok(RefinementResult::Included)
}

/// Note produced when a refinement result lets one protocol inherit
/// another's bounded verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransferOutcome {
    /// The left protocol inherits the right's bounded pass: every
    /// left-admitted trace was among the traces already checked.
    Inherited { depth: usize },
    /// The base protocol itself has a concrete violation; nothing to
    /// transfer.
    ViolationAlreadyConcrete,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransferError {
    #[error("refinement produced a witness; no verdict can be transferred")]
    WitnessRefusal,
}

/// Transfer a bounded flow-equivalence verdict across an established
/// refinement: if the left language is included in the right and the
/// right passed at depth `d`, every left-admitted trace up to `d` has
/// already been checked.
pub fn transfer_flow_equivalence(
    refinement: &RefinementResult,
    base: &FlowVerdict,
) -> Result<TransferOutcome, TransferError> {
    match refinement {
        RefinementResult::Witness { .. } => Err(TransferError::WitnessRefusal),
        RefinementResult::Included => match base {
            FlowVerdict::Pass { depth, .. } => Ok(TransferOutcome::Inherited { depth: *depth }),
            _ => Ok(TransferOutcome::ViolationAlreadyConcrete),
        },
    }
}
