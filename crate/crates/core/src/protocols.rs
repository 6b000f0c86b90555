//! The three desynchronization handshake protocols as marked graphs,
//! plus the protocol-specific lemma predicates used as executable
//! oracles.
//!
//! All three protocols share the same skeleton over a circuit's
//! neighbor relation. For every latch `l` there are two self places,
//! `l+ -> l-` and `l- -> l+`, and for every neighbor pair `(l, l')`
//! (data flowing `l` to `l'`) a back-pressure place `l'- -> l+`. They
//! differ only in the forward pair place:
//!
//! * desynchronization:  `l+ -> l'-`
//! * rise-decoupled:     `l- -> l'-`
//! * fall-decoupled:     `l+ -> l'+`
//!
//! Initial markings encode that odd latches start transparent: the
//! `l+ -> l-` place of each odd latch and the `l- -> l+` place of each
//! even latch carry a token. Desynchronization marks every forward
//! place; rise-decoupled marks the even-to-odd forward places;
//! fall-decoupled marks the odd-to-even forward places. The
//! rise-/fall-decoupled choices are pinned down by
//! [`derive_marking`], which recovers them uniquely from first
//! principles.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::circuit::Circuit;
use crate::marked_graph::{Marking, MarkedGraph, PlaceKind};
use crate::model::{num_events, Event, LatchId, Parity, Trace, Transparency};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Desynchronization,
    RiseDecoupled,
    FallDecoupled,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [
        ProtocolKind::Desynchronization,
        ProtocolKind::RiseDecoupled,
        ProtocolKind::FallDecoupled,
    ];

    /// CLI spelling.
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Desynchronization => "desync",
            ProtocolKind::RiseDecoupled => "rise",
            ProtocolKind::FallDecoupled => "fall",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown protocol {0:?} (expected desync, rise, or fall)")]
pub struct UnknownProtocol(pub String);

impl FromStr for ProtocolKind {
    type Err = UnknownProtocol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desync" | "desynchronization" => Ok(ProtocolKind::Desynchronization),
            "rise" | "rise-decoupled" => Ok(ProtocolKind::RiseDecoupled),
            "fall" | "fall-decoupled" => Ok(ProtocolKind::FallDecoupled),
            other => Err(UnknownProtocol(other.to_string())),
        }
    }
}

/// Build the protocol marked graph for a validated circuit.
///
/// Transitions are the rises and falls of every latch. Place order is
/// deterministic: per-latch self places first, then forward/backward
/// places per neighbor pair in file order.
pub fn build_protocol(kind: ProtocolKind, c: &Circuit) -> MarkedGraph {
    let mut transitions = Vec::with_capacity(c.latch_count() * 2);
    for l in c.latches() {
        transitions.push(Event::Rise(l));
        transitions.push(Event::Fall(l));
    }

    let mut places = Vec::new();
    for l in c.latches() {
        let odd = c.is_odd(l);
        places.push((
            Event::Rise(l),
            Event::Fall(l),
            PlaceKind::SelfFall(l),
            odd as u32,
        ));
        places.push((
            Event::Fall(l),
            Event::Rise(l),
            PlaceKind::SelfRise(l),
            !odd as u32,
        ));
    }
    for (left, right) in c.pairs() {
        let forward = match kind {
            ProtocolKind::Desynchronization => (Event::Rise(left), Event::Fall(right), 1),
            ProtocolKind::RiseDecoupled => {
                (Event::Fall(left), Event::Fall(right), c.is_even(left) as u32)
            }
            ProtocolKind::FallDecoupled => {
                (Event::Rise(left), Event::Rise(right), c.is_odd(left) as u32)
            }
        };
        places.push((forward.0, forward.1, PlaceKind::Forward(left, right), forward.2));
        places.push((Event::Fall(right), Event::Rise(left), PlaceKind::Backward(left, right), 0));
    }

    // at most one place between any two events, for every protocol
    let mut endpoints = std::collections::BTreeSet::new();
    for &(src, dst, _, _) in &places {
        assert!(
            endpoints.insert((format!("{src:?}"), format!("{dst:?}"))),
            "duplicate place between two events"
        );
    }

    MarkedGraph::new(transitions, places).expect("places reference own transitions")
}

/// A violation found by one of the protocol lemma suites.
#[derive(Debug, Clone)]
pub enum LemmaViolation {
    /// A marked forward place `l -> l'` while `l` was transparent.
    ForwardTokenWhileTransparent { trace: Trace, latch: LatchId },
    /// Fall-count relation broken for an enabled fall (rise-decoupled).
    FallCounts { trace: Trace, latch: LatchId, left: LatchId, expected: usize, got: usize },
    /// Opaque fall/rise count relation broken (fall-decoupled).
    OpaqueCounts { trace: Trace, latch: LatchId, falls: usize, rises: usize },
    /// Transparent rise-count relation against a left neighbor broken
    /// (fall-decoupled).
    TransparentRiseCounts { trace: Trace, latch: LatchId, left: LatchId, expected: usize, got: usize },
}

impl LemmaViolation {
    pub fn describe(&self, c: &Circuit) -> String {
        match self {
            LemmaViolation::ForwardTokenWhileTransparent { trace, latch } => format!(
                "after [{}]: forward place out of {} carries a token while it is transparent",
                c.format_trace(trace),
                c.name(*latch)
            ),
            LemmaViolation::FallCounts { trace, latch, left, expected, got } => format!(
                "after [{}]: {}- is enabled but {} has fallen {} times (expected {})",
                c.format_trace(trace),
                c.name(*latch),
                c.name(*left),
                got,
                expected
            ),
            LemmaViolation::OpaqueCounts { trace, latch, falls, rises } => format!(
                "after [{}]: opaque {} has {} falls / {} rises",
                c.format_trace(trace),
                c.name(*latch),
                falls,
                rises
            ),
            LemmaViolation::TransparentRiseCounts { trace, latch, left, expected, got } => format!(
                "after [{}]: transparent {} vs left neighbor {}: {} rises (expected {})",
                c.format_trace(trace),
                c.name(*latch),
                c.name(*left),
                got,
                expected
            ),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LemmaReport {
    pub traces_checked: usize,
    pub violations: Vec<LemmaViolation>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const MAX_REPORTED: usize = 16;

/// Exhaustively check the rise-decoupled invariants over every admitted
/// trace up to `depth`:
///
/// (a) a token on a forward place `l- -> l'-` implies `l` is opaque;
/// (b) when `l-` is enabled, every left neighbor `l'` has fallen
///     exactly as often as `l` (odd `l`) or exactly once more (even).
pub fn check_rd_lemmas(c: &Circuit, depth: usize) -> LemmaReport {
    check_rd_lemmas_on(&build_protocol(ProtocolKind::RiseDecoupled, c), c, depth)
}

/// [`check_rd_lemmas`] against a caller-supplied graph, so mutated
/// graphs can be checked too.
pub fn check_rd_lemmas_on(graph: &MarkedGraph, c: &Circuit, depth: usize) -> LemmaReport {
    let mut report = LemmaReport::default();
    for (trace, marking) in graph.enumerate_traces(depth) {
        report.traces_checked += 1;
        if report.violations.len() >= MAX_REPORTED {
            break;
        }
        for place in graph.places() {
            if let PlaceKind::Forward(l, _) = place.kind {
                if marking.tokens(place.id) > 0
                    && c.transparency(&trace, l) != Transparency::Opaque
                {
                    report
                        .violations
                        .push(LemmaViolation::ForwardTokenWhileTransparent { trace: trace.clone(), latch: l });
                }
            }
        }
        for l in c.latches() {
            if !graph.is_enabled(&marking, Event::Fall(l)).unwrap() {
                continue;
            }
            let own_falls = num_events(Event::Fall(l), &trace);
            let expected = own_falls + c.is_even(l) as usize;
            for &left in c.left_neighbors(l) {
                let got = num_events(Event::Fall(left), &trace);
                if got != expected {
                    report.violations.push(LemmaViolation::FallCounts {
                        trace: trace.clone(),
                        latch: l,
                        left,
                        expected,
                        got,
                    });
                }
            }
        }
    }
    report
}

/// Exhaustively check the fall-decoupled count invariants over every
/// admitted trace up to `depth`:
///
/// * opaque `l`: falls = rises + 1 for odd latches, falls = rises for
///   even latches;
/// * transparent `l`: against every left neighbor `l'`, rises of `l`
///   equal rises of `l'` (odd `l`) or exceed them by one (even).
pub fn check_fd_lemmas(c: &Circuit, depth: usize) -> LemmaReport {
    check_fd_lemmas_on(&build_protocol(ProtocolKind::FallDecoupled, c), c, depth)
}

/// [`check_fd_lemmas`] against a caller-supplied graph.
pub fn check_fd_lemmas_on(graph: &MarkedGraph, c: &Circuit, depth: usize) -> LemmaReport {
    let mut report = LemmaReport::default();
    for (trace, _marking) in graph.enumerate_traces(depth) {
        report.traces_checked += 1;
        if report.violations.len() >= MAX_REPORTED {
            break;
        }
        for l in c.latches() {
            let falls = num_events(Event::Fall(l), &trace);
            let rises = num_events(Event::Rise(l), &trace);
            match c.transparency(&trace, l) {
                Transparency::Opaque => {
                    let expected = rises + c.is_odd(l) as usize;
                    if falls != expected {
                        report.violations.push(LemmaViolation::OpaqueCounts {
                            trace: trace.clone(),
                            latch: l,
                            falls,
                            rises,
                        });
                    }
                }
                Transparency::Transparent => {
                    for &left in c.left_neighbors(l) {
                        let expected = num_events(Event::Rise(left), &trace) + c.is_even(l) as usize;
                        if rises != expected {
                            report.violations.push(LemmaViolation::TransparentRiseCounts {
                                trace: trace.clone(),
                                latch: l,
                                left,
                                expected,
                                got: rises,
                            });
                        }
                    }
                }
            }
        }
    }
    report
}

/// A broken structural invariant of a protocol graph.
#[derive(Debug, Clone)]
pub struct CycleViolation {
    pub description: String,
}

/// Check the per-protocol cycle-sum invariants over every reachable
/// marking: each latch's self cycle and each neighbor pair's cycle
/// carries exactly one token, always. Structural damage (a missing or
/// reversed place) is reported as a violation rather than a panic so
/// mutation tests can observe it.
pub fn check_cycle_invariants(kind: ProtocolKind, c: &Circuit, graph: &MarkedGraph) -> Vec<CycleViolation> {
    let mut violations = Vec::new();
    let markings = match graph.reachable_markings() {
        Ok(m) => m,
        Err(e) => {
            return vec![CycleViolation { description: format!("not 1-safe: {e}") }];
        }
    };

    let mut check_chain = |label: String, kinds: Vec<PlaceKind>| {
        let mut ids = Vec::new();
        for k in kinds {
            match graph.find_place(k) {
                Some(p) => ids.push(p.id),
                None => {
                    violations.push(CycleViolation {
                        description: format!("{label}: expected place {k:?} is missing"),
                    });
                    return;
                }
            }
        }
        for w in ids.windows(2) {
            if graph.place(w[0]).dst != graph.place(w[1]).src {
                violations.push(CycleViolation {
                    description: format!("{label}: places do not chain into a cycle"),
                });
                return;
            }
        }
        if graph.place(*ids.last().unwrap()).dst != graph.place(ids[0]).src {
            violations.push(CycleViolation {
                description: format!("{label}: places do not close into a cycle"),
            });
            return;
        }
        for m in &markings {
            let sum: u32 = ids.iter().map(|&p| m.tokens(p)).sum();
            if sum != 1 {
                violations.push(CycleViolation {
                    description: format!("{label}: token sum {sum} != 1 at a reachable marking"),
                });
                return;
            }
        }
    };

    for l in c.latches() {
        check_chain(
            format!("self cycle of {}", c.name(l)),
            vec![PlaceKind::SelfFall(l), PlaceKind::SelfRise(l)],
        );
    }
    for (left, right) in c.pairs() {
        let label = format!("pair cycle {} -> {}", c.name(left), c.name(right));
        let kinds = match kind {
            ProtocolKind::Desynchronization => {
                vec![PlaceKind::Forward(left, right), PlaceKind::Backward(left, right)]
            }
            ProtocolKind::RiseDecoupled => vec![
                PlaceKind::SelfFall(left),
                PlaceKind::Forward(left, right),
                PlaceKind::Backward(left, right),
            ],
            ProtocolKind::FallDecoupled => vec![
                PlaceKind::Forward(left, right),
                PlaceKind::SelfFall(right),
                PlaceKind::Backward(left, right),
            ],
        };
        check_chain(label, kinds);
    }
    violations
}

/// The canonical synchronous schedule as a trace: per cycle, all odd
/// falls, then even rises, even falls, and odd rises, each phase in
/// latch-table order. Any desynchronization of a circuit must at
/// minimum admit the schedule it desynchronizes.
pub fn canonical_sync_schedule(c: &Circuit, cycles: usize) -> Trace {
    let odds: Vec<LatchId> = c.latches().filter(|&l| c.is_odd(l)).collect();
    let evens: Vec<LatchId> = c.latches().filter(|&l| c.is_even(l)).collect();
    let mut t = Trace::new();
    for _ in 0..cycles {
        for &o in &odds {
            t.push(Event::Fall(o));
        }
        for &e in &evens {
            t.push(Event::Rise(e));
        }
        for &e in &evens {
            t.push(Event::Fall(e));
        }
        for &o in &odds {
            t.push(Event::Rise(o));
        }
    }
    t
}

/// Constraints used to recover the rise-/fall-decoupled initial
/// markings, reported per candidate by [`derive_marking`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivationOutcome {
    /// (i) every self cycle and pair cycle sums to exactly 1
    pub cycle_sums: bool,
    /// (ii) odd latches start transparent: self-fall of odds and
    /// self-rise of evens are marked
    pub odd_transparent: bool,
    /// (iii) the initially enabled transitions are exactly the odd falls
    pub initial_enabled: bool,
    /// (iv) every directed cycle carries at least one token (liveness)
    pub live: bool,
    /// (v) the graph admits two full canonical synchronous cycles
    pub admits_schedule: bool,
}

impl DerivationOutcome {
    pub fn satisfied(&self) -> bool {
        self.cycle_sums && self.odd_transparent && self.initial_enabled && self.live && self.admits_schedule
    }
}

/// Recover the initial marking of a rise- or fall-decoupled protocol
/// graph from first principles, without consulting the shipped values.
///
/// The place structure is fixed by the protocol; only the 0/1 initial
/// marking is unknown. Self places are forced directly by constraints
/// (i) and (ii); the forward/backward places of every neighbor pair are
/// enumerated exhaustively and filtered by all five constraints. For
/// the circuits in this repository the surviving marking is unique and
/// equals what [`build_protocol`] ships; constraints (iv) and (v) are
/// what rule out the reversed fall-decoupled candidates, which satisfy
/// (i)-(iii) but deadlock or reject the synchronous schedule itself.
pub fn derive_marking(kind: ProtocolKind, c: &Circuit) -> Vec<Marking> {
    derive_marking_candidates(kind, c)
        .into_iter()
        .filter(|(_, outcome)| outcome.satisfied())
        .map(|(m, _)| m)
        .collect()
}

/// Every 0/1 candidate marking over the pair places, with the
/// constraints each one satisfies. Self places are pinned up front:
/// flipping any of them falsifies (i) or (ii) outright.
pub fn derive_marking_candidates(
    kind: ProtocolKind,
    c: &Circuit,
) -> Vec<(Marking, DerivationOutcome)> {
    let graph = build_protocol(kind, c);
    let places = graph.places();
    let pair_places: Vec<usize> = places
        .iter()
        .filter(|p| matches!(p.kind, PlaceKind::Forward(..) | PlaceKind::Backward(..)))
        .map(|p| p.id)
        .collect();

    // (ii) plus the self-cycle half of (i) force the self places.
    let mut base = vec![0u32; places.len()];
    for p in places {
        match p.kind {
            PlaceKind::SelfFall(l) if c.is_odd(l) => base[p.id] = 1,
            PlaceKind::SelfRise(l) if c.is_even(l) => base[p.id] = 1,
            _ => {}
        }
    }

    let schedule = canonical_sync_schedule(c, 2);
    let odd_falls: Vec<Event> =
        c.latches().filter(|&l| c.is_odd(l)).map(Event::Fall).collect();
    // cycles depend on the place structure only, not the candidate marking
    let cycles = graph.elementary_cycles();

    let mut out = Vec::new();
    for bits in 0u64..(1 << pair_places.len()) {
        let mut tokens = base.clone();
        for (i, &pid) in pair_places.iter().enumerate() {
            tokens[pid] = ((bits >> i) & 1) as u32;
        }
        let candidate = graph.with_initial_marking(Marking::new(tokens));
        let outcome = evaluate_candidate(kind, c, &candidate, &cycles, &schedule, &odd_falls);
        out.push((candidate.init_marking().clone(), outcome));
    }
    out
}

fn evaluate_candidate(
    kind: ProtocolKind,
    c: &Circuit,
    graph: &MarkedGraph,
    cycles: &[crate::marked_graph::Path],
    schedule: &Trace,
    odd_falls: &[Event],
) -> DerivationOutcome {
    let init = graph.init_marking();

    let mut cycle_sums = true;
    for l in c.latches() {
        let sf = graph.find_place(PlaceKind::SelfFall(l)).unwrap().id;
        let sr = graph.find_place(PlaceKind::SelfRise(l)).unwrap().id;
        cycle_sums &= init.tokens(sf) + init.tokens(sr) == 1;
    }
    for (left, right) in c.pairs() {
        let fwd = graph.find_place(PlaceKind::Forward(left, right)).unwrap().id;
        let bwd = graph.find_place(PlaceKind::Backward(left, right)).unwrap().id;
        let third = match kind {
            ProtocolKind::Desynchronization => 0,
            ProtocolKind::RiseDecoupled => {
                init.tokens(graph.find_place(PlaceKind::SelfFall(left)).unwrap().id)
            }
            ProtocolKind::FallDecoupled => {
                init.tokens(graph.find_place(PlaceKind::SelfFall(right)).unwrap().id)
            }
        };
        cycle_sums &= init.tokens(fwd) + init.tokens(bwd) + third == 1;
    }

    let odd_transparent = c.latches().all(|l| {
        let sf = graph.find_place(PlaceKind::SelfFall(l)).unwrap().id;
        let sr = graph.find_place(PlaceKind::SelfRise(l)).unwrap().id;
        match c.parity(l) {
            Parity::Odd => init.tokens(sf) == 1,
            Parity::Even => init.tokens(sr) == 1,
        }
    });

    let enabled = graph.enabled_events(init);
    let initial_enabled = enabled == odd_falls;

    let live = cycles.iter().all(|cycle| graph.path_sum(init, cycle) >= 1);

    let admits_schedule = graph.admits(schedule).is_final();

    DerivationOutcome { cycle_sums, odd_transparent, initial_enabled, live, admits_schedule }
}
