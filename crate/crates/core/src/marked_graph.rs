//! Generic marked-graph engine.
//!
//! A marked graph is the Petri-net subclass in which every place has
//! exactly one input and one output transition. Transitions here are
//! clock [`Event`]s. The engine provides enabledness, firing, trace
//! admission, bounded trace enumeration, exhaustive reachability with a
//! 1-safety guard, and token sums along paths and cycles.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::Circuit;
use crate::model::{Event, LatchId, Trace};

pub type PlaceId = usize;

/// Role tag for a place. Protocol builders use the first four variants
/// so lemma checks can select "the place from l- to l'-" by name;
/// `Aux` is for free-form graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlaceKind {
    /// `l+ -> l-`
    SelfFall(LatchId),
    /// `l- -> l+`
    SelfRise(LatchId),
    /// The pair place whose direction distinguishes the protocols,
    /// keyed by the `(left, right)` neighbor pair.
    Forward(LatchId, LatchId),
    /// `l'- -> l+` back-pressure for the `(left, right)` pair.
    Backward(LatchId, LatchId),
    Aux(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: PlaceId,
    pub src: Event,
    pub dst: Event,
    pub kind: PlaceKind,
}

/// Token counts indexed by [`PlaceId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Marking {
    tokens: Vec<u32>,
}

impl Marking {
    pub fn new(tokens: Vec<u32>) -> Self {
        Marking { tokens }
    }

    pub fn tokens(&self, p: PlaceId) -> u32 {
        self.tokens[p]
    }

    pub fn set_tokens(&mut self, p: PlaceId, v: u32) {
        self.tokens[p] = v;
    }

    pub fn total(&self) -> u64 {
        self.tokens.iter().map(|&t| t as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("event is not a transition of this marked graph")]
    UnknownTransition,
    #[error("transition fired while disabled")]
    FiredWhileDisabled,
}

/// Result of replaying a trace against a marked graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admission {
    /// Every event was enabled in turn; this is the resulting marking.
    Final(Marking),
    /// The event at `index` (0-based) was the first disabled one.
    RejectedAt { index: usize, event: Event },
}

impl Admission {
    pub fn is_final(&self) -> bool {
        matches!(self, Admission::Final(_))
    }
}

#[derive(Debug, Clone)]
pub struct MarkedGraph {
    transitions: Vec<Event>,
    places: Vec<Place>,
    init: Marking,
    trans_index: HashMap<Event, usize>,
    // place ids into / out of each transition, by transition index
    inputs: Vec<Vec<PlaceId>>,
    outputs: Vec<Vec<PlaceId>>,
}

impl MarkedGraph {
    /// Build a graph from transitions and `(src, dst, kind, initial
    /// tokens)` place descriptions. Place ids are assigned densely in
    /// the order given.
    pub fn new(
        transitions: Vec<Event>,
        place_specs: Vec<(Event, Event, PlaceKind, u32)>,
    ) -> Result<Self, GraphError> {
        let trans_index: HashMap<Event, usize> =
            transitions.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut places = Vec::with_capacity(place_specs.len());
        let mut init = Vec::with_capacity(place_specs.len());
        let mut inputs = vec![Vec::new(); transitions.len()];
        let mut outputs = vec![Vec::new(); transitions.len()];
        for (id, (src, dst, kind, tokens)) in place_specs.into_iter().enumerate() {
            let si = *trans_index.get(&src).ok_or(GraphError::UnknownTransition)?;
            let di = *trans_index.get(&dst).ok_or(GraphError::UnknownTransition)?;
            outputs[si].push(id);
            inputs[di].push(id);
            places.push(Place { id, src, dst, kind });
            init.push(tokens);
        }
        Ok(MarkedGraph {
            transitions,
            places,
            init: Marking::new(init),
            trans_index,
            inputs,
            outputs,
        })
    }

    pub fn transitions(&self) -> &[Event] {
        &self.transitions
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn place(&self, p: PlaceId) -> &Place {
        &self.places[p]
    }

    pub fn init_marking(&self) -> &Marking {
        &self.init
    }

    pub fn find_place(&self, kind: PlaceKind) -> Option<&Place> {
        self.places.iter().find(|p| p.kind == kind)
    }

    pub fn transition_index(&self, e: Event) -> Option<usize> {
        self.trans_index.get(&e).copied()
    }

    fn enabled_idx(&self, m: &Marking, ti: usize) -> bool {
        self.inputs[ti].iter().all(|&p| m.tokens(p) > 0)
    }

    /// True iff every place into `e` holds a token (vacuously true for
    /// a transition with no input places).
    pub fn is_enabled(&self, m: &Marking, e: Event) -> Result<bool, GraphError> {
        let ti = self.transition_index(e).ok_or(GraphError::UnknownTransition)?;
        Ok(self.enabled_idx(m, ti))
    }

    /// Enabled transitions under `m`, in declaration order.
    pub fn enabled_events(&self, m: &Marking) -> Vec<Event> {
        self.transitions
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.enabled_idx(m, i))
            .map(|(_, &e)| e)
            .collect()
    }

    fn fire_idx(&self, m: &mut Marking, ti: usize) {
        // A place both into and out of the transition nets to unchanged.
        for &p in &self.inputs[ti] {
            m.tokens[p] -= 1;
        }
        for &p in &self.outputs[ti] {
            m.tokens[p] += 1;
        }
    }

    /// Fire an enabled transition, producing the successor marking.
    pub fn fire(&self, m: &Marking, e: Event) -> Result<Marking, GraphError> {
        let ti = self.transition_index(e).ok_or(GraphError::UnknownTransition)?;
        if !self.enabled_idx(m, ti) {
            return Err(GraphError::FiredWhileDisabled);
        }
        let mut next = m.clone();
        self.fire_idx(&mut next, ti);
        Ok(next)
    }

    /// Replay a trace from the initial marking. Events outside the
    /// transition alphabet are never enabled and reject immediately.
    pub fn admits(&self, t: &Trace) -> Admission {
        let mut m = self.init.clone();
        for (index, &event) in t.events().iter().enumerate() {
            match self.transition_index(event) {
                Some(ti) if self.enabled_idx(&m, ti) => self.fire_idx(&mut m, ti),
                _ => return Admission::RejectedAt { index, event },
            }
        }
        Admission::Final(m)
    }

    /// Depth-first enumeration of all admitted traces of length at most
    /// `depth`, beginning with the empty trace, exploring transitions
    /// in declaration order.
    pub fn enumerate_traces(&self, depth: usize) -> TraceIter<'_> {
        TraceIter { graph: self, depth, stack: Vec::new(), trace: Vec::new(), started: false }
    }

    /// All markings reachable from the initial one, in BFS order.
    /// Aborts with a report if any place ever exceeds one token, so
    /// termination does not depend on the caller's graph being bounded.
    pub fn reachable_markings(&self) -> Result<Vec<Marking>, SafetyViolation> {
        let mut order: Vec<Marking> = Vec::new();
        let mut seen: HashMap<Marking, usize> = HashMap::new();
        let mut parents: Vec<Option<(usize, Event)>> = Vec::new();
        let mut queue = VecDeque::new();

        let witness = |parents: &Vec<Option<(usize, Event)>>, mut at: usize| {
            let mut events = Vec::new();
            while let Some((prev, e)) = parents[at] {
                events.push(e);
                at = prev;
            }
            events.reverse();
            Trace::from(events)
        };

        seen.insert(self.init.clone(), 0);
        order.push(self.init.clone());
        parents.push(None);
        queue.push_back(0);
        if let Some(p) = (0..self.places.len()).find(|&p| self.init.tokens(p) > 1) {
            return Err(SafetyViolation { place: p, tokens: self.init.tokens(p), trace: Trace::new() });
        }

        while let Some(cur) = queue.pop_front() {
            for ti in 0..self.transitions.len() {
                if !self.enabled_idx(&order[cur], ti) {
                    continue;
                }
                let mut next = order[cur].clone();
                self.fire_idx(&mut next, ti);
                if let Some(p) = (0..self.places.len()).find(|&p| next.tokens(p) > 1) {
                    let mut t = witness(&parents, cur);
                    t.push(self.transitions[ti]);
                    return Err(SafetyViolation { place: p, tokens: next.tokens(p), trace: t });
                }
                if !seen.contains_key(&next) {
                    let idx = order.len();
                    seen.insert(next.clone(), idx);
                    order.push(next);
                    parents.push(Some((cur, self.transitions[ti])));
                    queue.push_back(idx);
                }
            }
        }
        Ok(order)
    }

    /// Sum of tokens along a path.
    pub fn path_sum(&self, m: &Marking, p: &Path) -> u32 {
        p.places.iter().map(|&pid| m.tokens(pid)).sum()
    }

    /// Check that a cyclic path's token sum is invariant across every
    /// marking reachable within `depth` firings, and that single
    /// firings respect the endpoint algebra (+1 leaving the start, -1
    /// entering the end, 0 otherwise or when both).
    pub fn cycle_check(&self, p: &Path, depth: usize) -> Result<(), CycleCheckError> {
        if !p.is_cycle(self) {
            return Err(CycleCheckError::NotACycle);
        }
        let expected = self.path_sum(&self.init, p);
        let mut seen: HashMap<Marking, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        seen.insert(self.init.clone(), 0);
        queue.push_back(self.init.clone());
        while let Some(m) = queue.pop_front() {
            let d = seen[&m];
            let sum = self.path_sum(&m, p);
            if sum != expected {
                return Err(CycleCheckError::SumChanged { expected, got: sum });
            }
            for ti in 0..self.transitions.len() {
                if !self.enabled_idx(&m, ti) {
                    continue;
                }
                let mut next = m.clone();
                self.fire_idx(&mut next, ti);
                if !self.helper_table_holds(&m, &next, self.transitions[ti], p) {
                    return Err(CycleCheckError::FiringAlgebra { event: self.transitions[ti] });
                }
                if d < depth && !seen.contains_key(&next) {
                    seen.insert(next.clone(), d + 1);
                    queue.push_back(next);
                }
            }
        }
        Ok(())
    }

    /// The four-case firing algebra for an arbitrary path `p : t1 -> t2`
    /// and a fired transition `t`: the sum gains one if `t = t1 != t2`,
    /// loses one if `t = t2 != t1`, and is unchanged when `t` is both
    /// endpoints or neither.
    pub fn helper_table_holds(&self, before: &Marking, after: &Marking, t: Event, p: &Path) -> bool {
        let t1 = self.places[p.places[0]].src;
        let t2 = self.places[*p.places.last().unwrap()].dst;
        let expected: i64 = if t == t1 && t == t2 {
            0
        } else if t == t1 {
            1
        } else if t == t2 {
            -1
        } else {
            0
        };
        let delta = self.path_sum(after, p) as i64 - self.path_sum(before, p) as i64;
        delta == expected
    }

    /// All elementary directed cycles, as place paths. Each cycle is
    /// produced exactly once, rooted at its minimal transition index.
    pub fn elementary_cycles(&self) -> Vec<Path> {
        let mut cycles = Vec::new();
        let n = self.transitions.len();
        for start in 0..n {
            // DFS over transitions >= start; closing back at start
            let mut path_places: Vec<PlaceId> = Vec::new();
            let mut on_path = vec![false; n];
            self.cycle_dfs(start, start, &mut path_places, &mut on_path, &mut cycles);
        }
        cycles
    }

    fn cycle_dfs(
        &self,
        start: usize,
        cur: usize,
        path_places: &mut Vec<PlaceId>,
        on_path: &mut Vec<bool>,
        cycles: &mut Vec<Path>,
    ) {
        on_path[cur] = true;
        for &pid in &self.outputs[cur] {
            let next = self.trans_index[&self.places[pid].dst];
            if next == start {
                path_places.push(pid);
                cycles.push(Path { places: path_places.clone() });
                path_places.pop();
            } else if next > start && !on_path[next] {
                // rooting each cycle at its minimal transition index
                // yields every elementary cycle exactly once
                path_places.push(pid);
                self.cycle_dfs(start, next, path_places, on_path, cycles);
                path_places.pop();
            }
        }
        on_path[cur] = false;
    }

    /// Verify cycle conservation exhaustively: every elementary cycle
    /// keeps its initial token sum at every reachable marking.
    pub fn verify_cycle_conservation(&self) -> Result<CycleConservation, ConservationViolation> {
        let markings = self
            .reachable_markings()
            .map_err(ConservationViolation::Unsafe)?;
        let cycles = self.elementary_cycles();
        for cycle in &cycles {
            let expected = self.path_sum(&self.init, cycle);
            for m in &markings {
                let got = self.path_sum(m, cycle);
                if got != expected {
                    return Err(ConservationViolation::SumChanged {
                        cycle: cycle.clone(),
                        expected,
                        got,
                    });
                }
            }
        }
        Ok(CycleConservation { cycles: cycles.len(), markings: markings.len() })
    }

    /// Copy with one place's direction reversed (token count kept).
    /// The result is still a marked graph, just not the protocol one;
    /// used for mutation testing.
    pub fn with_place_flipped(&self, p: PlaceId) -> MarkedGraph {
        let specs = self
            .places
            .iter()
            .map(|pl| {
                if pl.id == p {
                    (pl.dst, pl.src, pl.kind, self.init.tokens(pl.id))
                } else {
                    (pl.src, pl.dst, pl.kind, self.init.tokens(pl.id))
                }
            })
            .collect();
        MarkedGraph::new(self.transitions.clone(), specs).expect("same transition set")
    }

    /// Copy with one place's initial token count replaced.
    pub fn with_initial_tokens(&self, p: PlaceId, tokens: u32) -> MarkedGraph {
        let mut g = self.clone();
        g.init.set_tokens(p, tokens);
        g
    }

    /// Copy with the whole initial marking replaced.
    pub fn with_initial_marking(&self, init: Marking) -> MarkedGraph {
        assert_eq!(init.len(), self.places.len());
        let mut g = self.clone();
        g.init = init;
        g
    }

    /// Graphviz rendering: transitions as nodes, places as edges
    /// annotated with their initial tokens.
    pub fn to_dot(&self, circuit: &Circuit) -> String {
        let mut out = String::from("digraph marked_graph {\n  rankdir=LR;\n  node [shape=box];\n");
        for &t in &self.transitions {
            let _ = writeln!(out, "  \"{}\";", circuit.format_event(t));
        }
        for p in &self.places {
            let tokens = self.init.tokens(p.id);
            let label = if tokens > 0 { format!(" [label=\"{tokens}\"]") } else { String::new() };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\"{};",
                circuit.format_event(p.src),
                circuit.format_event(p.dst),
                label
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Well-chained sequence of places: each place's `dst` is the next
/// place's `src`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    places: Vec<PlaceId>,
}

impl Path {
    pub fn new(graph: &MarkedGraph, places: Vec<PlaceId>) -> Result<Self, PathError> {
        if places.is_empty() {
            return Err(PathError::Empty);
        }
        for w in places.windows(2) {
            if graph.places[w[0]].dst != graph.places[w[1]].src {
                return Err(PathError::IllChained { at: w[0] });
            }
        }
        Ok(Path { places })
    }

    pub fn places(&self) -> &[PlaceId] {
        &self.places
    }

    pub fn is_cycle(&self, graph: &MarkedGraph) -> bool {
        graph.places[*self.places.last().unwrap()].dst == graph.places[self.places[0]].src
    }

    pub fn describe(&self, graph: &MarkedGraph, circuit: &Circuit) -> String {
        let mut names: Vec<String> = self
            .places
            .iter()
            .map(|&p| circuit.format_event(graph.places[p].src))
            .collect();
        names.push(circuit.format_event(graph.places[*self.places.last().unwrap()].dst));
        names.join(" -> ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("empty path")]
    Empty,
    #[error("path breaks after place {at}")]
    IllChained { at: PlaceId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("place {place} reached {tokens} tokens (graph is not 1-safe)")]
pub struct SafetyViolation {
    pub place: PlaceId,
    pub tokens: u32,
    /// Firing sequence from the initial marking that exhibits it.
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CycleCheckError {
    #[error("path is not a cycle")]
    NotACycle,
    #[error("cycle sum changed from {expected} to {got}")]
    SumChanged { expected: u32, got: u32 },
    #[error("firing algebra violated by {event:?}")]
    FiringAlgebra { event: Event },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleConservation {
    pub cycles: usize,
    pub markings: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConservationViolation {
    #[error("cycle token sum changed from {expected} to {got}")]
    SumChanged { cycle: Path, expected: u32, got: u32 },
    #[error(transparent)]
    Unsafe(SafetyViolation),
}

/// Lazy DFS enumeration state for [`MarkedGraph::enumerate_traces`].
pub struct TraceIter<'g> {
    graph: &'g MarkedGraph,
    depth: usize,
    stack: Vec<(Marking, usize)>,
    trace: Vec<Event>,
    started: bool,
}

impl Iterator for TraceIter<'_> {
    type Item = (Trace, Marking);

    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            self.started = true;
            self.stack.push((self.graph.init.clone(), 0));
            return Some((Trace::new(), self.graph.init.clone()));
        }
        loop {
            let depth_left = self.depth.checked_sub(self.trace.len())?;
            let (marking, next_t) = self.stack.last_mut()?;
            if depth_left == 0 {
                // at the depth limit nothing below this node is emitted
                self.stack.pop();
                self.trace.pop();
                continue;
            }
            let mut ti = *next_t;
            let mut fired = None;
            while ti < self.graph.transitions.len() {
                if self.graph.enabled_idx(marking, ti) {
                    fired = Some(ti);
                    break;
                }
                ti += 1;
            }
            match fired {
                Some(ti) => {
                    *next_t = ti + 1;
                    let mut next = marking.clone();
                    self.graph.fire_idx(&mut next, ti);
                    self.trace.push(self.graph.transitions[ti]);
                    self.stack.push((next.clone(), 0));
                    return Some((Trace::from(self.trace.clone()), next));
                }
                None => {
                    self.stack.pop();
                    self.trace.pop();
                    if self.stack.is_empty() {
                        return None;
                    }
                }
            }
        }
    }
}
