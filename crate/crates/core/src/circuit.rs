//! Validated circuit structure: latch tables, neighbor lists, and
//! resolved next-state expressions.
//!
//! A [`Circuit`] is only ever produced by [`crate::dsl::load_circuit`],
//! which has already checked parities, neighbor references, and
//! expression well-formedness. Everything here can therefore assume a
//! consistent netlist.

use std::collections::HashMap;
use std::fmt;

use crate::model::{Event, LatchId, Parity, Trace, Transparency, Value};

/// A next-state expression with latch references resolved to ids.
///
/// Validation guarantees every `Ref` names a left neighbor of the
/// owning latch, so evaluation is total given a value for each left
/// neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(Value),
    Ref(LatchId),
    Inc(Box<Expr>),
}

impl Expr {
    /// Evaluate, reading latch values through `read`. Errors from `read`
    /// propagate unchanged, which lets callers thread cycle detection
    /// through combinational evaluation.
    pub fn try_eval<E>(
        &self,
        read: &mut impl FnMut(LatchId) -> Result<Value, E>,
    ) -> Result<Value, E> {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Ref(l) => read(*l),
            Expr::Inc(inner) => Ok(crate::dsl::inc_value(inner.try_eval(read)?)),
        }
    }

    /// Evaluate with an infallible reader.
    pub fn eval(&self, read: &mut impl FnMut(LatchId) -> Value) -> Value {
        match self {
            Expr::Lit(v) => *v,
            Expr::Ref(l) => read(*l),
            Expr::Inc(inner) => crate::dsl::inc_value(inner.eval(read)),
        }
    }
}

/// A closed latch-based circuit: even/odd latch sets, directed neighbor
/// pairs (data flows left to right), and one next-state expression per
/// latch over that latch's left neighbors.
#[derive(Debug, Clone)]
pub struct Circuit {
    names: Vec<String>,
    parities: Vec<Parity>,
    by_name: HashMap<String, LatchId>,
    // (even, odd) and (odd, even) pairs, each (left, right), in file order
    eo_pairs: Vec<(LatchId, LatchId)>,
    oe_pairs: Vec<(LatchId, LatchId)>,
    left: Vec<Vec<LatchId>>,
    right: Vec<Vec<LatchId>>,
    exprs: Vec<Expr>,
}

impl Circuit {
    pub(crate) fn new(
        names: Vec<String>,
        parities: Vec<Parity>,
        eo_pairs: Vec<(LatchId, LatchId)>,
        oe_pairs: Vec<(LatchId, LatchId)>,
        exprs: Vec<Expr>,
    ) -> Self {
        let by_name = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), LatchId(i as u32)))
            .collect();
        let n = names.len();
        let mut left = vec![Vec::new(); n];
        let mut right = vec![Vec::new(); n];
        for &(a, b) in eo_pairs.iter().chain(oe_pairs.iter()) {
            right[a.index()].push(b);
            left[b.index()].push(a);
        }
        Circuit { names, parities, by_name, eo_pairs, oe_pairs, left, right, exprs }
    }

    pub fn latch_count(&self) -> usize {
        self.names.len()
    }

    pub fn latches(&self) -> impl Iterator<Item = LatchId> + '_ {
        (0..self.names.len()).map(|i| LatchId(i as u32))
    }

    pub fn latch(&self, name: &str) -> Option<LatchId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, l: LatchId) -> &str {
        &self.names[l.index()]
    }

    pub fn parity(&self, l: LatchId) -> Parity {
        self.parities[l.index()]
    }

    pub fn is_even(&self, l: LatchId) -> bool {
        self.parity(l) == Parity::Even
    }

    pub fn is_odd(&self, l: LatchId) -> bool {
        self.parity(l) == Parity::Odd
    }

    /// Latches `l'` with a pair `(l', l)`, in declaration order.
    pub fn left_neighbors(&self, l: LatchId) -> &[LatchId] {
        &self.left[l.index()]
    }

    /// Latches `l'` with a pair `(l, l')`, in declaration order.
    pub fn right_neighbors(&self, l: LatchId) -> &[LatchId] {
        &self.right[l.index()]
    }

    pub fn even_odd_pairs(&self) -> &[(LatchId, LatchId)] {
        &self.eo_pairs
    }

    pub fn odd_even_pairs(&self) -> &[(LatchId, LatchId)] {
        &self.oe_pairs
    }

    /// All `(left, right)` neighbor pairs, even-odd first, in file order.
    pub fn pairs(&self) -> impl Iterator<Item = (LatchId, LatchId)> + '_ {
        self.eo_pairs.iter().chain(self.oe_pairs.iter()).copied()
    }

    pub fn next_state(&self, l: LatchId) -> &Expr {
        &self.exprs[l.index()]
    }

    pub fn transparency(&self, t: &Trace, l: LatchId) -> Transparency {
        crate::model::transparency(t, l, self.parity(l))
    }

    pub fn format_event(&self, e: Event) -> String {
        match e {
            Event::Rise(l) => format!("{}+", self.name(l)),
            Event::Fall(l) => format!("{}-", self.name(l)),
        }
    }

    pub fn format_trace(&self, t: &Trace) -> String {
        t.events()
            .iter()
            .map(|&e| self.format_event(e))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Human-readable latch list, for reports.
    pub fn describe_latch(&self, l: LatchId) -> String {
        match self.parity(l) {
            Parity::Even => format!("even latch {}", self.name(l)),
            Parity::Odd => format!("odd latch {}", self.name(l)),
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "circuit with {} latches, {} neighbor pairs",
            self.latch_count(),
            self.eo_pairs.len() + self.oe_pairs.len()
        )
    }
}
