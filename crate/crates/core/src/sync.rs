//! Synchronous execution: the per-cycle value of every latch under the
//! global clock.
//!
//! Odd latches update first each cycle: an odd latch at cycle `n > 0`
//! reads its even left neighbors at cycle `n - 1`, while an even latch
//! at cycle `n` reads its odd left neighbors at the same cycle `n`. At
//! cycle 0 even latches hold their initial values and odd latches are
//! undefined. The mutual recursion is well-founded, and rows are
//! memoized so evaluation is linear in `cycles * latches`.

use std::cell::RefCell;

use crate::circuit::Circuit;
use crate::model::{LatchId, LatchState, Parity, Value};

/// Memoizing evaluator for the synchronous semantics of one circuit and
/// initial state. Rows are computed on demand and cached by cycle.
pub struct SyncEvaluator<'c> {
    circuit: &'c Circuit,
    rows: RefCell<Vec<Vec<Value>>>,
}

impl<'c> SyncEvaluator<'c> {
    pub fn new(circuit: &'c Circuit, st0: &LatchState) -> Self {
        let row0: Vec<Value> = circuit
            .latches()
            .map(|l| match circuit.parity(l) {
                Parity::Even => st0.get(l),
                Parity::Odd => Value::X,
            })
            .collect();
        SyncEvaluator { rows: RefCell::new(vec![row0]), circuit }
    }

    pub fn circuit(&self) -> &'c Circuit {
        self.circuit
    }

    /// Value of latch `l` at cycle `n`.
    pub fn value(&self, n: usize, l: LatchId) -> Value {
        self.ensure(n);
        self.rows.borrow()[n][l.index()]
    }

    /// All latch values for cycles `0..=up_to`, in latch-table order.
    pub fn table(&self, up_to: usize) -> Vec<Vec<Value>> {
        self.ensure(up_to);
        self.rows.borrow()[..=up_to].to_vec()
    }

    fn ensure(&self, n: usize) {
        let mut rows = self.rows.borrow_mut();
        while rows.len() <= n {
            let prev = rows.last().expect("row 0 always present");
            let c = self.circuit;
            let mut row = vec![Value::X; c.latch_count()];
            // odds first: they read even latches at the previous cycle
            for l in c.latches().filter(|&l| c.is_odd(l)) {
                row[l.index()] = c.next_state(l).eval(&mut |lp| prev[lp.index()]);
            }
            // evens read odd latches at this cycle, just computed
            for l in c.latches().filter(|&l| c.is_even(l)) {
                row[l.index()] = c.next_state(l).eval(&mut |lp| row[lp.index()]);
            }
            rows.push(row);
        }
    }
}

/// One-off synchronous evaluation; builds a fresh evaluator per call.
pub fn sync_eval(circuit: &Circuit, st0: &LatchState, n: usize, l: LatchId) -> Value {
    SyncEvaluator::new(circuit, st0).value(n, l)
}

/// The full table of synchronous values for cycles `0..=up_to`.
pub fn sync_table(circuit: &Circuit, st0: &LatchState, up_to: usize) -> Vec<Vec<Value>> {
    SyncEvaluator::new(circuit, st0).table(up_to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::load_circuit;
    use crate::model::Value::{Num, X};

    const CEX: &str = include_str!("../../../circuits/cex.json");
    const RING2: &str = include_str!("../../../circuits/ring2.json");

    /// Direct, unmemoized transcription of the four-case recursion,
    /// kept independent of the row-building evaluator.
    fn oracle(c: &Circuit, st0: &LatchState, n: usize, l: LatchId) -> Value {
        match (n, c.parity(l)) {
            (0, Parity::Even) => st0.get(l),
            (0, Parity::Odd) => Value::X,
            (_, Parity::Even) => c.next_state(l).eval(&mut |lp| oracle(c, st0, n, lp)),
            (_, Parity::Odd) => c.next_state(l).eval(&mut |lp| oracle(c, st0, n - 1, lp)),
        }
    }

    #[test]
    fn cex_table_matches_hand_unrolled_values() {
        let loaded = load_circuit(CEX).unwrap();
        let (c, st0) = (&loaded.circuit, &loaded.initial);
        let ev = SyncEvaluator::new(c, st0);
        let get = |n: usize, name: &str| ev.value(n, c.latch(name).unwrap());

        assert_eq!(get(0, "C"), X);
        assert_eq!(get(0, "A"), X);
        for (n, src, b, snk, a, cc) in [
            (1, 0, 0, 0, 0, 1),
            (2, 1, 1, 0, 1, 2),
            (3, 2, 2, 0, 2, 3),
        ] {
            assert_eq!(get(n, "SRC"), Num(src));
            assert_eq!(get(n, "B"), Num(b));
            assert_eq!(get(n, "SNK"), Num(snk));
            assert_eq!(get(n, "A"), Num(a));
            assert_eq!(get(n, "C"), Num(cc));
        }
    }

    #[test]
    fn ring2_values() {
        let loaded = load_circuit(RING2).unwrap();
        let (c, st0) = (&loaded.circuit, &loaded.initial);
        let ev = SyncEvaluator::new(c, st0);
        let e = c.latch("E").unwrap();
        let o = c.latch("O").unwrap();
        assert_eq!(ev.value(0, e), Num(0));
        assert_eq!(ev.value(0, o), X);
        assert_eq!(ev.value(1, o), Num(1));
        assert_eq!(ev.value(1, e), Num(2));
        assert_eq!(ev.value(2, o), Num(3));
        assert_eq!(ev.value(2, e), Num(4));
    }

    #[test]
    fn memoized_rows_agree_with_direct_recursion() {
        for src in [CEX, RING2, include_str!("../../../circuits/pipe3.json")] {
            let loaded = load_circuit(src).unwrap();
            let (c, st0) = (&loaded.circuit, &loaded.initial);
            let ev = SyncEvaluator::new(c, st0);
            for n in 0..8 {
                for l in c.latches() {
                    assert_eq!(ev.value(n, l), oracle(c, st0, n, l), "cycle {n} latch {}", c.name(l));
                }
            }
        }
    }

    #[test]
    fn odd_latches_undefined_at_cycle_zero() {
        for src in [CEX, RING2] {
            let loaded = load_circuit(src).unwrap();
            let c = &loaded.circuit;
            let ev = SyncEvaluator::new(c, &loaded.initial);
            for l in c.latches().filter(|&l| c.is_odd(l)) {
                assert_eq!(ev.value(0, l), X);
            }
        }
    }

    #[test]
    fn table_shape() {
        let loaded = load_circuit(CEX).unwrap();
        let table = sync_table(&loaded.circuit, &loaded.initial, 2);
        assert_eq!(table.len(), 3);
        assert!(table.iter().all(|row| row.len() == 5));
        // row 0 is st0 for evens, X for odds
        let c = &loaded.circuit;
        for l in c.latches() {
            assert_eq!(table[0][l.index()], if c.is_even(l) { loaded.initial.get(l) } else { X });
        }
    }

    #[test]
    fn perturbing_initial_state_only_affects_reachable_latches() {
        let loaded = load_circuit(include_str!("../../../circuits/pipe3.json")).unwrap();
        let c = &loaded.circuit;
        // forward-reachable set of a latch, following neighbor pairs
        let reachable = |from: LatchId| {
            let mut seen = vec![false; c.latch_count()];
            let mut stack = vec![from];
            seen[from.index()] = true;
            while let Some(l) = stack.pop() {
                for &r in c.right_neighbors(l) {
                    if !seen[r.index()] {
                        seen[r.index()] = true;
                        stack.push(r);
                    }
                }
            }
            seen
        };
        for perturbed in c.latches().filter(|&l| c.is_even(l)) {
            let mut st = loaded.initial.clone();
            st.set(perturbed, Value::Num(999));
            let base = SyncEvaluator::new(c, &loaded.initial);
            let bumped = SyncEvaluator::new(c, &st);
            let ok = reachable(perturbed);
            for n in 0..6 {
                for l in c.latches() {
                    if !ok[l.index()] {
                        assert_eq!(base.value(n, l), bumped.value(n, l));
                    }
                }
            }
        }
    }
}
