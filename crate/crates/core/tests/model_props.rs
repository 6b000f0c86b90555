//! Property tests for the core vocabulary and the expression DSL.

mod common;

use proptest::prelude::*;

use fe_core::dsl::{self, NextStateExpr};
use fe_core::model::{self, Event, LatchId, Parity, Trace, Transparency, Value};
use fe_core::protocols::{build_protocol, ProtocolKind};

fn arb_latch() -> impl Strategy<Value = (LatchId, Parity)> {
    // ids fabricated through a trace-only lens; no circuit involved
    (0u32..6, prop::bool::ANY).prop_map(|(i, even)| {
        let parity = if even { Parity::Even } else { Parity::Odd };
        (fabricate(i), parity)
    })
}

fn fabricate(i: u32) -> LatchId {
    // round-trip a latch id through a tiny circuit's latch table
    thread_local! {
        static IDS: Vec<LatchId> = {
            let src = r#"{"evens":["E0","E1","E2"],"odds":["O0","O1","O2"],
                "even_odd_neighbors":[["E0","O0"],["E1","O1"],["E2","O2"]],
                "odd_even_neighbors":[["O0","E1"],["O1","E2"],["O2","E0"]],
                "next_state":{"E0":"O2","E1":"O0","E2":"O1","O0":"E0","O1":"E1","O2":"E2"}}"#;
            let c = dsl::load_circuit(src).unwrap().circuit;
            c.latches().collect()
        };
    }
    IDS.with(|ids| ids[i as usize % ids.len()])
}

fn arb_event() -> impl Strategy<Value = Event> {
    (0u32..6, prop::bool::ANY).prop_map(|(i, rise)| {
        let l = fabricate(i);
        if rise {
            Event::Rise(l)
        } else {
            Event::Fall(l)
        }
    })
}

fn arb_trace() -> impl Strategy<Value = Trace> {
    prop::collection::vec(arb_event(), 0..24).prop_map(Trace::from)
}

proptest! {
    #[test]
    fn transparency_after_own_events((l, parity) in arb_latch(), t in arb_trace()) {
        let mut rose = t.clone();
        rose.push(Event::Rise(l));
        prop_assert_eq!(model::transparency(&rose, l, parity), Transparency::Transparent);
        let mut fell = t;
        fell.push(Event::Fall(l));
        prop_assert_eq!(model::transparency(&fell, l, parity), Transparency::Opaque);
    }

    #[test]
    fn transparency_ignores_other_latches((l, parity) in arb_latch(), t in arb_trace(), e in arb_event()) {
        prop_assume!(e.latch() != l);
        let mut extended = t.clone();
        extended.push(e);
        prop_assert_eq!(
            model::transparency(&extended, l, parity),
            model::transparency(&t, l, parity)
        );
    }

    #[test]
    fn num_events_append_laws(t in arb_trace(), e in arb_event(), other in arb_event()) {
        let mut extended = t.clone();
        extended.push(e);
        prop_assert_eq!(model::num_events(e, &extended), model::num_events(e, &t) + 1);
        if other != e {
            prop_assert_eq!(model::num_events(other, &extended), model::num_events(other, &t));
        }
    }

    #[test]
    fn expr_print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        let reparsed = dsl::parse_expr(&printed).unwrap();
        prop_assert_eq!(reparsed, e);
    }

    #[test]
    fn inc_is_monotone_on_numbers(n in 0u64..1_000_000) {
        prop_assert_eq!(dsl::inc_value(Value::Num(n)), Value::Num(n + 1));
    }

    #[test]
    fn admitted_traces_are_prefix_closed(seed in 0u64..512) {
        // random admitted trace on a protocol graph, then every prefix
        // must be admitted as well
        let loaded = dsl::load_circuit(common::CEX).unwrap();
        let kind = ProtocolKind::ALL[(seed % 3) as usize];
        let graph = build_protocol(kind, &loaded.circuit);
        let mut m = graph.init_marking().clone();
        let mut t = Trace::new();
        let mut s = seed;
        for _ in 0..(seed % 14) {
            let enabled = graph.enabled_events(&m);
            if enabled.is_empty() { break; }
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let e = enabled[(s >> 33) as usize % enabled.len()];
            m = graph.fire(&m, e).unwrap();
            t.push(e);
        }
        for len in 0..=t.len() {
            prop_assert!(graph.admits(&t.prefix(len)).is_final());
        }
    }
}

fn arb_expr() -> impl Strategy<Value = NextStateExpr> {
    let leaf = prop_oneof![
        Just(NextStateExpr::Lit(Value::X)),
        (0u64..1000).prop_map(|n| NextStateExpr::Lit(Value::Num(n))),
        "[A-Za-z_][A-Za-z0-9_]{0,6}".prop_filter_map("reserved words", |s| {
            (s != "X" && s != "inc").then_some(NextStateExpr::Ref(s))
        }),
    ];
    leaf.prop_recursive(4, 16, 1, |inner| {
        inner.prop_map(|e| NextStateExpr::Inc(Box::new(e)))
    })
}

#[test]
fn eval_is_total_on_validated_circuits() {
    // every reference in a validated next-state expression resolves to
    // a left neighbor, so evaluation with the neighbor environment
    // never fails
    for (_, loaded) in common::circuits() {
        let c = &loaded.circuit;
        for l in c.latches() {
            let mut read = |lp: fe_core::LatchId| -> Result<Value, std::convert::Infallible> {
                assert!(c.left_neighbors(l).contains(&lp));
                Ok(Value::Num(lp.index() as u64))
            };
            c.next_state(l).try_eval(&mut read).unwrap();
        }
    }
}
