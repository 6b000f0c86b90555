//! Soundness, completeness, and monotonicity of the bounded
//! flow-equivalence checker.

mod common;

use fe_core::async_exec::async_eval;
use fe_core::flow::{check_flow_equivalence, check_flow_equivalence_on, CheckOptions, FlowVerdict};
use fe_core::marked_graph::{MarkedGraph, PlaceKind};
use fe_core::protocols::{build_protocol, ProtocolKind};
use fe_core::sync::sync_eval;
use fe_core::Event;

#[test]
fn emitted_violations_replay_exactly() {
    let loaded = common::cex();
    let (c, st0) = (&loaded.circuit, &loaded.initial);
    for depth in 9..=11 {
        for shortest in [false, true] {
            let opts = CheckOptions { depth, shortest, ..Default::default() };
            let verdict = check_flow_equivalence(c, st0, ProtocolKind::Desynchronization, opts);
            let FlowVerdict::Violation(v) = verdict else {
                panic!("expected violation at depth {depth}");
            };
            let graph = build_protocol(ProtocolKind::Desynchronization, c);
            assert!(graph.admits(&v.trace).is_final());
            assert_eq!(async_eval(c, st0, &v.trace, v.latch), Ok(v.got));
            assert_eq!(sync_eval(c, st0, v.fall_count as usize, v.latch), v.expected);
            assert_ne!(v.got, v.expected);
            assert_eq!(
                fe_core::model::num_events(Event::Fall(v.latch), &v.trace),
                v.fall_count as usize
            );
        }
    }
}

#[test]
fn passes_are_monotone_in_depth() {
    let loaded = common::cex();
    let (c, st0) = (&loaded.circuit, &loaded.initial);
    for kind in [ProtocolKind::RiseDecoupled, ProtocolKind::FallDecoupled] {
        let at_12 = check_flow_equivalence(c, st0, kind, CheckOptions::default());
        assert!(at_12.is_pass());
        for depth in [1, 4, 8, 11] {
            let v = check_flow_equivalence(c, st0, kind, CheckOptions { depth, ..Default::default() });
            assert!(v.is_pass(), "{kind} at depth {depth}: {v:?}");
        }
    }
    // desync passes right up to the counterexample length
    for depth in 1..9 {
        let v = check_flow_equivalence(
            c,
            st0,
            ProtocolKind::Desynchronization,
            CheckOptions { depth, ..Default::default() },
        );
        assert!(v.is_pass(), "depth {depth}");
    }
}

#[test]
fn corrupting_the_fall_decoupled_forward_direction_is_caught() {
    // Reversing a forward place removes the rise ordering it encoded;
    // the checker must then find a concrete violation at small depth.
    let loaded = common::cex();
    let (c, st0) = (&loaded.circuit, &loaded.initial);
    let b = c.latch("B").unwrap();
    let cc = c.latch("C").unwrap();
    let graph = build_protocol(ProtocolKind::FallDecoupled, c);
    let fwd = graph.find_place(PlaceKind::Forward(b, cc)).unwrap().id;
    let mutated = graph.with_place_flipped(fwd);
    let verdict = check_flow_equivalence_on(c, st0, &mutated, CheckOptions { depth: 8, ..Default::default() });
    let FlowVerdict::Violation(v) = verdict else {
        panic!("mutation not caught: {verdict:?}");
    };
    assert_eq!(c.name(v.latch), "C");
    assert!(v.trace.len() <= 8);
}

#[test]
fn cyclic_transparency_is_a_distinct_finding() {
    // A permission-free graph admits arbitrary event orders, including
    // rises that leave a full ring transparent; the first fall after
    // that has no defined value and must surface as its own category.
    let loaded = common::ring2();
    let (c, st0) = (&loaded.circuit, &loaded.initial);
    let transitions: Vec<Event> = c
        .latches()
        .flat_map(|l| [Event::Rise(l), Event::Fall(l)])
        .collect();
    let free = MarkedGraph::new(transitions, vec![]).unwrap();
    let verdict = check_flow_equivalence_on(c, st0, &free, CheckOptions { depth: 4, ..Default::default() });
    let FlowVerdict::Cyclic(finding) = verdict else {
        panic!("expected a cyclic-transparency finding, got {verdict:?}");
    };
    assert!(matches!(finding.event, Event::Fall(_)));
    assert_eq!(finding.cycle.len(), 2, "both ring latches participate");
}

#[test]
fn no_cyclic_findings_on_the_real_protocols() {
    for (name, loaded) in common::circuits() {
        let (c, st0) = (&loaded.circuit, &loaded.initial);
        for kind in ProtocolKind::ALL {
            let v = check_flow_equivalence(c, st0, kind, CheckOptions::default());
            assert!(
                !matches!(v, FlowVerdict::Cyclic(_)),
                "{name}/{kind}: unexpected transparency cycle"
            );
        }
    }
}

#[test]
fn thread_counts_do_not_change_verdicts() {
    for (name, loaded) in common::circuits() {
        let (c, st0) = (&loaded.circuit, &loaded.initial);
        for kind in ProtocolKind::ALL {
            let seq = check_flow_equivalence(c, st0, kind, CheckOptions { depth: 10, ..Default::default() });
            for threads in [2, 4] {
                let par = check_flow_equivalence(
                    c,
                    st0,
                    kind,
                    CheckOptions { depth: 10, threads, ..Default::default() },
                );
                match (&seq, &par) {
                    (FlowVerdict::Pass { .. }, FlowVerdict::Pass { .. }) => {}
                    (a, b) => assert_eq!(a, b, "{name}/{kind} with {threads} threads"),
                }
            }
        }
    }
}
