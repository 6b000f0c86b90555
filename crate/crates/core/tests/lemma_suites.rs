//! Exhaustive lemma suites over the protocol graphs: cycle
//! conservation, the single-firing path algebra, the rise-decoupled
//! opacity and fall-count lemmas, and the fall-decoupled count lemmas.
//! Mutation tests confirm each suite actually has teeth.

mod common;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fe_core::marked_graph::{MarkedGraph, Path, PlaceKind};
use fe_core::protocols::{
    build_protocol, check_cycle_invariants, check_fd_lemmas, check_fd_lemmas_on,
    check_rd_lemmas, check_rd_lemmas_on, ProtocolKind,
};
use fe_core::Circuit;

const DEPTH: usize = 12;

#[test]
fn cycle_conservation_holds_exhaustively() {
    for (name, loaded) in common::circuits() {
        for kind in ProtocolKind::ALL {
            let graph = build_protocol(kind, &loaded.circuit);
            let summary = graph
                .verify_cycle_conservation()
                .unwrap_or_else(|e| panic!("{name}/{kind}: {e}"));
            assert!(summary.cycles > 0 && summary.markings > 0);
        }
    }
}

#[test]
fn protocol_cycle_sums_are_exactly_one_everywhere() {
    for (name, loaded) in common::circuits() {
        for kind in ProtocolKind::ALL {
            let graph = build_protocol(kind, &loaded.circuit);
            let violations = check_cycle_invariants(kind, &loaded.circuit, &graph);
            assert!(violations.is_empty(), "{name}/{kind}: {violations:?}");
        }
    }
}

/// Random well-chained path through the graph, grown place by place.
fn random_path(graph: &MarkedGraph, rng: &mut impl Rng) -> Option<Path> {
    let start = rng.random_range(0..graph.places().len());
    let mut places = vec![start];
    let mut cur = graph.place(start).dst;
    for _ in 0..rng.random_range(0..6) {
        let options: Vec<usize> = graph
            .places()
            .iter()
            .filter(|p| p.src == cur)
            .map(|p| p.id)
            .collect();
        let Some(&next) = options.choose(rng) else { break };
        places.push(next);
        cur = graph.place(next).dst;
    }
    Path::new(graph, places).ok()
}

#[test]
fn single_firing_path_algebra_holds_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (name, loaded) in common::circuits() {
        for kind in ProtocolKind::ALL {
            let graph = build_protocol(kind, &loaded.circuit);
            let markings = graph.reachable_markings().unwrap();
            let mut samples = 0;
            while samples < 200 {
                let m = markings.choose(&mut rng).unwrap();
                let enabled = graph.enabled_events(m);
                let Some(&event) = enabled.choose(&mut rng) else { continue };
                let Some(path) = random_path(&graph, &mut rng) else { continue };
                let after = graph.fire(m, event).unwrap();
                assert!(
                    graph.helper_table_holds(m, &after, event, &path),
                    "{name}/{kind}: path algebra broken for {event:?}"
                );
                samples += 1;
            }
        }
    }
}

#[test]
fn every_cycle_and_marking_respects_the_firing_table() {
    // exhaustive variant over the named cycles rather than random paths
    for (name, loaded) in common::circuits() {
        for kind in ProtocolKind::ALL {
            let graph = build_protocol(kind, &loaded.circuit);
            for cycle in graph.elementary_cycles() {
                graph
                    .cycle_check(&cycle, DEPTH)
                    .unwrap_or_else(|e| panic!("{name}/{kind}: {e}"));
            }
        }
    }
}

#[test]
fn rise_decoupled_lemmas_hold_to_depth_12() {
    for (name, loaded) in common::circuits() {
        let report = check_rd_lemmas(&loaded.circuit, DEPTH);
        assert!(
            report.passed(),
            "{name}: {:?}",
            report.violations.iter().map(|v| v.describe(&loaded.circuit)).collect::<Vec<_>>()
        );
        assert!(report.traces_checked > 10, "{name}: only {} traces", report.traces_checked);
    }
}

#[test]
fn fall_decoupled_lemmas_hold_to_depth_12() {
    for (name, loaded) in common::circuits() {
        let report = check_fd_lemmas(&loaded.circuit, DEPTH);
        assert!(
            report.passed(),
            "{name}: {:?}",
            report.violations.iter().map(|v| v.describe(&loaded.circuit)).collect::<Vec<_>>()
        );
        assert!(report.traces_checked > 10);
    }
}

#[test]
fn rise_decoupled_lets_a_latch_rise_before_its_producer_ever_latched() {
    // The slack that distinguishes rise-decoupling: B may go transparent
    // again before A has produced anything. Fall-decoupling forbids
    // exactly this, since rises propagate forward.
    let loaded = common::cex();
    let c = &loaded.circuit;
    let rd = build_protocol(ProtocolKind::RiseDecoupled, c);
    let fd = build_protocol(ProtocolKind::FallDecoupled, c);
    let witness = rd.enumerate_traces(6).find_map(|(t, _)| {
        let last = t.last()?;
        let fe_core::Event::Rise(l) = last else { return None };
        let lagging = c.left_neighbors(l).iter().any(|&left| {
            fe_core::model::num_events(fe_core::Event::Fall(left), &t)
                < fe_core::model::num_events(last, &t)
        });
        lagging.then_some(t)
    });
    let witness = witness.expect("rise-decoupled admits a rise ahead of its producer");
    assert!(
        !fd.admits(&witness).is_final(),
        "fall-decoupled must reject [{}]",
        c.format_trace(&witness)
    );
}

#[test]
fn fall_decoupled_admits_neighbor_falls_in_either_order() {
    // Falls commute across a pair under fall-decoupling; under
    // rise-decoupling the consumer can only fall after its producer.
    let loaded = common::cex();
    let c = &loaded.circuit;
    let b = c.latch("B").unwrap();
    let cc = c.latch("C").unwrap();
    let order = |t: &fe_core::Trace, first: fe_core::LatchId, second: fe_core::LatchId| {
        let pos = |l| t.events().iter().position(|&e| e == fe_core::Event::Fall(l));
        matches!((pos(first), pos(second)), (Some(a), Some(b)) if a < b)
    };
    let fd = build_protocol(ProtocolKind::FallDecoupled, c);
    let fd_traces: Vec<fe_core::Trace> = fd.enumerate_traces(5).map(|(t, _)| t).collect();
    assert!(fd_traces.iter().any(|t| order(t, b, cc)), "B- before C- under fd");
    assert!(fd_traces.iter().any(|t| order(t, cc, b)), "C- before B- under fd");

    let rd = build_protocol(ProtocolKind::RiseDecoupled, c);
    for (t, _) in rd.enumerate_traces(8) {
        assert!(
            !order(&t, cc, b),
            "rise-decoupled admitted C- before B-: [{}]",
            c.format_trace(&t)
        );
    }
}

#[test]
fn spurious_forward_token_trips_the_fall_count_lemma() {
    // Marking B- -> C- initially lets C fall before B ever has; the
    // fall-count relation (lemma b) catches it directly.
    let loaded = common::cex();
    let c = &loaded.circuit;
    let b = c.latch("B").unwrap();
    let cc = c.latch("C").unwrap();
    let graph = build_protocol(ProtocolKind::RiseDecoupled, c);
    let fwd = graph.find_place(PlaceKind::Forward(b, cc)).unwrap().id;
    let mutated = graph.with_initial_tokens(fwd, 1);
    let report = check_rd_lemmas_on(&mutated, c, 4);
    assert!(
        report
            .violations
            .iter()
            .any(|v| matches!(v, fe_core::protocols::LemmaViolation::FallCounts { .. })),
        "expected a fall-count violation, got {:?}",
        report.violations
    );
}

/// Number of violations the whole suite finds against a (possibly
/// mutated) graph.
fn suite_violations(kind: ProtocolKind, c: &Circuit, graph: &MarkedGraph) -> usize {
    let mut n = check_cycle_invariants(kind, c, graph).len();
    n += match kind {
        ProtocolKind::RiseDecoupled => check_rd_lemmas_on(graph, c, 8).violations.len(),
        ProtocolKind::FallDecoupled => check_fd_lemmas_on(graph, c, 8).violations.len(),
        ProtocolKind::Desynchronization => 0,
    };
    n
}

#[test]
fn mutations_are_caught_by_the_suite() {
    for (name, loaded) in common::circuits() {
        let c = &loaded.circuit;
        for kind in [ProtocolKind::RiseDecoupled, ProtocolKind::FallDecoupled] {
            let graph = build_protocol(kind, c);
            assert_eq!(suite_violations(kind, c, &graph), 0, "{name}/{kind}: baseline");

            let forwards: Vec<_> = graph
                .places()
                .iter()
                .filter(|p| matches!(p.kind, PlaceKind::Forward(..)))
                .map(|p| (p.id, graph.init_marking().tokens(p.id)))
                .collect();

            for (pid, tokens) in &forwards {
                // flip the initial token of one forward place
                let mutated = graph.with_initial_tokens(*pid, 1 - tokens);
                assert!(
                    suite_violations(kind, c, &mutated) > 0,
                    "{name}/{kind}: token mutation on place {pid} undetected"
                );
                // flip the direction of one forward place
                let mutated = graph.with_place_flipped(*pid);
                assert!(
                    suite_violations(kind, c, &mutated) > 0,
                    "{name}/{kind}: direction mutation on place {pid} undetected"
                );
            }
        }
    }
}
