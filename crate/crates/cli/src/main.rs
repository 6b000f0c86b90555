//! `fe` — batch verification of desynchronization protocols against
//! latch-based circuits.
//!
//! Every subcommand takes a circuit file (JSON netlist) as its
//! positional argument. Exit codes: 0 when the command succeeded and
//! the checked property holds, 1 when a violation, witness, or finding
//! was produced (report on stdout, JSON with `--json`), 2 for usage,
//! parse, or validation errors (message on stderr).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fe_core::flow::{
    check_flow_equivalence, check_refinement, trace_tokens, transfer_flow_equivalence,
    CheckOptions, FlowVerdict, RefinementResult, TransferOutcome,
};
use fe_core::protocols::{
    build_protocol, check_cycle_invariants, check_fd_lemmas, check_rd_lemmas, ProtocolKind,
};
use fe_core::sync::SyncEvaluator;
use fe_core::waveform::render_waveform;
use fe_core::{load_circuit, parse_trace, Circuit, LatchState, Loaded, Trace, Value};

#[derive(Parser)]
#[command(name = "fe", version, about = "Flow-equivalence checking for desynchronized latch-based circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CircuitArg {
    /// Circuit description file (JSON netlist)
    circuit: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a circuit file
    Validate {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        json: bool,
    },
    /// Print the synchronous execution table
    Sync {
        #[command(flatten)]
        circuit: CircuitArg,
        /// Number of clock cycles to unroll
        #[arg(long, default_value_t = 8)]
        cycles: usize,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a clock trace asynchronously and print latch values
    Run {
        #[command(flatten)]
        circuit: CircuitArg,
        /// Trace file (whitespace-separated NAME+ / NAME- tokens)
        #[arg(long)]
        trace: PathBuf,
        /// Report a single latch instead of all of them
        #[arg(long)]
        latch: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Replay a trace against a protocol marked graph
    Admits {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        protocol: ProtocolKind,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Bounded flow-equivalence check of a protocol
    Check {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        protocol: ProtocolKind,
        /// Maximum trace length to explore
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// Report a shortest violation (breadth-first search)
        #[arg(long)]
        shortest: bool,
        #[arg(long)]
        json: bool,
    },
    /// Exact trace-language refinement between two protocols
    Refine {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        from: ProtocolKind,
        #[arg(long)]
        to: ProtocolKind,
        /// Depth for the transferred bounded check of the target
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long)]
        json: bool,
    },
    /// Exhaustive protocol lemma suites up to a depth bound
    Lemmas {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long)]
        protocol: ProtocolKind,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long)]
        json: bool,
    },
    /// Render a trace as an ASCII waveform, or a protocol graph as DOT
    Render {
        #[command(flatten)]
        circuit: CircuitArg,
        #[arg(long, conflicts_with = "graph")]
        trace: Option<PathBuf>,
        /// Emit the protocol marked graph as Graphviz DOT
        #[arg(long, requires = "protocol")]
        graph: bool,
        #[arg(long)]
        protocol: Option<ProtocolKind>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

const HOLDS: ExitCode = ExitCode::SUCCESS;
const FINDING: ExitCode = ExitCode::FAILURE;

fn load(path: &PathBuf) -> Result<Loaded> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read circuit file {}", path.display()))?;
    load_circuit(&text).with_context(|| format!("invalid circuit file {}", path.display()))
}

fn load_trace(path: &PathBuf, circuit: &Circuit) -> Result<Trace> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read trace file {}", path.display()))?;
    parse_trace(&text, circuit).with_context(|| format!("invalid trace file {}", path.display()))
}

fn worker_threads() -> usize {
    std::env::var("FE_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

fn value_text(v: Value) -> String {
    v.to_string()
}

fn print_sync_table(c: &Circuit, table: &[Vec<Value>]) {
    let names: Vec<&str> = c.latches().map(|l| c.name(l)).collect();
    let width = names.iter().map(|n| n.len()).max().unwrap_or(1).max(5);
    print!("{:>5} ", "cycle");
    for n in &names {
        print!(" {n:>width$}");
    }
    println!();
    for (i, row) in table.iter().enumerate() {
        print!("{i:>5} ");
        for v in row {
            print!(" {:>width$}", value_text(*v));
        }
        println!();
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { circuit, json } => {
            let loaded = load(&circuit.circuit)?;
            let c = &loaded.circuit;
            if json {
                println!(
                    "{}",
                    json!({
                        "valid": true,
                        "latches": c.latch_count(),
                        "pairs": c.pairs().count(),
                        "warnings": loaded.warnings,
                    })
                );
            } else {
                println!("ok: {} latches, {} neighbor pairs", c.latch_count(), c.pairs().count());
                for w in &loaded.warnings {
                    println!("warning: {w}");
                }
            }
            Ok(HOLDS)
        }

        Command::Sync { circuit, cycles, json } => {
            let loaded = load(&circuit.circuit)?;
            let table = SyncEvaluator::new(&loaded.circuit, &loaded.initial).table(cycles);
            if json {
                let names: Vec<&str> = loaded.circuit.latches().map(|l| loaded.circuit.name(l)).collect();
                println!("{}", json!({"latches": names, "cycles": cycles, "table": table}));
            } else {
                print_sync_table(&loaded.circuit, &table);
            }
            Ok(HOLDS)
        }

        Command::Run { circuit, trace, latch, json } => cmd_run(&circuit.circuit, &trace, latch.as_deref(), json),

        Command::Admits { circuit, protocol, trace, json } => {
            let loaded = load(&circuit.circuit)?;
            let t = load_trace(&trace, &loaded.circuit)?;
            let graph = build_protocol(protocol, &loaded.circuit);
            match graph.admits(&t) {
                fe_core::Admission::Final(m) => {
                    if json {
                        println!("{}", json!({"admitted": true, "tokens": m.total()}));
                    } else {
                        println!("admitted ({} events, final marking reached)", t.len());
                    }
                    Ok(HOLDS)
                }
                fe_core::Admission::RejectedAt { index, event } => {
                    if json {
                        println!(
                            "{}",
                            json!({
                                "admitted": false,
                                "index": index,
                                "event": loaded.circuit.format_event(event),
                            })
                        );
                    } else {
                        println!("rejected at index {index}: {}", loaded.circuit.format_event(event));
                    }
                    Ok(FINDING)
                }
            }
        }

        Command::Check { circuit, protocol, depth, shortest, json } => {
            let loaded = load(&circuit.circuit)?;
            let (c, st0) = (&loaded.circuit, &loaded.initial);
            let opts = CheckOptions { depth, shortest, threads: worker_threads() };
            let started = Instant::now();
            let verdict = check_flow_equivalence(c, st0, protocol, opts);
            let elapsed = started.elapsed();
            if json {
                let mut report = verdict.to_json(c);
                report["protocol"] = json!(protocol.name());
                report["elapsed_ms"] = json!(elapsed.as_millis() as u64);
                println!("{report}");
            } else {
                print_verdict(c, st0, protocol, depth, &verdict);
            }
            Ok(if verdict.is_pass() { HOLDS } else { FINDING })
        }

        Command::Refine { circuit, from, to, depth, json } => {
            let loaded = load(&circuit.circuit)?;
            let (c, st0) = (&loaded.circuit, &loaded.initial);
            let left = build_protocol(from, c);
            let right = build_protocol(to, c);
            let refinement = check_refinement(&left, &right)?;
            match &refinement {
                RefinementResult::Included => {
                    let base = check_flow_equivalence(
                        c,
                        st0,
                        to,
                        CheckOptions { depth, threads: worker_threads(), ..Default::default() },
                    );
                    let transfer = transfer_flow_equivalence(&refinement, &base)
                        .expect("included never refuses");
                    if json {
                        let mut report = refinement.to_json(c);
                        report["from"] = json!(from.name());
                        report["to"] = json!(to.name());
                        report["transfer"] = match &transfer {
                            TransferOutcome::Inherited { depth } => {
                                json!({"inherited_pass_depth": depth})
                            }
                            TransferOutcome::ViolationAlreadyConcrete => {
                                json!({"base_violation": base.to_json(c)})
                            }
                        };
                        println!("{report}");
                    } else {
                        println!("included: every {from}-admitted trace is {to}-admitted");
                        match transfer {
                            TransferOutcome::Inherited { depth } => println!(
                                "{from} inherits {to}'s bounded flow-equivalence pass at depth {depth}"
                            ),
                            TransferOutcome::ViolationAlreadyConcrete => println!(
                                "no verdict transferred: {to} itself violates flow equivalence at depth {depth}"
                            ),
                        }
                    }
                    Ok(HOLDS)
                }
                RefinementResult::Witness { trace, event } => {
                    if json {
                        let mut report = refinement.to_json(c);
                        report["from"] = json!(from.name());
                        report["to"] = json!(to.name());
                        println!("{report}");
                    } else {
                        println!(
                            "witness: after [{}], {from} enables {} but {to} does not",
                            c.format_trace(trace),
                            c.format_event(*event)
                        );
                    }
                    Ok(FINDING)
                }
            }
        }

        Command::Lemmas { circuit, protocol, depth, json } => {
            let loaded = load(&circuit.circuit)?;
            let c = &loaded.circuit;
            let graph = build_protocol(protocol, c);
            let report = match protocol {
                ProtocolKind::RiseDecoupled => Some(check_rd_lemmas(c, depth)),
                ProtocolKind::FallDecoupled => Some(check_fd_lemmas(c, depth)),
                ProtocolKind::Desynchronization => None,
            };
            let cycle_violations = check_cycle_invariants(protocol, c, &graph);
            let conservation = graph.verify_cycle_conservation();

            let lemma_violations: Vec<String> = report
                .as_ref()
                .map(|r| r.violations.iter().map(|v| v.describe(c)).collect())
                .unwrap_or_default();
            let ok = lemma_violations.is_empty()
                && cycle_violations.is_empty()
                && conservation.is_ok();

            if json {
                println!(
                    "{}",
                    json!({
                        "protocol": protocol.name(),
                        "depth": depth,
                        "traces_checked": report.as_ref().map(|r| r.traces_checked),
                        "lemma_violations": lemma_violations,
                        "cycle_violations": cycle_violations.iter().map(|v| &v.description).collect::<Vec<_>>(),
                        "cycle_conservation": conservation.is_ok(),
                        "pass": ok,
                    })
                );
            } else {
                if let Some(r) = &report {
                    println!(
                        "lemma checks over {} admitted traces (depth {depth}): {}",
                        r.traces_checked,
                        if r.passed() { "pass" } else { "FAIL" }
                    );
                    for v in &r.violations {
                        println!("  violation: {}", v.describe(c));
                    }
                } else {
                    println!("no protocol-specific lemmas for {protocol}; structural checks only");
                }
                match &conservation {
                    Ok(summary) => println!(
                        "cycle conservation: pass ({} cycles x {} reachable markings)",
                        summary.cycles, summary.markings
                    ),
                    Err(e) => println!("cycle conservation: FAIL ({e})"),
                }
                if cycle_violations.is_empty() {
                    println!("cycle-sum invariants: pass");
                } else {
                    for v in &cycle_violations {
                        println!("cycle-sum violation: {}", v.description);
                    }
                }
            }
            Ok(if ok { HOLDS } else { FINDING })
        }

        Command::Render { circuit, trace, graph, protocol } => {
            let loaded = load(&circuit.circuit)?;
            if graph {
                let kind = protocol.expect("clap enforces --protocol with --graph");
                let g = build_protocol(kind, &loaded.circuit);
                print!("{}", g.to_dot(&loaded.circuit));
                return Ok(HOLDS);
            }
            let Some(trace_path) = trace else {
                bail!("render needs either --trace FILE or --graph");
            };
            let t = load_trace(&trace_path, &loaded.circuit)?;
            print!("{}", render_waveform(&loaded.circuit, &loaded.initial, &t));
            Ok(HOLDS)
        }
    }
}

fn cmd_run(circuit: &PathBuf, trace: &PathBuf, latch: Option<&str>, json: bool) -> Result<ExitCode> {
    let loaded = load(circuit)?;
    let c = &loaded.circuit;
    let t = load_trace(trace, c)?;
    let mut state = fe_core::AsyncState::new(c, &loaded.initial);
    let failure = state.run(&t).err();

    let selected: Vec<fe_core::LatchId> = match latch {
        Some(name) => {
            vec![c.latch(name).ok_or_else(|| anyhow!("unknown latch {name:?}"))?]
        }
        None => c.latches().collect(),
    };

    let mut rows = Vec::new();
    for &l in &selected {
        let value = match state.current_value(l) {
            Ok(v) => value_text(v),
            Err(_) => "?".to_string(),
        };
        rows.push((c.name(l).to_string(), state.phase(l), value, state.num_falls(l)));
    }

    if json {
        let latches: serde_json::Map<String, serde_json::Value> = rows
            .iter()
            .map(|(name, phase, value, falls)| {
                (
                    name.clone(),
                    json!({
                        "transparent": *phase == fe_core::Transparency::Transparent,
                        "value": value,
                        "falls": falls,
                    }),
                )
            })
            .collect();
        println!(
            "{}",
            json!({
                "latches": latches,
                "finding": failure.as_ref().map(|e| e.describe(c)),
            })
        );
    } else {
        for (name, phase, value, falls) in &rows {
            let phase = match phase {
                fe_core::Transparency::Transparent => "transparent",
                fe_core::Transparency::Opaque => "opaque",
            };
            println!("{name:<8} {phase:<12} value={value:<6} falls={falls}");
        }
        if let Some(e) = &failure {
            println!("finding: {}", e.describe(c));
        }
    }
    Ok(if failure.is_some() { FINDING } else { HOLDS })
}

fn print_verdict(
    c: &Circuit,
    st0: &LatchState,
    protocol: ProtocolKind,
    depth: usize,
    verdict: &FlowVerdict,
) {
    match verdict {
        FlowVerdict::Pass { depth, traces_checked } => {
            println!("pass: {protocol} preserves flow equivalence for all {traces_checked} traces up to depth {depth}");
        }
        FlowVerdict::Violation(v) => {
            println!("violation of flow equivalence under {protocol}:");
            println!("  trace:    {}", trace_tokens(c, &v.trace).join(" "));
            println!("  latch:    {}", c.name(v.latch));
            println!(
                "  got {} after fall #{}, expected sync cycle {} value {}",
                value_text(v.got),
                v.fall_count,
                v.fall_count,
                value_text(v.expected)
            );
            println!("  synchronous table for comparison:");
            let rows = SyncEvaluator::new(c, st0).table((v.fall_count as usize + 1).min(depth));
            print_sync_table(c, &rows);
        }
        FlowVerdict::Cyclic(f) => {
            println!("cyclic-transparency finding under {protocol} (not a pass):");
            println!("  trace: {}", trace_tokens(c, &f.trace).join(" "));
            println!("  event: {}", c.format_event(f.event));
            println!(
                "  cycle: {}",
                f.cycle.iter().map(|&l| c.name(l)).collect::<Vec<_>>().join(" -> ")
            );
        }
    }
}
