//! Circuit description files and the next-state expression language.
//!
//! Circuit files are JSON with exactly the keys `evens`, `odds`,
//! `even_odd_neighbors`, `odd_even_neighbors`, `next_state`, and an
//! optional `initial` map. Next-state functions use a tiny expression
//! grammar:
//!
//! ```text
//! expr ::= "X" | NAT | IDENT | "inc" "(" expr ")"
//! ```
//!
//! Whitespace is insignificant, `NAT` is decimal, and `IDENT` is
//! `[A-Za-z_][A-Za-z0-9_]*`. `inc` and `X` are reserved and cannot name
//! latches. Trace files are whitespace-separated tokens `NAME+` or
//! `NAME-`, oldest first.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use crate::circuit::{Circuit, Expr};
use crate::model::{Event, LatchId, LatchState, Parity, Trace, Value};

/// Increment semantics for the DSL's `inc`: numbers count up, and the
/// undefined value starts the count at zero. All increment behavior in
/// the toolkit funnels through this one function.
pub fn inc_value(v: Value) -> Value {
    match v {
        Value::Num(n) => Value::Num(n + 1),
        Value::X => Value::Num(0),
    }
}

/// Surface syntax tree for a next-state expression; references are by
/// latch name until validation resolves them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextStateExpr {
    Lit(Value),
    Ref(String),
    Inc(Box<NextStateExpr>),
}

impl fmt::Display for NextStateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NextStateExpr::Lit(v) => write!(f, "{v}"),
            NextStateExpr::Ref(name) => write!(f, "{name}"),
            NextStateExpr::Inc(e) => write!(f, "inc({e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ExprError {
    pub offset: usize,
    pub kind: ExprErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprErrorKind {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("expected '('")]
    ExpectedOpenParen,
    #[error("expected ')'")]
    ExpectedCloseParen,
    #[error("trailing input")]
    TrailingInput,
    #[error("number out of range")]
    NumberOverflow,
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, kind: ExprErrorKind) -> ExprError {
        ExprError { offset: self.pos, kind }
    }

    fn expr(&mut self) -> Result<NextStateExpr, ExprError> {
        self.skip_ws();
        let Some(&b) = self.src.get(self.pos) else {
            return Err(self.err(ExprErrorKind::UnexpectedEnd));
        };
        if b.is_ascii_digit() {
            return self.number();
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let start = self.pos;
            while self
                .src
                .get(self.pos)
                .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
            {
                self.pos += 1;
            }
            let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return match word {
                "X" => Ok(NextStateExpr::Lit(Value::X)),
                // reserved: `inc` is always the operator, never an IDENT
                "inc" => {
                    self.skip_ws();
                    if self.src.get(self.pos) != Some(&b'(') {
                        return Err(self.err(ExprErrorKind::ExpectedOpenParen));
                    }
                    self.pos += 1;
                    let inner = self.expr()?;
                    self.skip_ws();
                    if self.src.get(self.pos) != Some(&b')') {
                        return Err(self.err(ExprErrorKind::ExpectedCloseParen));
                    }
                    self.pos += 1;
                    Ok(NextStateExpr::Inc(Box::new(inner)))
                }
                _ => Ok(NextStateExpr::Ref(word.to_string())),
            };
        }
        Err(self.err(ExprErrorKind::UnexpectedChar(
            self.src[self.pos..].iter().map(|&c| c as char).next().unwrap(),
        )))
    }

    fn number(&mut self) -> Result<NextStateExpr, ExprError> {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let n: u64 = text
            .parse()
            .map_err(|_| ExprError { offset: start, kind: ExprErrorKind::NumberOverflow })?;
        Ok(NextStateExpr::Lit(Value::Num(n)))
    }
}

/// Parse one next-state expression. The grammar is unambiguous; errors
/// carry the byte offset of the failure.
pub fn parse_expr(src: &str) -> Result<NextStateExpr, ExprError> {
    let mut p = ExprParser { src: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err(ExprErrorKind::TrailingInput));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unresolved reference to {0:?}")]
pub struct UnresolvedRef(pub String);

/// Evaluate a surface expression against a partial environment.
pub fn eval_expr(
    e: &NextStateExpr,
    env: &impl Fn(&str) -> Option<Value>,
) -> Result<Value, UnresolvedRef> {
    match e {
        NextStateExpr::Lit(v) => Ok(*v),
        NextStateExpr::Ref(name) => env(name).ok_or_else(|| UnresolvedRef(name.clone())),
        NextStateExpr::Inc(inner) => Ok(inc_value(eval_expr(inner, env)?)),
    }
}

/// Raw circuit file contents, exactly as serialized.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub evens: Vec<String>,
    pub odds: Vec<String>,
    pub even_odd_neighbors: Vec<(String, String)>,
    pub odd_even_neighbors: Vec<(String, String)>,
    pub next_state: BTreeMap<String, String>,
    #[serde(default)]
    pub initial: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate latch name {0:?}")]
    DuplicateLatch(String),
    #[error("{0:?} is a reserved word and cannot name a latch")]
    ReservedName(String),
    #[error("unknown latch {name:?} in {context}")]
    UnknownLatch { name: String, context: String },
    #[error("parity violation in {list}: {pair:?} must pair {expect}")]
    ParityViolation { list: &'static str, pair: (String, String), expect: &'static str },
    #[error("duplicate neighbor pair ({0}, {1})")]
    DuplicatePair(String, String),
    #[error("missing next_state entry for latch {0:?}")]
    MissingNextState(String),
    #[error("next_state for {latch:?}: {source}")]
    BadExpr { latch: String, source: ExprError },
    #[error("next_state for {latch:?} references {reference:?}, which is not a left neighbor")]
    NonNeighborRef { latch: String, reference: String },
    #[error("initial value given for odd latch {0:?} (only even latches take initial values)")]
    OddInitial(String),
    #[error("bad initial value {value:?} for latch {latch:?} (expected X or a natural number)")]
    BadInitialValue { latch: String, value: String },
}

/// A validated circuit together with its initial state and any
/// non-fatal findings from validation.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub circuit: Circuit,
    pub initial: LatchState,
    pub warnings: Vec<String>,
}

fn parse_value_literal(s: &str) -> Option<Value> {
    let s = s.trim();
    if s == "X" {
        return Some(Value::X);
    }
    s.parse::<u64>().ok().map(Value::Num)
}

fn resolve(e: &NextStateExpr, c: &impl Fn(&str) -> Option<LatchId>) -> Option<Expr> {
    Some(match e {
        NextStateExpr::Lit(v) => Expr::Lit(*v),
        NextStateExpr::Ref(name) => Expr::Ref(c(name)?),
        NextStateExpr::Inc(inner) => Expr::Inc(Box::new(resolve(inner, c)?)),
    })
}

fn expr_refs(e: &NextStateExpr, out: &mut Vec<String>) {
    match e {
        NextStateExpr::Lit(_) => {}
        NextStateExpr::Ref(name) => out.push(name.clone()),
        NextStateExpr::Inc(inner) => expr_refs(inner, out),
    }
}

/// Parse and validate a circuit file, producing the circuit and the
/// initial state `st0` (declared initial values for even latches, `X`
/// everywhere else).
pub fn load_circuit(src: &str) -> Result<Loaded, LoadError> {
    let file: CircuitFile = serde_json::from_str(src)?;
    load_circuit_file(&file)
}

pub fn load_circuit_file(file: &CircuitFile) -> Result<Loaded, LoadError> {
    // Latch table: evens first, then odds, each in file order.
    let mut names = Vec::new();
    let mut parities = Vec::new();
    for e in &file.evens {
        names.push(e.clone());
        parities.push(Parity::Even);
    }
    for o in &file.odds {
        names.push(o.clone());
        parities.push(Parity::Odd);
    }
    let mut by_name: BTreeMap<&str, (LatchId, Parity)> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        if name == "X" || name == "inc" {
            return Err(LoadError::ReservedName(name.clone()));
        }
        let id = LatchId(i as u32);
        if by_name.insert(name.as_str(), (id, parities[i])).is_some() {
            return Err(LoadError::DuplicateLatch(name.clone()));
        }
    }

    let lookup = |name: &str, context: &str, want: Parity, list: &'static str| {
        match by_name.get(name) {
            None => Err(LoadError::UnknownLatch { name: name.into(), context: context.into() }),
            Some(&(id, p)) if p == want => Ok(id),
            Some(_) => Err(LoadError::ParityViolation {
                list,
                pair: (String::new(), String::new()), // filled by caller
                expect: if want == Parity::Even { "an even latch here" } else { "an odd latch here" },
            }),
        }
    };

    let mut eo_pairs = Vec::new();
    let mut oe_pairs = Vec::new();
    let mut seen_pairs = std::collections::BTreeSet::new();
    for (e, o) in &file.even_odd_neighbors {
        let fix = |err| match err {
            LoadError::ParityViolation { list, expect, .. } => LoadError::ParityViolation {
                list,
                pair: (e.clone(), o.clone()),
                expect,
            },
            other => other,
        };
        let left = lookup(e, "even_odd_neighbors", Parity::Even, "even_odd_neighbors")
            .map_err(fix)?;
        let right = lookup(o, "even_odd_neighbors", Parity::Odd, "even_odd_neighbors")
            .map_err(fix)?;
        if !seen_pairs.insert((left, right)) {
            return Err(LoadError::DuplicatePair(e.clone(), o.clone()));
        }
        eo_pairs.push((left, right));
    }
    for (o, e) in &file.odd_even_neighbors {
        let fix = |err| match err {
            LoadError::ParityViolation { list, expect, .. } => LoadError::ParityViolation {
                list,
                pair: (o.clone(), e.clone()),
                expect,
            },
            other => other,
        };
        let left = lookup(o, "odd_even_neighbors", Parity::Odd, "odd_even_neighbors")
            .map_err(fix)?;
        let right = lookup(e, "odd_even_neighbors", Parity::Even, "odd_even_neighbors")
            .map_err(fix)?;
        if !seen_pairs.insert((left, right)) {
            return Err(LoadError::DuplicatePair(o.clone(), e.clone()));
        }
        oe_pairs.push((left, right));
    }

    // Left-neighbor sets, for expression validation.
    let n = names.len();
    let mut left_names: Vec<Vec<&str>> = vec![Vec::new(); n];
    for &(a, b) in eo_pairs.iter().chain(oe_pairs.iter()) {
        left_names[b.index()].push(&names[a.index()]);
    }

    for key in file.next_state.keys() {
        if !by_name.contains_key(key.as_str()) {
            return Err(LoadError::UnknownLatch { name: key.clone(), context: "next_state".into() });
        }
    }

    let mut exprs = Vec::with_capacity(n);
    for (i, name) in names.iter().enumerate() {
        let src = file
            .next_state
            .get(name)
            .ok_or_else(|| LoadError::MissingNextState(name.clone()))?;
        let ast = parse_expr(src)
            .map_err(|source| LoadError::BadExpr { latch: name.clone(), source })?;
        let mut refs = Vec::new();
        expr_refs(&ast, &mut refs);
        for r in &refs {
            if !by_name.contains_key(r.as_str()) {
                return Err(LoadError::UnknownLatch {
                    name: r.clone(),
                    context: format!("next_state for {name:?}"),
                });
            }
            if !left_names[i].contains(&r.as_str()) {
                return Err(LoadError::NonNeighborRef {
                    latch: name.clone(),
                    reference: r.clone(),
                });
            }
        }
        let resolved = resolve(&ast, &|r| by_name.get(r).map(|&(id, _)| id))
            .expect("references validated above");
        exprs.push(resolved);
    }

    let mut initial = LatchState::all_x(n);
    for (name, value) in &file.initial {
        let &(id, parity) = by_name.get(name.as_str()).ok_or_else(|| LoadError::UnknownLatch {
            name: name.clone(),
            context: "initial".into(),
        })?;
        if parity == Parity::Odd {
            return Err(LoadError::OddInitial(name.clone()));
        }
        let v = parse_value_literal(value).ok_or_else(|| LoadError::BadInitialValue {
            latch: name.clone(),
            value: value.clone(),
        })?;
        initial.set(id, v);
    }

    let circuit = Circuit::new(names, parities, eo_pairs, oe_pairs, exprs);
    let mut warnings = Vec::new();
    for l in circuit.latches() {
        if circuit.right_neighbors(l).is_empty() {
            warnings.push(format!(
                "latch {} has no right neighbor and never back-pressures a producer",
                circuit.name(l)
            ));
        }
    }

    Ok(Loaded { circuit, initial, warnings })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("bad trace token {token:?} at offset {offset} (expected NAME+ or NAME-)")]
    BadToken { token: String, offset: usize },
    #[error("unknown latch {name:?} at offset {offset}")]
    UnknownLatch { name: String, offset: usize },
}

/// Parse a trace file: whitespace-separated `NAME+` / `NAME-` tokens,
/// oldest first.
pub fn parse_trace(src: &str, circuit: &Circuit) -> Result<Trace, TraceError> {
    let mut trace = Trace::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let token = &src[start..i];
        let (name, rise) = match token.as_bytes().last() {
            Some(b'+') => (&token[..token.len() - 1], true),
            Some(b'-') => (&token[..token.len() - 1], false),
            _ => {
                return Err(TraceError::BadToken { token: token.into(), offset: start });
            }
        };
        if name.is_empty() {
            return Err(TraceError::BadToken { token: token.into(), offset: start });
        }
        let latch = circuit
            .latch(name)
            .ok_or_else(|| TraceError::UnknownLatch { name: name.into(), offset: start })?;
        trace.push(if rise { Event::Rise(latch) } else { Event::Fall(latch) });
    }
    Ok(trace)
}
