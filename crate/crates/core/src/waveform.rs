//! ASCII waveform rendering of clock traces.
//!
//! One row per latch: `/` marks that latch's rise, `\` its fall, `‾`
//! fills transparent stretches and `_` opaque ones. The value latched
//! at each fall (from the asynchronous semantics) is printed beneath
//! the fall's column. Columns line up with event indices.

use crate::async_exec::AsyncState;
use crate::circuit::Circuit;
use crate::model::{Event, LatchState, Parity, Trace, Transparency};

const LEAD_IN: usize = 2;

pub fn render_waveform(c: &Circuit, st0: &LatchState, t: &Trace) -> String {
    // value latched at each fall, replayed once up front
    let mut state = AsyncState::new(c, st0);
    let mut annotations: Vec<Option<String>> = Vec::with_capacity(t.len());
    let mut had_error = false;
    for &e in t.events() {
        let note = match state.step(e) {
            Ok(()) => match e {
                Event::Fall(l) => Some(state.stored(l).to_string()),
                Event::Rise(_) => None,
            },
            Err(_) => {
                // keep folding: later events still shape the waveform
                had_error = true;
                Some("?".to_string())
            }
        };
        annotations.push(note);
    }

    let tokens: Vec<String> = t.events().iter().map(|&e| c.format_event(e)).collect();
    let widths: Vec<usize> = tokens
        .iter()
        .zip(&annotations)
        .map(|(tok, ann)| {
            let ann_len = ann.as_deref().map_or(0, str::len);
            tok.len().max(ann_len) + 2
        })
        .collect();

    let name_col = c.latches().map(|l| c.name(l).len()).max().unwrap_or(0).max(5);
    let mut out = String::new();

    // header with the event tokens
    out.push_str(&" ".repeat(name_col + 1 + LEAD_IN));
    for (tok, w) in tokens.iter().zip(&widths) {
        out.push_str(tok);
        out.push_str(&" ".repeat(w - tok.len()));
    }
    out.push('\n');

    for l in c.latches() {
        let mut row = format!("{:<width$} ", c.name(l), width = name_col);
        let mut phase = match c.parity(l) {
            Parity::Odd => Transparency::Transparent,
            Parity::Even => Transparency::Opaque,
        };
        let fill = |p: Transparency| if p == Transparency::Transparent { '‾' } else { '_' };
        for _ in 0..LEAD_IN {
            row.push(fill(phase));
        }
        let mut notes = " ".repeat(name_col + 1 + LEAD_IN);
        let mut any_note = false;
        for (i, &e) in t.events().iter().enumerate() {
            let w = widths[i];
            if e.latch() == l {
                let mark = if e.is_rise() {
                    phase = Transparency::Transparent;
                    '/'
                } else {
                    phase = Transparency::Opaque;
                    '\\'
                };
                row.push(mark);
                for _ in 1..w {
                    row.push(fill(phase));
                }
                if e.is_fall() {
                    let text = annotations[i].as_deref().unwrap_or("?");
                    notes.push_str(text);
                    notes.push_str(&" ".repeat(w - text.len()));
                    any_note = true;
                } else {
                    notes.push_str(&" ".repeat(w));
                }
            } else {
                for _ in 0..w {
                    row.push(fill(phase));
                }
                notes.push_str(&" ".repeat(w));
            }
        }
        out.push_str(row.trim_end());
        out.push('\n');
        if any_note {
            out.push_str(notes.trim_end());
            out.push('\n');
        }
    }
    if had_error {
        out.push_str("? = no defined value (combinational cycle)\n");
    }
    out
}
