#![allow(dead_code)]

use fe_core::{load_circuit, Loaded};

pub const CEX: &str = include_str!("../../../../circuits/cex.json");
pub const RING2: &str = include_str!("../../../../circuits/ring2.json");
pub const PIPE3: &str = include_str!("../../../../circuits/pipe3.json");
pub const TC_TRACE: &str = include_str!("../../../../circuits/tc.trace");

pub fn circuits() -> Vec<(&'static str, Loaded)> {
    [("cex", CEX), ("ring2", RING2), ("pipe3", PIPE3)]
        .into_iter()
        .map(|(name, src)| (name, load_circuit(src).expect("example circuits are valid")))
        .collect()
}

pub fn cex() -> Loaded {
    load_circuit(CEX).unwrap()
}

pub fn ring2() -> Loaded {
    load_circuit(RING2).unwrap()
}

pub fn pipe3() -> Loaded {
    load_circuit(PIPE3).unwrap()
}
