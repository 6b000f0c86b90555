//! Python bindings: a `Circuit` class wrapping a validated netlist
//! plus its verification operations. Values cross the boundary as
//! `int` or `None` (for the undefined value); reports cross as plain
//! dicts mirroring the CLI's JSON output.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use fe_core::flow::{
    check_flow_equivalence, check_refinement, CheckOptions,
};
use fe_core::protocols::{
    build_protocol, check_fd_lemmas, check_rd_lemmas, ProtocolKind,
};
use fe_core::sync::SyncEvaluator;
use fe_core::waveform::render_waveform;
use fe_core::{async_eval, load_circuit, parse_trace, Loaded, Trace, Transparency, Value};

fn value_to_py(v: Value) -> Option<u64> {
    match v {
        Value::Num(n) => Some(n),
        Value::X => None,
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => py.None().into_bound(py),
        J::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        J::Number(n) => {
            if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        J::String(s) => s.into_pyobject(py)?.into_any(),
        J::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        J::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any()
        }
    })
}

fn parse_protocol(name: &str) -> PyResult<ProtocolKind> {
    name.parse().map_err(|e| PyValueError::new_err(format!("{e}")))
}

/// A validated latch-based circuit together with its initial state.
#[pyclass(name = "Circuit", frozen)]
struct PyCircuit {
    loaded: Loaded,
}

impl PyCircuit {
    fn latch(&self, name: &str) -> PyResult<fe_core::LatchId> {
        self.loaded
            .circuit
            .latch(name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown latch {name:?}")))
    }

    fn trace(&self, text: &str) -> PyResult<Trace> {
        parse_trace(text, &self.loaded.circuit)
            .map_err(|e| PyValueError::new_err(format!("{e}")))
    }
}

#[pymethods]
impl PyCircuit {
    /// Load and validate a circuit file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("cannot read {path}: {e}")))?;
        Self::loads(&text)
    }

    /// Parse and validate circuit JSON from a string.
    #[staticmethod]
    fn loads(text: &str) -> PyResult<Self> {
        let loaded =
            load_circuit(text).map_err(|e| PyValueError::new_err(format!("{e}")))?;
        Ok(PyCircuit { loaded })
    }

    fn latches(&self) -> Vec<String> {
        let c = &self.loaded.circuit;
        c.latches().map(|l| c.name(l).to_string()).collect()
    }

    fn evens(&self) -> Vec<String> {
        let c = &self.loaded.circuit;
        c.latches().filter(|&l| c.is_even(l)).map(|l| c.name(l).to_string()).collect()
    }

    fn odds(&self) -> Vec<String> {
        let c = &self.loaded.circuit;
        c.latches().filter(|&l| c.is_odd(l)).map(|l| c.name(l).to_string()).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.loaded.warnings.clone()
    }

    fn left_neighbors(&self, name: &str) -> PyResult<Vec<String>> {
        let c = &self.loaded.circuit;
        let l = self.latch(name)?;
        Ok(c.left_neighbors(l).iter().map(|&n| c.name(n).to_string()).collect())
    }

    fn right_neighbors(&self, name: &str) -> PyResult<Vec<String>> {
        let c = &self.loaded.circuit;
        let l = self.latch(name)?;
        Ok(c.right_neighbors(l).iter().map(|&n| c.name(n).to_string()).collect())
    }

    /// Synchronous values for cycles 0..=cycles, one row per cycle in
    /// latch order; the undefined value is None.
    fn sync_table(&self, cycles: usize) -> Vec<Vec<Option<u64>>> {
        SyncEvaluator::new(&self.loaded.circuit, &self.loaded.initial)
            .table(cycles)
            .into_iter()
            .map(|row| row.into_iter().map(value_to_py).collect())
            .collect()
    }

    fn sync_value(&self, cycle: usize, latch: &str) -> PyResult<Option<u64>> {
        let l = self.latch(latch)?;
        Ok(value_to_py(
            SyncEvaluator::new(&self.loaded.circuit, &self.loaded.initial).value(cycle, l),
        ))
    }

    /// Asynchronous value of one latch after a trace ("A+ B- ...").
    /// Raises ValueError if the trace drives a transparency cycle.
    fn async_value(&self, trace: &str, latch: &str) -> PyResult<Option<u64>> {
        let t = self.trace(trace)?;
        let l = self.latch(latch)?;
        async_eval(&self.loaded.circuit, &self.loaded.initial, &t, l)
            .map(value_to_py)
            .map_err(|e| PyValueError::new_err(e.describe(&self.loaded.circuit)))
    }

    /// True if the latch is transparent after the trace.
    fn is_transparent(&self, trace: &str, latch: &str) -> PyResult<bool> {
        let t = self.trace(trace)?;
        let l = self.latch(latch)?;
        Ok(self.loaded.circuit.transparency(&t, l) == Transparency::Transparent)
    }

    /// Replay a trace against a protocol graph.
    fn admits<'py>(
        &self,
        py: Python<'py>,
        protocol_name: &str,
        trace: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let kind = parse_protocol(protocol_name)?;
        let t = self.trace(trace)?;
        let graph = build_protocol(kind, &self.loaded.circuit);
        let dict = PyDict::new(py);
        match graph.admits(&t) {
            fe_core::Admission::Final(_) => {
                dict.set_item("admitted", true)?;
            }
            fe_core::Admission::RejectedAt { index, event } => {
                dict.set_item("admitted", false)?;
                dict.set_item("index", index)?;
                dict.set_item("event", self.loaded.circuit.format_event(event))?;
            }
        }
        Ok(dict)
    }

    /// Bounded flow-equivalence check; returns the verdict as a dict.
    #[pyo3(signature = (protocol_name, depth=12, shortest=false, threads=0))]
    fn check<'py>(
        &self,
        py: Python<'py>,
        protocol_name: &str,
        depth: usize,
        shortest: bool,
        threads: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let kind = parse_protocol(protocol_name)?;
        let verdict = check_flow_equivalence(
            &self.loaded.circuit,
            &self.loaded.initial,
            kind,
            CheckOptions { depth, shortest, threads },
        );
        json_to_py(py, &verdict.to_json(&self.loaded.circuit))
    }

    /// Exact trace-language refinement between two protocols.
    fn refine<'py>(
        &self,
        py: Python<'py>,
        from_protocol: &str,
        to_protocol: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let left = build_protocol(parse_protocol(from_protocol)?, &self.loaded.circuit);
        let right = build_protocol(parse_protocol(to_protocol)?, &self.loaded.circuit);
        let result = check_refinement(&left, &right)
            .map_err(|e| PyValueError::new_err(format!("{e}")))?;
        json_to_py(py, &result.to_json(&self.loaded.circuit))
    }

    /// Exhaustive rise-decoupled lemma checks up to a depth bound.
    #[pyo3(signature = (depth=12))]
    fn rd_lemmas<'py>(&self, py: Python<'py>, depth: usize) -> PyResult<Bound<'py, PyDict>> {
        let report = check_rd_lemmas(&self.loaded.circuit, depth);
        let dict = PyDict::new(py);
        dict.set_item("passed", report.passed())?;
        dict.set_item("traces_checked", report.traces_checked)?;
        let violations: Vec<String> =
            report.violations.iter().map(|v| v.describe(&self.loaded.circuit)).collect();
        dict.set_item("violations", violations)?;
        Ok(dict)
    }

    /// Exhaustive fall-decoupled lemma checks up to a depth bound.
    #[pyo3(signature = (depth=12))]
    fn fd_lemmas<'py>(&self, py: Python<'py>, depth: usize) -> PyResult<Bound<'py, PyDict>> {
        let report = check_fd_lemmas(&self.loaded.circuit, depth);
        let dict = PyDict::new(py);
        dict.set_item("passed", report.passed())?;
        dict.set_item("traces_checked", report.traces_checked)?;
        let violations: Vec<String> =
            report.violations.iter().map(|v| v.describe(&self.loaded.circuit)).collect();
        dict.set_item("violations", violations)?;
        Ok(dict)
    }

    /// ASCII waveform of a trace.
    fn waveform(&self, trace: &str) -> PyResult<String> {
        let t = self.trace(trace)?;
        Ok(render_waveform(&self.loaded.circuit, &self.loaded.initial, &t))
    }

    /// Graphviz DOT text of a protocol marked graph.
    fn dot(&self, protocol_name: &str) -> PyResult<String> {
        let kind = parse_protocol(protocol_name)?;
        Ok(build_protocol(kind, &self.loaded.circuit).to_dot(&self.loaded.circuit))
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(latches={}, pairs={})",
            self.loaded.circuit.latch_count(),
            self.loaded.circuit.pairs().count()
        )
    }
}

#[pymodule]
fn fe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add("PROTOCOLS", vec!["desync", "rise", "fall"])?;
    Ok(())
}
