#!/usr/bin/env python3
"""Smoke test for the fe_py extension module.

Builds nothing itself: run `cargo build -p fe-py` (or --release) first,
then `python3 python/smoke_test.py` from the repository root. The
script locates the compiled cdylib, exposes it as an importable module,
and drives the main operations end to end.
"""

import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_fe_py():
    candidates = [
        REPO / "target" / "release" / "libfe_py.so",
        REPO / "target" / "debug" / "libfe_py.so",
        REPO / "target" / "release" / "libfe_py.dylib",
        REPO / "target" / "debug" / "libfe_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("fe_py is not built; run `cargo build -p fe-py` first")
    stage = Path(tempfile.mkdtemp(prefix="fe_py_smoke_"))
    # CPython loads extension modules named fe_py.so on linux and mac alike
    shutil.copy2(built, stage / "fe_py.so")
    sys.path.insert(0, str(stage))
    import fe_py  # noqa: E402

    return fe_py


def main():
    fe_py = import_fe_py()
    assert fe_py.PROTOCOLS == ["desync", "rise", "fall"]

    cex = fe_py.Circuit.load(str(REPO / "circuits" / "cex.json"))
    assert cex.latches() == ["A", "C", "SRC", "B", "SNK"]
    assert cex.evens() == ["A", "C"]
    assert cex.left_neighbors("C") == ["B", "SNK"]
    assert cex.right_neighbors("A") == ["SRC", "B"]

    # synchronous execution: C counts 1, 2, 3 after the undefined start
    table = cex.sync_table(3)
    c_col = cex.latches().index("C")
    assert [row[c_col] for row in table] == [None, 1, 2, 3]
    assert cex.sync_value(0, "B") is None

    # the counterexample trace: admitted by desync, rejected by rise at
    # index 8, and it latches the cycle-1 value of C a second time
    tc = (REPO / "circuits" / "tc.trace").read_text().strip()
    assert cex.admits("desync", tc) == {"admitted": True}
    rejection = cex.admits("rise", tc)
    assert rejection == {"admitted": False, "index": 8, "event": "C-"}
    assert cex.async_value(tc, "C") == 1
    assert cex.is_transparent(tc, "B")

    # bounded flow-equivalence checking
    violation = cex.check("desync", depth=9)
    assert violation["verdict"] == "violation"
    assert violation["latch"] == "C"
    assert violation["got"] == 1 and violation["expected"] == 2
    assert violation["fall_count"] == 2
    assert cex.check("rise", depth=10)["verdict"] == "pass"
    assert cex.check("fall", depth=10, threads=2)["verdict"] == "pass"

    # refinement: rise-decoupled is a restriction of desynchronization
    assert cex.refine("rise", "desync") == {"refinement": "included"}
    witness = cex.refine("desync", "rise")
    assert witness["refinement"] == "witness"
    assert witness["event"].endswith("-")

    # lemma suites
    rd = cex.rd_lemmas(depth=8)
    assert rd["passed"] and rd["traces_checked"] > 100
    fd = cex.fd_lemmas(depth=8)
    assert fd["passed"]

    # rendering
    art = cex.waveform(tc)
    assert "\\" in art and "/" in art
    dot = cex.dot("desync")
    assert dot.startswith("digraph")

    # a second circuit via loads(), including validation warnings
    ring2 = fe_py.Circuit.loads((REPO / "circuits" / "ring2.json").read_text())
    assert ring2.odds() == ["O"]
    assert ring2.async_value("O-", "O") == 1
    assert ring2.check("fall", depth=12)["verdict"] == "pass"

    # error paths surface as ValueError
    for bad in (lambda: cex.check("bogus"), lambda: cex.async_value("Q+", "C")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
