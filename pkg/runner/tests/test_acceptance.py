"""Runner acceptance: serializer properties and process isolation.

The isolation criterion drives the real runner through the pipeline's
bridge, i.e. through the public subprocess interface, exactly as a
benchmark run would.
"""

from __future__ import annotations

import time
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from codeloop_runner.executor import execute_one
from codeloop_runner.protocol import DEFAULT_SERIALIZE_CFG
from codeloop_runner.serialize import serialize_value
from conftest import RUNNER_CMD, make_job


def _ok(name: str) -> None:
    print(f"[ACCEPTANCE] {name}: PASS")


def _random_arrays(n: int):
    """n arrays with dims 0..4 and sizes up to 1e6 elements, mixed dtypes."""
    rng = np.random.default_rng(20240803)
    dtypes = [np.float64, np.float32, np.int64, np.int32, np.bool_]
    big_shapes = [(1_000_000,), (1000, 1000), (30, 30, 30, 37), (100, 100, 100)]
    for i in range(n):
        if i < len(big_shapes):
            shape = big_shapes[i]
        else:
            dims = i % 5
            shape = tuple(int(rng.integers(1, 9)) for _ in range(dims))
        dtype = dtypes[i % len(dtypes)]
        if dtype in (np.float64, np.float32):
            arr = rng.normal(loc=rng.normal() * 10, scale=5, size=shape).astype(dtype)
        elif dtype is np.bool_:
            arr = rng.random(size=shape) < 0.5
        else:
            arr = rng.integers(-1000, 1000, size=shape).astype(dtype)
        yield arr


def test_criterion_serializer_statistics_preview_shape_dtype():
    """1000 randomized arrays: stats within 1e-9 relative, preview capped,
    shape/dtype exact."""
    cfg = dict(DEFAULT_SERIALIZE_CFG)
    checked = 0
    for arr in _random_arrays(1000):
        doc = serialize_value(arr, cfg)
        assert doc["kind"] == "nd_array"
        assert doc["shape"] == list(arr.shape)
        assert doc["dtype"] == str(arr.dtype)
        assert len(doc["preview"]) <= cfg["preview_cap"]
        truth = arr.astype(np.float64)
        stats = doc["stats"]
        assert stats["nan_count"] == 0
        assert stats["min"] == pytest.approx(float(np.min(truth)), rel=1e-9, abs=1e-12)
        assert stats["max"] == pytest.approx(float(np.max(truth)), rel=1e-9, abs=1e-12)
        assert stats["mean"] == pytest.approx(float(np.mean(truth)), rel=1e-9, abs=1e-12)
        assert stats["std"] == pytest.approx(float(np.std(truth)), rel=1e-9, abs=1e-12)
        checked += 1
    assert checked == 1000
    _ok("serializer stats/preview/shape/dtype over 1000 random arrays")


def test_criterion_table_and_figure_and_ablation():
    cfg = dict(DEFAULT_SERIALIZE_CFG)
    frame = pd.DataFrame({"a": np.arange(12), "b": np.linspace(0, 1, 12), "c": list("abcdefghijkl")})
    doc = serialize_value(frame, cfg)
    assert doc["shape"] == [12, 3]
    assert "a (int64)" in doc["preview"] and "c (object)" in doc["preview"]
    assert "(2 rows elided)" in doc["preview"]

    plot_job = make_job(
        "import matplotlib.pyplot as plt\nplt.plot([0, 1], [0, 1])\nresult = 'ok'",
        capture_figures=True,
    )
    result = execute_one(plot_job)
    svg = result["figure_svg"]
    assert svg is not None
    ET.fromstring(svg)
    assert len(svg.encode("utf-8")) <= 200 * 1024

    ablated = serialize_value(np.arange(4), dict(cfg, enabled=False))
    assert ablated["kind"] == "text"
    assert ablated["preview"] == "[0 1 2 3]"
    _ok("table head/tail + figure SVG + serialization ablation")


def test_criterion_isolation_and_timeout():
    """Fresh process per input: no state carryover; runaway code is killed
    within timeout + 1 s and reported as timed out."""
    bridge_mod = pytest.importorskip("codeloop.bridge")
    types_mod = pytest.importorskip("codeloop.types")

    bridge = bridge_mod.ExecBridge(RUNNER_CMD)
    mutator = (
        "import builtins\n"
        "seen = getattr(builtins, '_leak_probe', 0)\n"
        "builtins._leak_probe = seen + 1\n"
        "result = seen\n"
    )
    job = bridge_mod.ExecutionJob(
        candidate=types_mod.CodeCandidate(
            revision=0, source=mutator, provenance=types_mod.Provenance.INITIAL, prompt_digest="x"
        ),
        inputs=(
            bridge_mod.TestCaseInput(index=1, setup_snippet="pad = 1"),
            bridge_mod.TestCaseInput(index=2, setup_snippet="pad = 2"),
        ),
        timeout=20.0,
    )
    outcomes = bridge.run_candidate(job)
    assert [o.error for o in outcomes] == [None, None]
    # input 1's builtins mutation is invisible to input 2
    assert [o.output_serialized.preview for o in outcomes] == ["0", "0"]

    timeout = 2.0
    loop_job = bridge_mod.ExecutionJob(
        candidate=types_mod.CodeCandidate(
            revision=0, source="while True:\n    pass", provenance=types_mod.Provenance.INITIAL, prompt_digest="x"
        ),
        inputs=(bridge_mod.TestCaseInput(index=1, setup_snippet="pad = 1"),),
        timeout=timeout,
    )
    started = time.monotonic()
    (outcome,) = bridge.run_candidate(loop_job)
    elapsed = time.monotonic() - started
    assert outcome.timed_out
    assert "timeout" in outcome.error
    assert outcome.duration_ms >= timeout * 1000
    assert elapsed < timeout + 1.0, f"kill took {elapsed - timeout:.2f}s past the timeout"
    _ok("process isolation + timeout kill")
