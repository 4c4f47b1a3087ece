from __future__ import annotations

import re

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codeloop_runner.serialize import make_absent, serialize_value

KINDS = {"nd_array", "table", "tensor", "figure_svg", "scalar", "text", "collection", "opaque", "absent"}


def test_long_vector_preview_shows_exactly_three_edge_items(cfg):
    arr = np.arange(1000)
    doc = serialize_value(arr, cfg)
    assert doc["kind"] == "nd_array"
    assert doc["truncated"] is True
    # independent oracle: the numbers visible in the preview are precisely
    # the first three and last three entries, with an elision marker between
    assert "..." in doc["preview"]
    numbers = [int(tok) for tok in re.findall(r"-?\d+", doc["preview"])]
    assert numbers == [0, 1, 2, 997, 998, 999]


def test_small_array_prints_full_and_untruncated(cfg):
    doc = serialize_value(np.array([[1, 2], [3, 4]]), cfg)
    assert doc["truncated"] is False
    assert "..." not in doc["preview"]
    assert doc["shape"] == [2, 2]
    assert doc["stats"]["min"] == 1.0
    assert doc["stats"]["max"] == 4.0
    assert doc["stats"]["mean"] == 2.5  # (1+2+3+4)/4, analytic
    assert doc["stats"]["std"] == pytest.approx(1.25 ** 0.5)  # population
    assert doc["stats"]["nan_count"] == 0


def test_absent_marker():
    doc = make_absent()
    assert doc["kind"] == "absent"


def test_table_reports_head_tail_and_column_dtypes(cfg):
    frame = pd.DataFrame(
        {
            "a": np.arange(12, dtype=np.int64),
            "b": np.linspace(0.0, 1.0, 12),
            "c": [f"s{i}" for i in range(12)],
        }
    )
    doc = serialize_value(frame, cfg)
    assert doc["kind"] == "table"
    assert doc["shape"] == [12, 3]
    assert doc["truncated"] is True  # 12 > head(5) + tail(5)
    assert "a (int64)" in doc["preview"]
    assert "b (float64)" in doc["preview"]
    assert "c (object)" in doc["preview"]
    assert "(2 rows elided)" in doc["preview"]
    # head rows 0..4 and tail rows 7..11 present, middle absent
    assert "s0" in doc["preview"] and "s4" in doc["preview"]
    assert "s7" in doc["preview"] and "s11" in doc["preview"]
    assert "s5" not in doc["preview"] and "s6" not in doc["preview"]
    assert doc["dtype"] == "a:int64,b:float64,c:object"


def test_short_table_prints_whole(cfg):
    frame = pd.DataFrame({"a": [1, 2, 3]})
    doc = serialize_value(frame, cfg)
    assert doc["truncated"] is False
    assert doc["shape"] == [3, 1]


def test_series_is_single_column_table(cfg):
    doc = serialize_value(pd.Series([1.0, 2.0], name="v"), cfg)
    assert doc["kind"] == "table"
    assert doc["shape"] == [2, 1]


def test_scalars_and_strings_use_capped_repr(cfg):
    assert serialize_value(3, cfg) == {"kind": "scalar", "preview": "3", "truncated": False}
    assert serialize_value("ab", cfg)["preview"] == "'ab'"
    long = "x" * 5000
    doc = serialize_value(long, cfg)
    assert len(doc["preview"]) <= cfg["preview_cap"]
    assert doc["truncated"] is True
    assert serialize_value(None, cfg)["preview"] == "None"
    assert serialize_value(np.float64(1.5), cfg)["dtype"] == "float64"


def test_collections_up_to_twenty_elementwise(cfg):
    doc = serialize_value(list(range(20)), cfg)
    assert doc["kind"] == "collection"
    assert doc["truncated"] is False
    assert doc["preview"].startswith("[0, 1, 2")
    over = serialize_value(list(range(25)), cfg)
    assert over["truncated"] is True
    assert "(+5 more)" in over["preview"]
    mapping = serialize_value({"k": [1, 2]}, cfg)
    assert mapping["preview"] == "{'k': [1, 2]}"


def test_set_previews_are_deterministic(cfg):
    value = {"b", "a", "c"}
    assert serialize_value(value, cfg) == serialize_value(set("cba"), cfg)
    assert serialize_value(value, cfg)["preview"] == "['a', 'b', 'c']"


def test_opaque_fallback_names_the_type(cfg):
    class Gizmo:
        pass

    doc = serialize_value(Gizmo(), cfg)
    assert doc["kind"] == "opaque"
    assert "Gizmo" in doc["preview"]


def test_broken_repr_inside_collection_degrades(cfg):
    class Cursed:
        def __repr__(self):
            raise RuntimeError("no repr for you")

    doc = serialize_value([1, Cursed()], cfg)
    assert doc["kind"] == "collection"
    assert "unreprable" in doc["preview"]


def test_nan_aware_stats_match_nan_oracles(cfg):
    rng = np.random.default_rng(7)
    arr = rng.normal(size=500)
    arr[rng.integers(0, 500, size=40)] = np.nan
    doc = serialize_value(arr, cfg)
    stats = doc["stats"]
    assert stats["nan_count"] == int(np.isnan(arr).sum())
    assert stats["min"] == pytest.approx(np.nanmin(arr), rel=1e-9)
    assert stats["max"] == pytest.approx(np.nanmax(arr), rel=1e-9)
    assert stats["mean"] == pytest.approx(np.nanmean(arr), rel=1e-9)
    assert stats["std"] == pytest.approx(np.nanstd(arr), rel=1e-9)


def test_all_nan_array_reports_counts_only(cfg):
    doc = serialize_value(np.full(8, np.nan), cfg)
    assert doc["stats"]["nan_count"] == 8
    assert doc["stats"]["min"] is None


def test_ablated_mode_emits_print_rendering(cfg):
    cfg["enabled"] = False
    arr = np.arange(6)
    doc = serialize_value(arr, cfg)
    assert doc["kind"] == "text"
    assert doc["preview"] == str(arr)
    assert serialize_value({"a": 1}, cfg) == {"kind": "text", "preview": "{'a': 1}", "truncated": False}


def test_torch_tensor_serializes_as_tensor_kind(cfg):
    torch = pytest.importorskip("torch")
    value = torch.arange(12, dtype=torch.float32).reshape(3, 4)
    doc = serialize_value(value, cfg)
    assert doc["kind"] == "tensor"
    assert doc["dtype"] == "torch.float32"
    assert doc["shape"] == [3, 4]
    assert doc["stats"]["mean"] == pytest.approx(5.5)


def test_preview_bound_over_wide_size_range(cfg):
    for size in (0, 1, 7, 1_000, 100_000, 1_000_000):
        doc = serialize_value(np.arange(size), cfg)
        assert len(doc["preview"]) <= cfg["preview_cap"], size
        assert doc["shape"] == [size]
    empty = serialize_value(np.array([]), cfg)
    assert empty.get("stats") is None  # no stats key for empty payloads


# --- totality property --------------------------------------------------------

_scalars = st.none() | st.booleans() | st.integers() | st.floats() | st.text(max_size=8) | st.binary(max_size=8)
_values = st.recursive(
    _scalars,
    lambda children: st.lists(children, max_size=5)
    | st.dictionaries(st.text(max_size=4), children, max_size=4)
    | st.tuples(children, children),
    max_leaves=12,
)


@settings(max_examples=200, deadline=None)
@given(value=_values)
def test_serialize_never_raises_over_random_nested_values(value):
    doc = serialize_value(value, dict(preview_cap=200, edge_items=3, head_tail_rows=5, svg_cap_kib=200, enabled=True))
    assert doc["kind"] in KINDS
    assert len(doc["preview"]) <= 200


@settings(max_examples=50, deadline=None)
@given(
    data=st.data(),
    dims=st.integers(0, 3),
    dtype=st.sampled_from([np.float64, np.float32, np.int64, np.int32, bool]),
)
def test_serialize_never_raises_over_random_arrays(data, dims, dtype):
    shape = tuple(data.draw(st.integers(0, 6)) for _ in range(dims))
    arr = np.zeros(shape, dtype=dtype)
    doc = serialize_value(arr, dict(preview_cap=500, edge_items=3, head_tail_rows=5, svg_cap_kib=200, enabled=True))
    assert doc["kind"] == "nd_array"
    assert doc["shape"] == list(shape)
    assert doc["dtype"] == str(arr.dtype)
