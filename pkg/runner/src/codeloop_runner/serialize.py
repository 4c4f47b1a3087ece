"""Turn runtime values into compact, model-readable value documents.

Arrays, tables, and framework tensors become edge-item previews plus dtype,
shape, and summary statistics; figures become SVG; everything else falls
back to capped reprs or an opaque marker. Serialization is total: any
internal failure degrades to an opaque document, never an exception.

Conventions (the wire contract documents these):
- statistics are NaN-aware (NaN entries are counted, then ignored);
- std uses the population convention (divide by n);
- set previews are sorted so documents stay deterministic.
"""

from __future__ import annotations

from typing import Any

import numpy as np

ELEMENT_REPR_CAP = 120


def make_value(kind: str, preview: str, *, truncated: bool = False, **extra: Any) -> dict[str, Any]:
    doc = {"kind": kind, "preview": preview, "truncated": truncated}
    doc.update({k: v for k, v in extra.items() if v is not None})
    return doc


def make_absent() -> dict[str, Any]:
    return make_value("absent", "<no binding>")


def _cap(text: str, cap: int) -> tuple[str, bool]:
    if len(text) <= cap:
        return text, False
    return text[:cap], True


def _stats(arr: np.ndarray) -> dict[str, Any] | None:
    if arr.size == 0 or arr.dtype == object:
        return None
    if not (np.issubdtype(arr.dtype, np.number) or arr.dtype == np.bool_):
        return None
    if np.issubdtype(arr.dtype, np.complexfloating):
        return None
    if np.issubdtype(arr.dtype, np.floating):
        nan_count = int(np.isnan(arr).sum())
        if arr.dtype != np.float64:
            # compute in float64 so low-precision dtypes report true stats
            arr = arr.astype(np.float64)
    else:
        nan_count = 0
    if nan_count == arr.size:
        return {"min": None, "max": None, "mean": None, "std": None, "nan_count": nan_count}
    with np.errstate(all="ignore"):
        return {
            "min": float(np.nanmin(arr)),
            "max": float(np.nanmax(arr)),
            "mean": float(np.nanmean(arr, dtype=np.float64)),
            "std": float(np.nanstd(arr, dtype=np.float64)),  # population std (ddof=0)
            "nan_count": nan_count,
        }


def _array_doc(arr: np.ndarray, cfg: dict, kind: str, dtype_str: str) -> dict[str, Any]:
    edge = int(cfg["edge_items"])
    threshold = 2 * edge
    preview = np.array2string(arr, threshold=threshold, edgeitems=edge)
    elided = arr.size > threshold and any(dim > threshold for dim in arr.shape)
    preview, clipped = _cap(preview, int(cfg["preview_cap"]))
    return make_value(
        kind,
        preview,
        truncated=elided or clipped,
        dtype=dtype_str,
        shape=list(arr.shape),
        stats=_stats(arr),
    )


def _table_doc(frame, cfg: dict) -> dict[str, Any]:
    head_tail = int(cfg["head_tail_rows"])
    rows, cols = frame.shape
    dtype_str, _ = _cap(",".join(f"{c}:{dt}" for c, dt in frame.dtypes.items()), 200)
    lines = ["columns: " + ", ".join(f"{c} ({dt})" for c, dt in frame.dtypes.items())]
    if rows <= 2 * head_tail:
        lines.append(frame.to_string())
        elided = False
    else:
        lines.append(frame.head(head_tail).to_string())
        lines.append(f"... ({rows - 2 * head_tail} rows elided) ...")
        lines.append(frame.tail(head_tail).to_string(header=False))
        elided = True
    preview, clipped = _cap("\n".join(lines), int(cfg["preview_cap"]))
    return make_value(
        "table",
        preview,
        truncated=elided or clipped,
        dtype=dtype_str,
        shape=[int(rows), int(cols)],
    )


def _element_repr(value: Any) -> str:
    try:
        text = repr(value)
    except Exception:
        text = f"<unreprable {type(value).__name__}>"
    return text if len(text) <= ELEMENT_REPR_CAP else text[:ELEMENT_REPR_CAP] + "..."


def _collection_doc(value: Any, cfg: dict) -> dict[str, Any]:
    limit = 20
    if isinstance(value, dict):
        items = [f"{_element_repr(k)}: {_element_repr(v)}" for k, v in list(value.items())[:limit]]
        open_, close = "{", "}"
        size = len(value)
    else:
        elements = list(value)
        if isinstance(value, (set, frozenset)):
            elements = sorted(elements, key=_element_repr)
        items = [_element_repr(e) for e in elements[:limit]]
        open_, close = ("(", ")") if isinstance(value, tuple) else ("[", "]")
        size = len(elements)
    over = size > limit
    body = ", ".join(items) + (f", ... (+{size - limit} more)" if over else "")
    preview, clipped = _cap(f"{open_}{body}{close}", int(cfg["preview_cap"]))
    return make_value("collection", preview, truncated=over or clipped, shape=[size])


def _module_root(value: Any) -> str:
    return type(value).__module__.split(".")[0]


def serialize_value(value: Any, cfg: dict) -> dict[str, Any]:
    """Total over runtime values; failures degrade to an opaque document."""
    try:
        return _serialize(value, cfg)
    except Exception as exc:  # noqa: BLE001 - totality is the contract
        return make_value(
            "opaque",
            f"<{type(value).__module__}.{type(value).__qualname__}>",
            note=f"serialization failed: {type(exc).__name__}: {exc}",
        )


def _serialize(value: Any, cfg: dict) -> dict[str, Any]:
    cap = int(cfg["preview_cap"])

    if not cfg.get("enabled", True):
        # Serialization ablated: raw print rendering, same schema.
        preview, clipped = _cap(str(value), cap)
        return make_value("text", preview, truncated=clipped)

    root = _module_root(value)

    if root == "matplotlib" and type(value).__name__ == "Figure":
        from . import figures

        svg, warning = figures.render_figure(value, cfg)
        if svg is None:
            return make_value("opaque", "<matplotlib.figure.Figure>", note=warning)
        return make_value("figure_svg", "<figure rendered as SVG>", svg=svg)

    if isinstance(value, np.ndarray):
        return _array_doc(value, cfg, "nd_array", str(value.dtype))
    if isinstance(value, np.generic):
        preview, clipped = _cap(repr(value), cap)
        return make_value("scalar", preview, truncated=clipped, dtype=str(value.dtype))

    if root == "pandas":
        if hasattr(value, "columns") and hasattr(value, "dtypes"):
            return _table_doc(value, cfg)
        if hasattr(value, "to_frame"):
            return _table_doc(value.to_frame(), cfg)

    if root == "torch" and hasattr(value, "detach"):
        arr = value.detach().cpu().numpy()
        return _array_doc(arr, cfg, "tensor", str(value.dtype))
    if root == "tensorflow" and hasattr(value, "numpy") and hasattr(value, "dtype"):
        arr = np.asarray(value.numpy())
        return _array_doc(arr, cfg, "tensor", value.dtype.name)

    if value is None or isinstance(value, (bool, int, float, complex, str, bytes)):
        preview, clipped = _cap(repr(value), cap)
        return make_value("scalar", preview, truncated=clipped)

    if isinstance(value, (list, tuple, dict, set, frozenset)):
        return _collection_doc(value, cfg)

    return make_value("opaque", f"<{type(value).__module__}.{type(value).__qualname__}>")
