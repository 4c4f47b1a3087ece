"""The job/result wire protocol between the bridge and the sandbox runner.

One job document goes to the runner's stdin, one result document comes
back on stdout, both JSON. The runner exits 0 unless the protocol itself
failed. This module is the protocol's single source of truth on the
driving side; the runner package implements the same documented schema.

Job document:
    {"schema": 1, "source": str, "setup_snippet": str, "output_var": str,
     "serialize_cfg": {"enabled": bool, "preview_cap": int, "edge_items": int,
                       "head_tail_rows": int, "svg_cap_kib": int},
     "capture_figures": bool}

Result document:
    {"schema": 1, "error": str|null, "input_serialized": [value-doc...],
     "output_serialized": value-doc|null, "figure_svg": str|null,
     "duration_ms": int, "warnings"?: [str]}

Value document (serialized runtime value):
    {"kind": "nd_array"|"table"|"tensor"|"figure_svg"|"scalar"|"text"|
             "collection"|"opaque"|"absent",
     "preview": str, "truncated": bool, "name"?: str, "dtype"?: str,
     "shape"?: [int...], "stats"?: {"min","max","mean","std","nan_count"},
     "svg"?: str, "note"?: str}
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

SCHEMA_VERSION = 1

# Serialization bounds: enough context for a refinement prompt with two
# inputs without blowing the model's window.
PREVIEW_CAP = 2000
EDGE_ITEMS = 3
HEAD_TAIL_ROWS = 5
SVG_CAP_KIB = 200

VALUE_KINDS = frozenset(
    {"nd_array", "table", "tensor", "figure_svg", "scalar", "text", "collection", "opaque", "absent"}
)


def make_serialize_cfg(enabled: bool) -> dict[str, Any]:
    return {
        "enabled": enabled,
        "preview_cap": PREVIEW_CAP,
        "edge_items": EDGE_ITEMS,
        "head_tail_rows": HEAD_TAIL_ROWS,
        "svg_cap_kib": SVG_CAP_KIB,
    }


def make_job_doc(
    source: str,
    setup_snippet: str,
    output_var: str,
    serialize_enabled: bool = True,
    capture_figures: bool = False,
) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "source": source,
        "setup_snippet": setup_snippet,
        "output_var": output_var,
        "serialize_cfg": make_serialize_cfg(serialize_enabled),
        "capture_figures": capture_figures,
    }


@dataclass(frozen=True)
class SerializedValue:
    """Bridge-side view of a value document."""

    kind: str
    preview: str
    truncated: bool = False
    name: str | None = None
    dtype: str | None = None
    shape: tuple[int, ...] | None = None
    stats: dict[str, float] | None = None
    svg: str | None = None
    note: str | None = None

    @staticmethod
    def from_doc(doc: dict[str, Any]) -> "SerializedValue":
        kind = doc.get("kind")
        if kind not in VALUE_KINDS:
            raise ValueError(f"unknown serialized value kind {kind!r}")
        shape = doc.get("shape")
        return SerializedValue(
            kind=kind,
            preview=str(doc.get("preview", "")),
            truncated=bool(doc.get("truncated", False)),
            name=doc.get("name"),
            dtype=doc.get("dtype"),
            shape=tuple(shape) if shape is not None else None,
            stats=doc.get("stats"),
            svg=doc.get("svg"),
            note=doc.get("note"),
        )

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"kind": self.kind, "preview": self.preview, "truncated": self.truncated}
        for key in ("name", "dtype", "svg", "note"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        if self.shape is not None:
            doc["shape"] = list(self.shape)
        if self.stats is not None:
            doc["stats"] = self.stats
        return doc


ABSENT_VALUE = SerializedValue(kind="absent", preview="<no binding>")


def render_value(value: SerializedValue) -> str:
    """One-value rendering used inside refinement prompts."""
    parts = []
    if value.name:
        parts.append(f"{value.name} =")
    parts.append(value.preview if value.preview else f"<{value.kind}>")
    meta = []
    if value.dtype:
        meta.append(f"dtype={value.dtype}")
    if value.shape is not None:
        meta.append(f"shape={list(value.shape)}")
    if value.stats:
        stats = ", ".join(f"{k}={value.stats[k]}" for k in ("min", "max", "mean", "std", "nan_count") if k in value.stats)
        meta.append(f"stats[{stats}]")
    if meta:
        parts.append(f"({'; '.join(meta)})")
    return " ".join(parts)
