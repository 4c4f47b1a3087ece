"""Wire protocol: one JSON job on stdin, one JSON result on stdout.

Job document:
    {"schema": 1, "source": str, "setup_snippet": str, "output_var": str,
     "serialize_cfg": {"enabled": bool, "preview_cap": int, "edge_items": int,
                       "head_tail_rows": int, "svg_cap_kib": int},
     "capture_figures": bool}

Result document:
    {"schema": 1, "error": str|null, "input_serialized": [value-doc...],
     "output_serialized": value-doc|null, "figure_svg": str|null,
     "duration_ms": int, "warnings": [str]}

The process exits 0 whenever a result document was produced (candidate
exceptions are data, not protocol failures) and nonzero only when the job
itself is unusable. Non-finite stat values are emitted as strings so the
output stays strict JSON.
"""

from __future__ import annotations

import json
import math
from typing import Any

SCHEMA_VERSION = 1

DEFAULT_SERIALIZE_CFG = {
    "enabled": True,
    "preview_cap": 2000,
    "edge_items": 3,
    "head_tail_rows": 5,
    "svg_cap_kib": 200,
}


class ProtocolError(Exception):
    """The job document violates the wire schema."""


def parse_job(raw: str) -> dict[str, Any]:
    try:
        job = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"job is not valid JSON: {exc}") from None
    if not isinstance(job, dict):
        raise ProtocolError("job must be a JSON object")
    if job.get("schema") != SCHEMA_VERSION:
        raise ProtocolError(f"unsupported schema {job.get('schema')!r}, runner speaks {SCHEMA_VERSION}")
    for key in ("source", "setup_snippet", "output_var"):
        if not isinstance(job.get(key), str):
            raise ProtocolError(f"job.{key} must be a string")
    cfg = dict(DEFAULT_SERIALIZE_CFG)
    cfg.update(job.get("serialize_cfg") or {})
    job["serialize_cfg"] = cfg
    job["capture_figures"] = bool(job.get("capture_figures", False))
    return job


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)  # 'nan', 'inf', '-inf'
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    return value


def dump_result(result: dict[str, Any]) -> str:
    result = dict(result)
    result["schema"] = SCHEMA_VERSION
    return json.dumps(_json_safe(result), ensure_ascii=False, allow_nan=False)
