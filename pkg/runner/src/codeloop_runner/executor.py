"""Execute one candidate/input pair in a fresh namespace and serialize it."""

from __future__ import annotations

import time
import traceback
import types
from typing import Any

from .figures import capture_current_figure
from .serialize import make_absent, serialize_value


def _format_error(exc: BaseException) -> str:
    """Final traceback line plus the exception class and message."""
    frames = traceback.extract_tb(exc.__traceback__)
    location = ""
    for frame in reversed(frames):
        if frame.filename in ("<setup>", "<candidate>"):
            location = f'File "{frame.filename}", line {frame.lineno}, in {frame.name}\n'
            break
    return f"{location}{type(exc).__name__}: {exc}"


def _run_block(code: str, filename: str, namespace: dict) -> str | None:
    try:
        exec(compile(code, filename, "exec"), namespace)
        return None
    except BaseException as exc:  # noqa: BLE001 - candidate errors are data
        return _format_error(exc)


def _input_bindings(namespace: dict) -> list[tuple[str, Any]]:
    # Data bound by the setup snippet; modules and dunders are not inputs.
    return [
        (name, value)
        for name, value in namespace.items()
        if not name.startswith("__") and not isinstance(value, types.ModuleType)
    ]


def execute_one(job: dict[str, Any]) -> dict[str, Any]:
    """Run setup then candidate source; serialize inputs and the output."""
    cfg = job["serialize_cfg"]
    namespace: dict[str, Any] = {}
    warnings: list[str] = []

    started = time.perf_counter()
    error = _run_block(job["setup_snippet"], "<setup>", namespace)

    input_serialized: list[dict[str, Any]] = []
    if error is None:
        for name, value in _input_bindings(namespace):
            doc = serialize_value(value, cfg)
            doc["name"] = name
            input_serialized.append(doc)
        error = _run_block(job["source"], "<candidate>", namespace)

    duration_ms = int((time.perf_counter() - started) * 1000)

    output_doc = None
    figure_svg = None
    if error is None:
        output_var = job["output_var"]
        if output_var in namespace:
            output_doc = serialize_value(namespace[output_var], cfg)
        else:
            output_doc = make_absent()
        if job.get("capture_figures"):
            figure_svg, warning = capture_current_figure(cfg)
            if warning:
                warnings.append(warning)

    return {
        "error": error,
        "input_serialized": input_serialized,
        "output_serialized": output_doc,
        "figure_svg": figure_svg,
        "duration_ms": duration_ms,
        "warnings": warnings,
    }
