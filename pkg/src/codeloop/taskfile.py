"""Task file loading: newline-delimited JSON records, one problem each.

Record schema (documented field-for-field in the README):

    {"id": str, "description": str, "style": "completion"|"class_skeleton",
     "perturbation"?: str, "library_hints"?: [str], "output_var"?: str,
     "eval"?: {"tests": [{"input": str, "expect": any|null, "method"?: str}],
               "checker"?: str}}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import DuplicateId, ParseError
from .types import (
    EvalBundle,
    EvalTest,
    Perturbation,
    ProblemSpec,
    SealedEvalBundle,
    Style,
)


def _parse_eval(raw: Any, line: int, record_id: str) -> SealedEvalBundle:
    if not isinstance(raw, dict):
        raise ParseError("eval must be an object", line=line, record_id=record_id)
    tests_raw = raw.get("tests")
    if not isinstance(tests_raw, list) or not tests_raw:
        raise ParseError("eval.tests must be a nonempty list", line=line, record_id=record_id)
    tests = []
    for i, t in enumerate(tests_raw):
        if not isinstance(t, dict) or not isinstance(t.get("input"), str) or not t["input"]:
            raise ParseError(
                f"eval.tests[{i}] needs a nonempty 'input' snippet",
                line=line,
                record_id=record_id,
            )
        method = t.get("method")
        if method is not None and not isinstance(method, str):
            raise ParseError(f"eval.tests[{i}].method must be a string", line=line, record_id=record_id)
        tests.append(EvalTest(input_snippet=t["input"], expect=t.get("expect"), method=method))
    checker = raw.get("checker")
    if checker is not None and not isinstance(checker, str):
        raise ParseError("eval.checker must be a string", line=line, record_id=record_id)
    return SealedEvalBundle(EvalBundle(tests=tuple(tests), checker_snippet=checker))


def _parse_record(raw: dict[str, Any], line: int) -> ProblemSpec:
    record_id = raw.get("id")
    if not isinstance(record_id, str) or not record_id:
        raise ParseError("record is missing a nonempty 'id'", line=line)
    description = raw.get("description")
    if not isinstance(description, str) or not description:
        raise ParseError("record is missing a nonempty 'description'", line=line, record_id=record_id)

    try:
        style = Style(raw.get("style", "completion"))
    except ValueError:
        raise ParseError(f"unknown style {raw.get('style')!r}", line=line, record_id=record_id) from None
    try:
        perturbation = Perturbation(raw.get("perturbation", "none"))
    except ValueError:
        raise ParseError(
            f"unknown perturbation {raw.get('perturbation')!r}", line=line, record_id=record_id
        ) from None

    hints = raw.get("library_hints", [])
    if not isinstance(hints, list) or any(not isinstance(h, str) for h in hints):
        raise ParseError("library_hints must be a list of strings", line=line, record_id=record_id)

    output_var = raw.get("output_var")
    if output_var is not None and not isinstance(output_var, str):
        raise ParseError("output_var must be a string", line=line, record_id=record_id)

    bundle = None
    if raw.get("eval") is not None:
        bundle = _parse_eval(raw["eval"], line, record_id)

    return ProblemSpec(
        id=record_id,
        description=description,
        style=style,
        perturbation=perturbation,
        library_hints=tuple(hints),
        eval_bundle=bundle,
        output_var=output_var,
    )


def load_task_file(path: str | Path) -> list[ProblemSpec]:
    """Load problems from a JSONL task file, preserving record order."""
    path = Path(path)
    problems: list[ProblemSpec] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=line_no) from None
            if not isinstance(raw, dict):
                raise ParseError("record must be a JSON object", line=line_no)
            spec = _parse_record(raw, line_no)
            if spec.id in seen:
                raise DuplicateId(f"duplicate problem id {spec.id!r}", line=line_no, record_id=spec.id)
            seen.add(spec.id)
            problems.append(spec)
    return problems


def problem_to_record(spec: ProblemSpec) -> dict[str, Any]:
    """Inverse of record parsing; load(dump(p)) is structurally equal to p."""
    record: dict[str, Any] = {
        "id": spec.id,
        "description": spec.description,
        "style": spec.style.value,
        "perturbation": spec.perturbation.value,
    }
    if spec.library_hints:
        record["library_hints"] = list(spec.library_hints)
    if spec.output_var is not None:
        record["output_var"] = spec.output_var
    if spec.eval_bundle is not None:
        bundle = spec.eval_bundle.reveal()
        tests = []
        for t in bundle.tests:
            entry: dict[str, Any] = {"input": t.input_snippet, "expect": t.expect}
            if t.method is not None:
                entry["method"] = t.method
            tests.append(entry)
        ev: dict[str, Any] = {"tests": tests}
        if bundle.checker_snippet is not None:
            ev["checker"] = bundle.checker_snippet
        record["eval"] = ev
    return record


def dump_task_file(problems: list[ProblemSpec], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for spec in problems:
            f.write(json.dumps(problem_to_record(spec), ensure_ascii=False) + "\n")
