"""Replay stub for the sandbox runner.

Reads one job document on stdin, finds the first matching canned rule, and
emits its result document. Lets the whole pipeline (and its acceptance
suite) run without the real runner package installed.

Rules file:
    {"rules": [
        {"when": {"source_contains"?: str, "setup_contains"?: str,
                  "output_var"?: str, "serialize_enabled"?: bool,
                  "capture_figures"?: bool},
         "sleep_ms"?: int,
         "result": {...partial result document...}}
    ]}

All present `when` keys must match; rules are tried in order; `sleep_ms`
delays the reply (for driving bridge timeouts in tests). Missing result
fields are filled with success defaults. An unmatched job is a protocol
failure: diagnostic on stderr, nonzero exit.
"""

from __future__ import annotations

import json
import os
import sys
import time
from typing import Any

from .wire import ABSENT_VALUE, SCHEMA_VERSION

RULES_ENV_VAR = "CODELOOP_STUB_RULES"


def _matches(when: dict[str, Any], job: dict[str, Any]) -> bool:
    if "source_contains" in when and when["source_contains"] not in job.get("source", ""):
        return False
    if "setup_contains" in when and when["setup_contains"] not in job.get("setup_snippet", ""):
        return False
    if "output_var" in when and when["output_var"] != job.get("output_var"):
        return False
    if "serialize_enabled" in when:
        if bool(when["serialize_enabled"]) != bool(job.get("serialize_cfg", {}).get("enabled", True)):
            return False
    if "capture_figures" in when and bool(when["capture_figures"]) != bool(job.get("capture_figures")):
        return False
    return True


def _fill_result(partial: dict[str, Any]) -> dict[str, Any]:
    result = {
        "schema": SCHEMA_VERSION,
        "error": None,
        "input_serialized": [],
        "output_serialized": None,
        "figure_svg": None,
        "duration_ms": 3,
    }
    result.update(partial)
    if result["error"] is None and result["output_serialized"] is None:
        result["output_serialized"] = ABSENT_VALUE.to_doc()
    return result


def replay(job: dict[str, Any], rules: list[dict[str, Any]]) -> dict[str, Any]:
    for rule in rules:
        if _matches(rule.get("when", {}), job):
            sleep_ms = rule.get("sleep_ms", 0)
            if sleep_ms:
                time.sleep(sleep_ms / 1000.0)
            return _fill_result(dict(rule.get("result", {})))
    raise LookupError(
        "no stub rule matches job: source starts "
        f"{job.get('source', '')[:80]!r}, setup starts {job.get('setup_snippet', '')[:80]!r}"
    )


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    rules_path = argv[0] if argv else os.environ.get(RULES_ENV_VAR, "")
    if not rules_path:
        print("stub runner: no rules file (argument or $CODELOOP_STUB_RULES)", file=sys.stderr)
        return 2
    try:
        rules = json.loads(open(rules_path, encoding="utf-8").read())["rules"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"stub runner: cannot load rules from {rules_path}: {exc}", file=sys.stderr)
        return 2
    try:
        job = json.loads(sys.stdin.read())
    except json.JSONDecodeError as exc:
        print(f"stub runner: invalid job document: {exc}", file=sys.stderr)
        return 2
    try:
        result = replay(job, rules)
    except LookupError as exc:
        print(f"stub runner: {exc}", file=sys.stderr)
        return 3
    json.dump(result, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
