"""Drive the sandbox runner: spawn, feed jobs, enforce timeouts, parse results.

Each test input executes in a fresh runner process so that global state and
import side effects cannot leak between inputs. This is fault isolation,
not a security boundary.
"""

from __future__ import annotations

import json
import logging
import os
import shlex
import shutil
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import RunnerProtocolError
from .types import CodeCandidate
from .wire import SCHEMA_VERSION, SerializedValue, make_job_doc

log = logging.getLogger(__name__)

RUNNER_ENV_VAR = "CODELOOP_RUNNER"
DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class TestCaseInput:
    """A self-contained snippet constructing one test input."""

    __test__ = False  # keep pytest from collecting the Test- prefix

    index: int
    setup_snippet: str
    origin: str = "generated"  # generated | provided

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("input index starts at 1")
        if not self.setup_snippet.strip():
            raise ValueError("setup snippet must be nonempty")


@dataclass(frozen=True)
class ExecutionJob:
    candidate: CodeCandidate
    inputs: tuple[TestCaseInput, ...]
    output_var: str = "result"
    serialize: bool = True
    timeout: float = DEFAULT_TIMEOUT
    capture_figures: bool = False

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if not self.inputs:
            raise ValueError("job needs at least one input")


@dataclass(frozen=True)
class ExecutionOutcome:
    input_index: int
    error: str | None
    output_serialized: SerializedValue | None
    input_serialized: tuple[SerializedValue, ...]
    duration_ms: int
    timed_out: bool = False
    figure_svg: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def resolve_runner_cmd(runner_cmd: Sequence[str] | None = None) -> list[str]:
    """Find the runner executable: explicit arg, env var, then PATH."""
    if runner_cmd:
        return list(runner_cmd)
    env_cmd = os.environ.get(RUNNER_ENV_VAR)
    if env_cmd:
        return shlex.split(env_cmd)
    exe = shutil.which("codeloop-runner")
    if exe:
        return [exe]
    raise EnvironmentError(
        "no sandbox runner found: pass runner_cmd, set $CODELOOP_RUNNER, "
        "or install the runner package (codeloop-runner)"
    )


def stub_runner_cmd(rules_path: str) -> list[str]:
    """Command line for the bundled replay stub."""
    return [sys.executable, "-m", "codeloop.stubrunner", rules_path]


class ExecBridge:
    """Supervises runner processes, up to ``max_workers`` at a time."""

    def __init__(self, runner_cmd: Sequence[str] | None = None, max_workers: int = 4):
        self.runner_cmd = resolve_runner_cmd(runner_cmd)
        self.max_workers = max(1, max_workers)

    def run_candidate(self, job: ExecutionJob) -> list[ExecutionOutcome]:
        """One outcome per input, order preserved, fresh process per input."""
        docs = [
            make_job_doc(
                source=job.candidate.source,
                setup_snippet=inp.setup_snippet,
                output_var=job.output_var,
                serialize_enabled=job.serialize,
                capture_figures=job.capture_figures,
            )
            for inp in job.inputs
        ]
        if len(docs) == 1:
            return [self._run_one(job.inputs[0].index, docs[0], job.timeout)]
        with ThreadPoolExecutor(max_workers=min(self.max_workers, len(docs))) as pool:
            futures = [
                pool.submit(self._run_one, inp.index, doc, job.timeout)
                for inp, doc in zip(job.inputs, docs)
            ]
            return [f.result() for f in futures]

    def smoke_run(self, setup_snippet: str, output_var: str = "result", timeout: float = DEFAULT_TIMEOUT) -> str | None:
        """Execute a setup snippet alone; returns the error text or None.

        Used to validate generated test inputs without any candidate code.
        """
        doc = make_job_doc(
            source="pass",
            setup_snippet=setup_snippet,
            output_var=output_var,
            serialize_enabled=False,
            capture_figures=False,
        )
        outcome = self._run_one(1, doc, timeout)
        return outcome.error

    def _run_one(self, input_index: int, job_doc: dict[str, Any], timeout: float) -> ExecutionOutcome:
        payload = json.dumps(job_doc)
        started = time.monotonic()
        try:
            proc = subprocess.Popen(
                self.runner_cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
        except FileNotFoundError as exc:
            raise EnvironmentError(f"sandbox runner not executable: {self.runner_cmd}") from exc

        try:
            stdout, stderr = proc.communicate(payload, timeout=timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            elapsed_ms = int((time.monotonic() - started) * 1000)
            log.info("runner timed out after %.1fs (input %d)", timeout, input_index)
            return ExecutionOutcome(
                input_index=input_index,
                error=f"timeout: execution exceeded {timeout:g}s and was killed",
                output_serialized=None,
                input_serialized=(),
                duration_ms=elapsed_ms,
                timed_out=True,
            )

        if proc.returncode != 0:
            raise RunnerProtocolError(
                f"runner exited with code {proc.returncode} before producing a result",
                stderr=stderr.strip(),
            )
        try:
            result = json.loads(stdout)
        except json.JSONDecodeError:
            raise RunnerProtocolError(
                f"runner produced invalid JSON: {stdout[:200]!r}", stderr=stderr.strip()
            ) from None
        return self._parse_result(input_index, result)

    @staticmethod
    def _parse_result(input_index: int, result: dict[str, Any]) -> ExecutionOutcome:
        if not isinstance(result, dict):
            raise RunnerProtocolError("result document must be a JSON object")
        if result.get("schema") != SCHEMA_VERSION:
            raise RunnerProtocolError(
                f"runner schema {result.get('schema')!r} != bridge schema {SCHEMA_VERSION}"
            )
        error = result.get("error") or None
        output_doc = result.get("output_serialized")
        try:
            output = SerializedValue.from_doc(output_doc) if output_doc is not None else None
            inputs = tuple(SerializedValue.from_doc(d) for d in result.get("input_serialized", []))
        except (ValueError, AttributeError, TypeError) as exc:
            raise RunnerProtocolError(f"malformed value document: {exc}") from None
        if error is None and output is None:
            raise RunnerProtocolError("success result is missing output_serialized")
        return ExecutionOutcome(
            input_index=input_index,
            error=error,
            output_serialized=output,
            input_serialized=inputs,
            duration_ms=int(result.get("duration_ms", 0)),
            timed_out=False,
            figure_svg=result.get("figure_svg"),
        )
