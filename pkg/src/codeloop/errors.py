"""Exception types shared across the pipeline."""

from __future__ import annotations


class CodeloopError(Exception):
    """Base class for all pipeline errors."""


class ParseError(CodeloopError):
    """A task file record could not be parsed or failed validation."""

    def __init__(self, message: str, line: int | None = None, record_id: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if record_id is not None:
            loc.append(f"record {record_id!r}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.line = line
        self.record_id = record_id


class DuplicateId(ParseError):
    """Two task file records share the same id."""


class InvalidConfig(CodeloopError):
    """A pipeline configuration violates its invariants."""


class MissingTranscript(CodeloopError):
    """Replay mode was asked for a prompt digest that is not in the transcript."""

    def __init__(self, digest: str):
        super().__init__(f"no transcript entry for prompt digest {digest}")
        self.digest = digest


class UpstreamError(CodeloopError):
    """The chat-completion endpoint kept failing after bounded retries."""


class PlanParseError(CodeloopError):
    """The planning reply contained no parseable steps."""

    def __init__(self, message: str, raw_reply: str):
        super().__init__(message)
        self.raw_reply = raw_reply


class SearchUnavailable(CodeloopError):
    """The search endpoint failed after retries; retrieval degrades to nothing."""


class FetchError(CodeloopError):
    """A page could not be fetched (HTTP failure, timeout, or replay miss)."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ExtractError(CodeloopError):
    """A fetched page could not be reduced to key information."""


class GenerationError(CodeloopError):
    """The model produced no usable code block, even after one reprompt."""


class NoCodeFound(CodeloopError):
    """A reply contained nothing that looks like code."""


class TestGenError(CodeloopError):
    """No valid test-case inputs could be generated; refinement is skipped."""

    __test__ = False  # keep pytest from collecting the Test- prefix


class RunnerProtocolError(CodeloopError):
    """The sandbox runner exited without a valid result document."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class EvalError(CodeloopError):
    """Judging was requested for a problem without a sealed eval bundle."""


class AggregationError(CodeloopError):
    """Verdict matrix is ragged or otherwise unusable for aggregation."""


class DomainError(CodeloopError):
    """An estimator was called outside its domain (e.g. k > n)."""
