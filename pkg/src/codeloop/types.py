"""Core domain types shared by every pipeline stage.

All types here are immutable after construction and safe to hand to
concurrent workers. Hidden evaluation data is wrapped in
:class:`SealedEvalBundle` so that nothing outside the evaluator can read
it by accident; the test suite audits the source tree for `reveal(` calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .errors import InvalidConfig


class Style(str, Enum):
    COMPLETION = "completion"
    CLASS_SKELETON = "class_skeleton"


class Perturbation(str, Enum):
    ORIGIN = "origin"
    SURFACE = "surface"
    SEMANTIC = "semantic"
    DIFF_REWRITE = "diff_rewrite"
    NONE = "none"


class Provenance(str, Enum):
    INITIAL = "initial"
    REFINED = "refined"


@dataclass(frozen=True)
class EvalTest:
    """One hidden test: a setup snippet plus an optional expected value.

    ``expect`` is a plain JSON value (None means "error-free execution is
    enough", e.g. when the bundle's checker does the asserting). ``method``
    groups tests for class-level problems.
    """

    input_snippet: str
    expect: Any = None
    method: str | None = None


@dataclass(frozen=True)
class EvalBundle:
    tests: tuple[EvalTest, ...]
    checker_snippet: str | None = None

    def __post_init__(self) -> None:
        if not self.tests:
            raise ValueError("eval bundle must contain at least one test")


class SealedEvalBundle:
    """Opaque wrapper around hidden tests.

    Only the evaluator may call :meth:`reveal`; every other module treats
    this as an opaque token. The repr never leaks contents.
    """

    __slots__ = ("_bundle",)

    def __init__(self, bundle: EvalBundle):
        self._bundle = bundle

    def reveal(self) -> EvalBundle:
        return self._bundle

    def __repr__(self) -> str:  # pragma: no cover - trivial
        return "SealedEvalBundle(<sealed>)"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SealedEvalBundle):
            return NotImplemented
        return self._bundle == other._bundle

    def __hash__(self) -> int:
        return hash(self._bundle)


@dataclass(frozen=True)
class ProblemSpec:
    """A programming problem: the description plus style metadata.

    ``eval_bundle`` stays sealed; planner, synthesis, and refiner never see
    its contents.
    """

    id: str
    description: str
    style: Style = Style.COMPLETION
    perturbation: Perturbation = Perturbation.NONE
    library_hints: tuple[str, ...] = ()
    eval_bundle: SealedEvalBundle | None = None
    output_var: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be nonempty")
        if not self.description:
            raise ValueError(f"problem {self.id!r}: description must be nonempty")


@dataclass(frozen=True)
class CodeCandidate:
    """One revision of generated code."""

    revision: int
    source: str
    provenance: Provenance
    prompt_digest: str

    def __post_init__(self) -> None:
        if self.revision < 0:
            raise ValueError("revision must be >= 0")
        if (self.revision == 0) != (self.provenance is Provenance.INITIAL):
            raise ValueError("revision 0 iff provenance is initial")
        if not self.source:
            raise ValueError("candidate source must be nonempty")


# CLI flag names and help text live next to the fields so the command line
# can be generated from this schema (tested: no drift between the two).
_CONFIG_FLAGS: dict[str, tuple[str, str]] = {
    "n_q": ("--max-queries", "Search queries kept per problem (0 disables search)."),
    "n_u": ("--urls-per-query", "URLs fetched per search query."),
    "n_i": ("--test-inputs", "Generated test-case inputs per problem."),
    "n_f": ("--max-rounds", "Maximum refinement rounds."),
    "use_retrieval": ("--retrieval/--no-retrieval", "Plan, search, and extract before generating."),
    "use_output_in_refine": ("--output-refine/--no-output-refine", "Show serialized outputs to the refiner."),
    "use_error_in_refine": ("--error-refine/--no-error-refine", "Show errors plus searched error context to the refiner."),
    "use_serialization": ("--serialization/--no-serialization", "Serialize values structurally instead of raw printouts."),
    "use_generated_tests": ("--testgen/--no-testgen", "Generate test inputs (off = retrieval-only, no refinement)."),
    "token_budget_info": ("--info-budget", "Token budget for each extracted info block."),
    "exec_timeout": ("--exec-timeout", "Wall-clock timeout per sandbox execution, seconds."),
    "output_var": ("--output-var", "Variable name holding a candidate's answer."),
}


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for one pipeline run. Defaults follow the reference operating
    point: one query, one URL per query, sampling at temperature 0."""

    n_q: int = 1
    n_u: int = 1
    n_i: int = 2
    n_f: int = 3
    use_retrieval: bool = True
    use_output_in_refine: bool = True
    use_error_in_refine: bool = True
    use_serialization: bool = True
    use_generated_tests: bool = True
    token_budget_info: int = 1000
    exec_timeout: float = 10.0
    output_var: str = "result"

    TOGGLES = (
        "use_retrieval",
        "use_output_in_refine",
        "use_error_in_refine",
        "use_serialization",
        "use_generated_tests",
    )

    @staticmethod
    def flag_for(field_name: str) -> tuple[str, str]:
        return _CONFIG_FLAGS[field_name]

    @staticmethod
    def flagged_fields() -> dict[str, tuple[str, str]]:
        return dict(_CONFIG_FLAGS)


# Named ablations -> the config field each one switches off.
ABLATIONS: dict[str, str] = {
    "no-output-refine": "use_output_in_refine",
    "no-error-refine": "use_error_in_refine",
    "no-serialization": "use_serialization",
    "no-testgen": "use_generated_tests",
    "no-retrieval": "use_retrieval",
}


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    """Return ``cfg`` with forced invariants applied, or raise InvalidConfig.

    Disabling both refinement signals makes a refinement round pointless,
    so n_f is forced to 0 in that case.
    """
    if cfg.n_q < 0:
        raise InvalidConfig(f"n_q must be >= 0, got {cfg.n_q}")
    if cfg.n_u < 1:
        raise InvalidConfig(f"n_u must be >= 1, got {cfg.n_u}")
    if cfg.n_i < 1:
        raise InvalidConfig(f"n_i must be >= 1, got {cfg.n_i}")
    if cfg.n_f < 0:
        raise InvalidConfig(f"n_f must be >= 0, got {cfg.n_f}")
    if cfg.token_budget_info <= 0:
        raise InvalidConfig(f"token_budget_info must be > 0, got {cfg.token_budget_info}")
    if cfg.exec_timeout <= 0:
        raise InvalidConfig(f"exec_timeout must be > 0, got {cfg.exec_timeout}")
    if not cfg.output_var.isidentifier():
        raise InvalidConfig(f"output_var must be a valid identifier, got {cfg.output_var!r}")
    if not (cfg.use_output_in_refine or cfg.use_error_in_refine) and cfg.n_f != 0:
        cfg = replace(cfg, n_f=0)
    return cfg


def config_from_dict(raw: dict[str, Any]) -> PipelineConfig:
    """Build a validated config from a parsed JSON object.

    Unknown keys are rejected outright: a typoed toggle silently falling
    back to its default would invalidate a whole benchmark run.
    """
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = PipelineConfig(**raw)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from None
    for name in PipelineConfig.TOGGLES:
        if not isinstance(getattr(cfg, name), bool):
            raise InvalidConfig(f"{name} must be a boolean")
    return validate_config(cfg)


def apply_ablations(cfg: PipelineConfig, names: tuple[str, ...]) -> PipelineConfig:
    for name in names:
        try:
            field_name = ABLATIONS[name]
        except KeyError:
            raise InvalidConfig(
                f"unknown ablation {name!r}; known: {sorted(ABLATIONS)}"
            ) from None
        cfg = replace(cfg, **{field_name: False})
    return validate_config(cfg)
