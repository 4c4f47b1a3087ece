"""Judge final candidates against sealed hidden tests and aggregate Pass@K.

A candidate passes a test when execution raises nothing and the output
equals the expectation (or the bundle's checker accepts). Equality runs
inside the sandbox via a generated comparison epilogue appended to the
candidate, so arrays and frames are compared next to the live values; a
mismatch surfaces as a marked error that judging classifies separately
from real execution errors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

from .bridge import ExecBridge, ExecutionJob, TestCaseInput
from .errors import AggregationError, DomainError, EvalError, RunnerProtocolError
from .types import CodeCandidate, PipelineConfig, ProblemSpec, Style

log = logging.getLogger(__name__)

MISMATCH_MARKER = "__JUDGE_MISMATCH__"

REL_TOL = 1e-6
ABS_TOL = 1e-12  # guards comparisons against exact zero

# Self-contained comparison helper injected after the candidate. Values
# parsed from the task file are embedded as literals; the helper raises a
# marked RuntimeError on the first mismatch.
_COMPARE_HELPER = f'''
def __judge_compare__(actual, expected, path="output"):
    import math as __math
    def fail(why):
        raise RuntimeError("{MISMATCH_MARKER} " + path + ": " + why)
    if isinstance(expected, bool):
        if not isinstance(actual, bool) or actual != expected:
            fail(f"expected {{expected!r}}, got {{actual!r}}")
    elif isinstance(expected, (int, float)) and not isinstance(expected, bool):
        try:
            value = float(actual)
        except (TypeError, ValueError):
            fail(f"expected a number, got {{type(actual).__name__}}")
        if isinstance(expected, int):
            if value != expected:
                fail(f"expected {{expected!r}}, got {{actual!r}}")
        elif not __math.isclose(value, expected, rel_tol={REL_TOL}, abs_tol={ABS_TOL}):
            fail(f"expected {{expected!r}} within rel {REL_TOL}, got {{actual!r}}")
    elif isinstance(expected, str):
        if actual != expected:
            fail(f"expected {{expected!r}}, got {{actual!r}}")
    elif expected is None:
        if actual is not None:
            fail(f"expected None, got {{actual!r}}")
    elif isinstance(expected, list):
        if hasattr(actual, "shape") and hasattr(actual, "tolist"):
            actual = actual.tolist()
        if isinstance(actual, tuple):
            actual = list(actual)
        if not isinstance(actual, list):
            fail(f"expected a sequence, got {{type(actual).__name__}}")
        if len(actual) != len(expected):
            fail(f"length {{len(actual)}} != {{len(expected)}}")
        for i, (a, e) in enumerate(zip(actual, expected)):
            __judge_compare__(a, e, path + f"[{{i}}]")
    elif isinstance(expected, dict):
        if hasattr(actual, "columns") and hasattr(actual, "to_dict"):
            actual = {{str(c): list(actual[c]) for c in actual.columns}}
        if not isinstance(actual, dict):
            fail(f"expected a mapping, got {{type(actual).__name__}}")
        if set(map(str, actual.keys())) != set(expected.keys()):
            fail(f"keys {{sorted(map(str, actual.keys()))}} != {{sorted(expected.keys())}}")
        for key, e in expected.items():
            __judge_compare__(actual[key] if key in actual else actual[str(key)], e, path + f"[{{key!r}}]")
    else:
        fail(f"unsupported expectation type {{type(expected).__name__}}")
'''


def build_judgement_source(candidate_source: str, expect: Any, checker: str | None, output_var: str) -> str:
    """Candidate plus the in-sandbox verdict epilogue for one hidden test."""
    parts = [candidate_source]
    if checker is not None:
        # exec() keeps the checker's own indentation intact.
        parts.append(
            "\ntry:\n"
            f"    exec(compile({checker!r}, '<checker>', 'exec'))\n"
            "except BaseException as __checker_exc:\n"
            f"    raise RuntimeError({MISMATCH_MARKER!r} + ' checker failed: ' + repr(__checker_exc)) from None"
        )
    elif expect is not None:
        parts.append(_COMPARE_HELPER)
        parts.append(f"__judge_expected__ = {expect!r}")
        parts.append(f"__judge_compare__({output_var}, __judge_expected__)")
    return "\n".join(parts)


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting the Test- prefix

    error_empty: bool
    output_match: bool
    method: str | None = None


@dataclass(frozen=True)
class Verdict:
    problem_id: str
    passed: bool
    per_test: tuple[TestResult, ...]
    failure_reason: str | None = None


def judge(
    problem: ProblemSpec,
    candidate: CodeCandidate,
    bridge: ExecBridge,
    cfg: PipelineConfig | None = None,
) -> Verdict:
    """Run every hidden test; passed iff all are error-free and matching."""
    if problem.eval_bundle is None:
        raise EvalError(f"problem {problem.id} has no eval bundle")
    cfg = cfg or PipelineConfig()
    bundle = problem.eval_bundle.reveal()
    output_var = problem.output_var or cfg.output_var

    results: list[TestResult] = []
    failure_reason: str | None = None
    for test in bundle.tests:
        source = build_judgement_source(candidate.source, test.expect, bundle.checker_snippet, output_var)
        job = ExecutionJob(
            candidate=CodeCandidate(
                revision=candidate.revision,
                source=source,
                provenance=candidate.provenance,
                prompt_digest=candidate.prompt_digest,
            ),
            inputs=(TestCaseInput(index=1, setup_snippet=test.input_snippet, origin="provided"),),
            output_var=output_var,
            serialize=False,
            timeout=cfg.exec_timeout,
            capture_figures=False,
        )
        try:
            outcome = bridge.run_candidate(job)[0]
        except (RunnerProtocolError, EnvironmentError) as exc:
            results.append(TestResult(error_empty=False, output_match=False, method=test.method))
            failure_reason = failure_reason or f"bridge failure: {exc}"
            continue
        if outcome.error is None:
            results.append(TestResult(error_empty=True, output_match=True, method=test.method))
        elif MISMATCH_MARKER in outcome.error:
            results.append(TestResult(error_empty=True, output_match=False, method=test.method))
            failure_reason = failure_reason or outcome.error
        else:
            results.append(TestResult(error_empty=False, output_match=False, method=test.method))
            failure_reason = failure_reason or outcome.error

    passed = all(r.error_empty and r.output_match for r in results)
    return Verdict(
        problem_id=problem.id,
        passed=passed,
        per_test=tuple(results),
        failure_reason=None if passed else failure_reason,
    )


def failed_verdict(problem: ProblemSpec, reason: str) -> Verdict:
    """Verdict for a problem whose solve or judging crashed outright."""
    if problem.eval_bundle is None:
        raise EvalError(f"problem {problem.id} has no eval bundle")
    per_test = tuple(
        TestResult(error_empty=False, output_match=False, method=t.method)
        for t in problem.eval_bundle.reveal().tests
    )
    return Verdict(problem_id=problem.id, passed=False, per_test=per_test, failure_reason=reason)


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k)/C(n, k), in stable product form."""
    if not 0 <= c <= n:
        raise DomainError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    prod = 1.0
    for i in range(n - c + 1, n + 1):
        prod *= 1.0 - k / i
    return 1.0 - prod


@dataclass(frozen=True)
class EvaluationReport:
    verdicts: tuple[Verdict, ...]
    pass_at: dict[int, float]
    by_perturbation: dict[str, float]
    n_samples: int
    runtime_stats: dict[str, float] = field(default_factory=dict)
    class_pass_at: dict[int, float] | None = None
    method_pass_at: dict[int, float] | None = None


def _method_correct_counts(samples: list[Verdict]) -> dict[str, int]:
    methods = sorted({r.method for v in samples for r in v.per_test if r.method is not None})
    counts = {}
    for method in methods:
        c = 0
        for verdict in samples:
            group = [r for r in verdict.per_test if r.method == method]
            if group and all(r.error_empty and r.output_match for r in group):
                c += 1
        counts[method] = c
    return counts


def aggregate(
    problems: list[ProblemSpec],
    verdicts_by_problem: dict[str, list[Verdict]],
    ks: list[int],
) -> EvaluationReport:
    """Mean Pass@K over problems, with perturbation and class/method splits.

    Requires the same sample count for every problem; Ks above the sample
    count are omitted (they have no unbiased estimate).
    """
    if not verdicts_by_problem:
        raise AggregationError("no verdicts to aggregate")
    counts = {len(v) for v in verdicts_by_problem.values()}
    if len(counts) != 1:
        raise AggregationError(f"ragged sample counts: {sorted(counts)}")
    n = counts.pop()
    if n == 0:
        raise AggregationError("zero samples per problem")

    by_id = {p.id: p for p in problems}
    missing = set(verdicts_by_problem) - set(by_id)
    if missing:
        raise AggregationError(f"verdicts for unknown problems: {sorted(missing)}")

    ordered_ids = [p.id for p in problems if p.id in verdicts_by_problem]
    correct = {pid: sum(1 for v in verdicts_by_problem[pid] if v.passed) for pid in ordered_ids}
    valid_ks = [k for k in ks if 1 <= k <= n]

    pass_at = {
        k: sum(pass_at_k(n, correct[pid], k) for pid in ordered_ids) / len(ordered_ids)
        for k in valid_ks
    }

    by_perturbation: dict[str, float] = {}
    for perturbation in sorted({by_id[pid].perturbation.value for pid in ordered_ids}):
        subset = [pid for pid in ordered_ids if by_id[pid].perturbation.value == perturbation]
        by_perturbation[perturbation] = sum(pass_at_k(n, correct[pid], 1) for pid in subset) / len(subset)

    class_ids = [pid for pid in ordered_ids if by_id[pid].style is Style.CLASS_SKELETON]
    class_pass_at = method_pass_at = None
    if class_ids:
        class_pass_at = {
            k: sum(pass_at_k(n, correct[pid], k) for pid in class_ids) / len(class_ids)
            for k in valid_ks
        }
        method_units: list[int] = []
        for pid in class_ids:
            for _method, c in sorted(_method_correct_counts(verdicts_by_problem[pid]).items()):
                method_units.append(c)
        if method_units:
            method_pass_at = {
                k: sum(pass_at_k(n, c, k) for c in method_units) / len(method_units)
                for k in valid_ks
            }

    all_verdicts = tuple(v for pid in ordered_ids for v in verdicts_by_problem[pid])
    return EvaluationReport(
        verdicts=all_verdicts,
        pass_at=pass_at,
        by_perturbation=by_perturbation,
        n_samples=n,
        class_pass_at=class_pass_at,
        method_pass_at=method_pass_at,
    )


def report_to_doc(report: EvaluationReport, ablations: tuple[str, ...] = ()) -> dict[str, Any]:
    """Deterministic machine-readable report (no wall-clock content)."""
    doc: dict[str, Any] = {
        "n_samples": report.n_samples,
        "ablations": sorted(ablations),
        "pass_at": {str(k): report.pass_at[k] for k in sorted(report.pass_at)},
        "by_perturbation": dict(sorted(report.by_perturbation.items())),
        "verdicts": [
            {
                "problem_id": v.problem_id,
                "passed": v.passed,
                "failure_reason": v.failure_reason,
                "per_test": [
                    {"error_empty": r.error_empty, "output_match": r.output_match, "method": r.method}
                    for r in v.per_test
                ],
            }
            for v in report.verdicts
        ],
    }
    if report.class_pass_at is not None:
        doc["class_pass_at"] = {str(k): v for k, v in sorted(report.class_pass_at.items())}
    if report.method_pass_at is not None:
        doc["method_pass_at"] = {str(k): v for k, v in sorted(report.method_pass_at.items())}
    return doc


_PERTURBATION_COLUMNS = ("origin", "surface", "semantic", "diff_rewrite", "none")


def report_to_markdown(report: EvaluationReport, label: str = "pipeline") -> str:
    """Markdown table in the usual benchmark layout: perturbation columns
    plus a Total/Avg column; class/method rows when applicable."""
    columns = [c for c in _PERTURBATION_COLUMNS if c in report.by_perturbation]
    header = "| Method | " + " | ".join(columns + ["Total/Avg"]) + " |"
    rule = "|" + "---|" * (len(columns) + 2)
    total = report.pass_at.get(1)
    cells = [f"{report.by_perturbation[c] * 100:.2f}" for c in columns]
    cells.append("-" if total is None else f"{total * 100:.2f}")
    lines = [header, rule, f"| {label} (pass@1) | " + " | ".join(cells) + " |"]

    if report.class_pass_at is not None:
        ks = sorted(report.class_pass_at)
        lines.append("")
        lines.append("| Level | " + " | ".join(f"Pass@{k}" for k in ks) + " |")
        lines.append("|" + "---|" * (len(ks) + 1))
        lines.append("| class | " + " | ".join(f"{report.class_pass_at[k] * 100:.2f}" for k in ks) + " |")
        if report.method_pass_at is not None:
            lines.append("| method | " + " | ".join(f"{report.method_pass_at[k] * 100:.2f}" for k in ks) + " |")
    return "\n".join(lines) + "\n"
