"""Acceptance criteria, one test per criterion, printable pass lines.

Everything here drives the pipeline with the bundled stub runner (canned
result documents), so it passes without the real runner package installed.
Run with `pytest tests/test_acceptance.py -v -s`.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from itertools import combinations
from pathlib import Path

import pytest
from click.testing import CliRunner

from codeloop.bridge import ExecBridge, TestCaseInput, stub_runner_cmd
from codeloop.cli import main
from codeloop.evaluator import judge, pass_at_k
from codeloop.extractor import PageCorpus, PageFetcher, extract
from codeloop.gateway import LlmConfig, LlmGateway, Transcript
from codeloop.pipeline import Services, solve_problem
from codeloop.prompts import VERDICT_TOKEN
from codeloop.refiner import STOP_CLEAN, refine_loop
from codeloop.taskfile import load_task_file
from codeloop.types import PipelineConfig, apply_ablations
from codeloop.websearch import SearchCache, SearchClient, SiteCategory, classify_site
from conftest import FIXTURES, scripted_gateway

STUB_CMD = f"{sys.executable} -m codeloop.stubrunner {FIXTURES / 'runner_rules.json'}"
TASK_FILE = FIXTURES / "tasks" / "toy_suite.jsonl"


def _ok(name: str) -> None:
    print(f"[ACCEPTANCE] {name}: PASS")


def _bench(out: Path, workers: int) -> float:
    args = [
        "bench",
        "--mode", "replay",
        "--out", str(out),
        "--transcript", str(FIXTURES / "transcripts" / "toy.json"),
        "--search-cache", str(FIXTURES / "search_cache.json"),
        "--fixtures", str(FIXTURES / "html"),
        "--runner-cmd", STUB_CMD,
        "--task-file", str(TASK_FILE),
        "--workers", str(workers),
    ]
    started = time.monotonic()
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    elapsed = time.monotonic() - started
    assert result.exit_code == 0, result.output
    return elapsed


def _artifacts(out: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(out)): p.read_bytes()
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


def _replay_services(cfg: PipelineConfig | None = None) -> Services:
    return Services(
        gateway=LlmGateway(LlmConfig(mode="replay"), Transcript(FIXTURES / "transcripts" / "toy.json")),
        bridge=ExecBridge(stub_runner_cmd(str(FIXTURES / "runner_rules.json"))),
        search=SearchClient(mode="replay", cache=SearchCache(FIXTURES / "search_cache.json")),
        fetcher=PageFetcher(mode="replay", corpus=PageCorpus(FIXTURES / "html")),
    )


def test_criterion_end_to_end_determinism(tmp_path):
    """Five-problem replay bench: < 60 s, byte-identical reruns, worker-proof."""
    runs = {"a": 1, "b": 1, "w4": 4}
    outputs = {}
    for label, workers in runs.items():
        elapsed = _bench(tmp_path / label, workers)
        assert elapsed < 60.0, f"bench took {elapsed:.1f}s"
        outputs[label] = _artifacts(tmp_path / label)
    assert outputs["a"] == outputs["b"], "rerun changed artifacts"
    assert outputs["a"] == outputs["w4"], "worker count changed artifacts"
    report = json.loads(outputs["a"]["report.json"])
    assert report["pass_at"]["1"] == 1.0
    _ok("end-to-end determinism")


def test_criterion_pass_at_k_oracle_equivalence():
    """pass_at_k == brute-force subset enumeration on the full small grid."""

    def brute_force(n: int, c: int, k: int) -> float:
        outcomes = [i < c for i in range(n)]
        subsets = list(combinations(range(n), k))
        return sum(1 for s in subsets if any(outcomes[i] for i in s)) / len(subsets)

    for n in range(1, 11):
        for c in range(0, n + 1):
            for k in range(1, n + 1):
                assert abs(pass_at_k(n, c, k) - brute_force(n, c, k)) <= 1e-12, (n, c, k)
    # monotone in k and in c over the same grid
    for n in range(1, 11):
        for c in range(0, n + 1):
            ks = [pass_at_k(n, c, k) for k in range(1, n + 1)]
            assert all(a <= b + 1e-15 for a, b in zip(ks, ks[1:]))
        for k in range(1, n + 1):
            cs = [pass_at_k(n, c, k) for c in range(0, n + 1)]
            assert all(a <= b + 1e-15 for a, b in zip(cs, cs[1:]))
    _ok("pass@k oracle equivalence + monotonicity")


def test_criterion_correctness_testing_output_driven_refinement():
    """Clean-but-wrong candidate is fixed only when outputs feed the loop."""
    problems = {p.id: p for p in load_task_file(TASK_FILE)}
    problem = problems["toy-meansq"]

    full_cfg = PipelineConfig()
    services = _replay_services()
    result = solve_problem(problem, full_cfg, services)
    # W0 executed cleanly everywhere yet was wrong; refinement was driven by output
    first_round = result.trace.rounds[0]
    assert all(o.error is None for o in first_round.outcomes), "W0 must execute cleanly"
    assert result.final.revision == 1
    assert result.trace.decision == STOP_CLEAN
    verdict = judge(problem, result.final, services.bridge, full_cfg)
    assert verdict.passed, verdict.failure_reason

    ablated_cfg = apply_ablations(PipelineConfig(), ("no-output-refine",))
    ablated = solve_problem(problem, ablated_cfg, _replay_services())
    assert ablated.final.revision == 0, "without outputs the wrong code must survive"
    ablated_verdict = judge(problem, ablated.final, services.bridge, ablated_cfg)
    assert not ablated_verdict.passed
    _ok("correctness testing drives refinement by output, not error")


# one fixture page per enumerated host, plus a generic page
CORPUS_EXPECTATIONS = {
    "https://stackoverflow.com/questions/7001/how-to-one-hot-encode-integer-labels":
        ("code", "tf.one_hot(labels, depth)"),
    "https://numpy.org/doc/stable/reference/generated/numpy.mean.html":
        ("text", "numpy.mean(a, axis=None, dtype=None, out=None, keepdims=<no value>)"),
    "https://pandas.pydata.org/docs/reference/api/pandas.DataFrame.mean.html":
        ("text", "DataFrame.mean(axis=0, skipna=True, numeric_only=False, **kwargs)"),
    "https://docs.scipy.org/doc/scipy/reference/generated/scipy.sparse.block_diag.html":
        ("text", "scipy.sparse.block_diag(mats, format=None, dtype=None)"),
    "https://matplotlib.org/stable/api/_as_gen/matplotlib.pyplot.plot.html":
        ("text", "matplotlib.pyplot.plot(*args, scalex=True, scaley=True, data=None, **kwargs)"),
    "https://www.tensorflow.org/api_docs/python/tf/one_hot":
        ("text", "tf.one_hot(indices, depth, on_value=None, off_value=None, axis=None, dtype=None, name=None)"),
    "http://scikit-learn.org/stable/modules/generated/sklearn.preprocessing.OneHotEncoder.html":
        ("text", "sklearn.preprocessing.OneHotEncoder(*, categories='auto'"),
    "https://www.geeksforgeeks.org/python-string-upper/":
        ("code", "('hello ' + name).upper()"),
    "https://blog.example.com/python-running-total-class":
        ("code", "self.total += amount"),
}

EIGHT_HOSTS = {
    "https://stackoverflow.com/q/1": SiteCategory.QA_FORUM,
    "https://numpy.org/doc": SiteCategory.LIBRARY_DOCS,
    "https://pandas.pydata.org/docs": SiteCategory.LIBRARY_DOCS,
    "https://docs.scipy.org/doc": SiteCategory.LIBRARY_DOCS,
    "https://matplotlib.org/stable": SiteCategory.LIBRARY_DOCS,
    "https://www.tensorflow.org/api_docs": SiteCategory.LIBRARY_DOCS,
    "http://scikit-learn.org/stable": SiteCategory.LIBRARY_DOCS,
    "https://www.geeksforgeeks.org/python": SiteCategory.TUTORIAL_SITE,
}


def test_criterion_extraction_corpus():
    """>= 8 pages yield their designated key content at every tested budget."""
    corpus = PageCorpus(FIXTURES / "html")
    assert len(CORPUS_EXPECTATIONS) >= 8

    for url, (where, needle) in CORPUS_EXPECTATIONS.items():
        html = corpus.get(url)
        assert html is not None, f"missing fixture page {url}"
        info = extract(classify_site(url), html, budget=5000, url=url)
        haystacks = info.code_blocks if where == "code" else info.text_blocks
        assert any(needle in block for block in haystacks), (url, needle)
        if classify_site(url).kind is SiteCategory.QA_FORUM and where == "code":
            assert needle in info.code_blocks[0], "accepted answer code must lead"

    for url in corpus.urls():
        html = corpus.get(url)
        for budget in (1, 10, 50, 250, 10_000):
            info = extract(classify_site(url), html, budget, url=url)
            assert info.rendered_size() <= budget, (url, budget)

    for url, kind in EIGHT_HOSTS.items():
        assert classify_site(url).kind is kind, url
    _ok("extraction corpus + site classification")


def test_criterion_refinement_budget(tmp_path):
    """Gateway calls <= 2*n_f + 1 and rounds <= n_f + 1 over random fixtures."""
    from codeloop.bridge import ExecutionOutcome
    from codeloop.wire import SerializedValue

    class RandomizedBridge:
        def __init__(self, threshold: int):
            self.threshold = threshold

        def run_candidate(self, job):
            outs = []
            for inp in job.inputs:
                h = int(hashlib.sha256(f"{job.candidate.source}|{inp.index}".encode()).hexdigest(), 16)
                err = None if (h % 16) < self.threshold else "line 1, in <module>\nValueError: x"
                outs.append(
                    ExecutionOutcome(
                        input_index=inp.index,
                        error=err,
                        output_serialized=None if err else SerializedValue(kind="scalar", preview="1"),
                        input_serialized=(),
                        duration_ms=1,
                    )
                )
            return outs

    from codeloop.types import CodeCandidate, ProblemSpec, Provenance

    problem = ProblemSpec(id="r", description="budget drill")
    w0 = CodeCandidate(revision=0, source="result = seed()", provenance=Provenance.INITIAL, prompt_digest="d")
    rng_fixtures = [
        (n_f, threshold, kinds, verdicts)
        for n_f in (0, 1, 2, 3, 4)
        for threshold in (0, 7, 16)
        for kinds in (["code"], ["junk"], ["token"], ["code", "junk", "code"], ["same"])
        for verdicts in (["CORRECT"], ["INCORRECT"], ["INCORRECT", "CORRECT"])
    ]
    for case_index, (n_f, threshold, kinds, verdicts) in enumerate(rng_fixtures):
        counters = {"refine": 0, "check": 0}

        def script(messages, kinds=kinds, verdicts=verdicts, counters=counters):
            body = messages[-1]["content"]
            if body.startswith("Judge whether this code"):
                v = verdicts[counters["check"] % len(verdicts)]
                counters["check"] += 1
                return v
            kind = kinds[counters["refine"] % len(kinds)]
            counters["refine"] += 1
            if kind == "code":
                return f"```\nresult = variant_{counters['refine']}()\n```"
            if kind == "token":
                return VERDICT_TOKEN
            if kind == "same":
                return "```\nresult = seed()\n```"
            return "nothing useful"

        case_dir = tmp_path / f"case{case_index}"
        case_dir.mkdir()
        gateway = scripted_gateway(case_dir, script)
        cfg = PipelineConfig(n_f=n_f)
        inputs = [TestCaseInput(index=i, setup_snippet=f"x = {i}") for i in (1, 2)]
        final, trace = refine_loop(problem, w0, inputs, cfg, gateway, RandomizedBridge(threshold))
        assert len(gateway.prompt_log) <= 2 * n_f + 1, (n_f, threshold, kinds, verdicts)
        assert 1 <= len(trace.rounds) <= n_f + 1
    _ok("refinement budget bounds")


def test_criterion_judge_semantics():
    """o = g and e = empty-set: exact pass, error fail, 1e-6 tolerance, checker override."""
    from test_evaluator import BRIDGE, cand, problem_with_tests
    from codeloop.types import EvalTest

    exact = problem_with_tests([EvalTest("x = 5", expect=6)])
    assert judge(exact, cand("result = x + 1"), BRIDGE).passed

    raising = problem_with_tests([EvalTest("x = 5", expect=6)])
    verdict = judge(raising, cand("raise ValueError('boom')"), BRIDGE)
    assert not verdict.passed and not verdict.per_test[0].error_empty

    close = problem_with_tests([EvalTest("pad = 0", expect=2.5)])
    assert judge(close, cand(f"result = {2.5 * (1 + 1e-9)!r}"), BRIDGE).passed
    far = judge(close, cand(f"result = {2.5 * (1 + 1e-3)!r}"), BRIDGE)
    assert not far.passed and far.per_test[0].error_empty

    checker_wins = problem_with_tests([EvalTest("x = 5", expect=999)], checker="assert result == 6")
    assert judge(checker_wins, cand("result = x + 1"), BRIDGE).passed
    _ok("judge semantics")


def test_criterion_eval_bundle_firewall(tmp_path):
    """Hidden tests never appear in any rendered prompt of a full bench run."""
    out = tmp_path / "fw"
    _bench(out, workers=1)
    prompts = (out / "prompts.jsonl").read_text(encoding="utf-8")
    assert prompts.strip(), "prompt log missing"
    assert "HIDDEN_EVAL_XYZZY" not in prompts
    # sealed bundles also never reach repr/str surfaces in artifacts
    for artifact in out.rglob("*.json"):
        if artifact.name in ("report.json", "manifest.json"):
            continue  # verdicts legitimately quote judge errors
        assert "HIDDEN_EVAL_XYZZY" not in artifact.read_text(encoding="utf-8"), artifact
    _ok("eval-bundle firewall")
