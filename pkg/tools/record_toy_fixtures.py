#!/usr/bin/env python3
"""Regenerate the toy-suite LLM transcript from the scripted model below.

The search cache, HTML corpus, and stub-runner rules are authored by hand;
this script produces the one fixture that cannot be hand-written (the
transcript is keyed by content hashes of fully rendered prompts). It runs
the real pipeline in record mode against a deterministic scripted "model",
so every digest the replay suite will ever ask for ends up in the file.

Run from the repo root:  python3 tools/record_toy_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from codeloop.bridge import ExecBridge, stub_runner_cmd  # noqa: E402
from codeloop.evaluator import judge  # noqa: E402
from codeloop.extractor import PageCorpus, PageFetcher  # noqa: E402
from codeloop.gateway import LlmConfig, LlmGateway, Transcript  # noqa: E402
from codeloop.pipeline import Services, solve_problem  # noqa: E402
from codeloop.taskfile import load_task_file  # noqa: E402
from codeloop.types import PipelineConfig, apply_ablations  # noqa: E402
from codeloop.websearch import SearchCache, SearchClient  # noqa: E402

GREET_FIX = "result = ('hello ' + name).upper()"
MEANSQ_W0 = "result = sum(xs) / len(xs)"
MEANSQ_FIX = "result = sum(v * v for v in xs) / len(xs)"

COUNTER_CLASS = """class Counter:
    def __init__(self):
        self.total = 0

    def add(self, amount):
        self.total += amount
        return self.total

    def reset(self):
        self.total = 0
        return self.total"""


def fence(code: str) -> str:
    return f"```python\n{code}\n```"


def scripted_model(messages) -> str:
    body = messages[-1]["content"]

    if body.startswith("Plan the implementation of one method"):
        if "Target method: add" in body:
            return "1. [SEARCH] keep a running total in a class — query: python class running total"
        if "Target method: reset" in body:
            return "1. Set the total back to zero and return it."

    if body.startswith("Plan the implementation before"):
        if "set result to x + 1" in body:
            return (
                "1. Read the integer input.\n"
                "2. [SEARCH] add one to the integer — query: python increment integer by one"
            )
        if "'hello ' followed by name" in body:
            return "1. [SEARCH] uppercase a greeting string — query: python string upper concatenation"
        if "mean of the squares" in body:
            return "1. [SEARCH] mean of squared numbers — query: numpy mean of squares"
        if "comma-separated join" in body:
            return "1. Join the items with commas using str.join."

    if body.startswith("Write the code that solves"):
        if "set result to x + 1" in body:
            return "Addition it is.\n" + fence("result = x + 1")
        if "'hello ' followed by name" in body:
            return fence("result = make_greeting(name)")
        if "mean of the squares" in body:
            return fence(MEANSQ_W0)
        if "comma-separated join" in body:
            return fence("result = ','.join(items)")
        if "class Counter" in body:
            return fence(COUNTER_CLASS)

    if body.startswith("Construct test inputs"):
        if "set result to x + 1" in body:
            return fence("x = 1") + "\n" + fence("x = 41")
        if "'hello ' followed by name" in body:
            return fence("name = 'bob'") + "\n" + fence("name = 'ada'")
        if "mean of the squares" in body:
            return fence("xs = [1, 2, 3]") + "\n" + fence("xs = [2, 4]")
        if "comma-separated join" in body:
            return fence("items = ['a', 'b']") + "\n" + fence("items = []")
        if "class Counter" in body:
            return fence("calls = [('add', 2), ('add', 3)]") + "\n" + fence("calls = [('add', 5), ('reset', None)]")

    if body.startswith("Review and fix the code"):
        if "make_greeting" in body:
            return "The helper does not exist; inline it.\n" + fence(GREET_FIX)
        if MEANSQ_W0 in body:
            if "output 1:" in body:
                return "The outputs are plain means; square first.\n" + fence(MEANSQ_FIX)
            return fence(MEANSQ_W0)

    if body.startswith("Judge whether this code"):
        if MEANSQ_W0 in body and MEANSQ_FIX not in body and "output 1:" in body:
            return "INCORRECT"
        return "CORRECT"

    raise AssertionError(f"scripted model has no reply for prompt: {body[:120]!r}")


def build_services(gateway: LlmGateway, real_runner: bool) -> Services:
    if real_runner:
        runner_cmd = [sys.executable, "-m", "codeloop_runner"]
    else:
        runner_cmd = stub_runner_cmd(str(FIXTURES / "runner_rules.json"))
    return Services(
        gateway=gateway,
        bridge=ExecBridge(runner_cmd),
        search=SearchClient(mode="replay", cache=SearchCache(FIXTURES / "search_cache.json")),
        fetcher=PageFetcher(mode="replay", corpus=PageCorpus(FIXTURES / "html")),
    )


def main() -> None:
    # --real-runner records the variant transcript used by the runner
    # package's integration test (real error texts change a few prompts).
    real_runner = "--real-runner" in sys.argv
    name = "toy_real.json" if real_runner else "toy.json"
    transcript_path = FIXTURES / "transcripts" / name
    if transcript_path.exists():
        transcript_path.unlink()
    transcript = Transcript(transcript_path, meta={"suite": "toy", "model": "scripted"})
    gateway = LlmGateway(
        LlmConfig(mode="record"),
        transcript,
        send=lambda request: scripted_model(request["messages"]),
    )
    services = build_services(gateway, real_runner)
    problems = load_task_file(FIXTURES / "tasks" / "toy_suite.jsonl")

    configs = {
        "default": PipelineConfig(),
        "no-output-refine": apply_ablations(PipelineConfig(), ("no-output-refine",)),
        "no-serialization": apply_ablations(PipelineConfig(), ("no-serialization",)),
    }
    for label, cfg in configs.items():
        for problem in problems:
            result = solve_problem(problem, cfg, services)
            verdict = judge(problem, result.final, services.bridge, cfg)
            print(
                f"[{label}] {problem.id}: decision={result.trace.decision} "
                f"rev={result.final.revision} judged_pass={verdict.passed}"
            )

    # solve-only ablation used by the CLI tests
    no_retrieval = apply_ablations(PipelineConfig(), ("no-retrieval",))
    result = solve_problem(problems[0], no_retrieval, services)
    print(f"[no-retrieval] {problems[0].id}: decision={result.trace.decision}")

    print(f"transcript entries: {len(transcript.entries)} -> {transcript_path}")


if __name__ == "__main__":
    main()
