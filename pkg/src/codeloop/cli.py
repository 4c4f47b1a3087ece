"""Command-line surface: solve one problem, run a benchmark, verify fixtures.

Every pipeline knob is generated from the PipelineConfig schema, so the
--help output cannot drift from the config fields.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import shlex
import sys
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import evaluator, pipeline
from .bridge import ExecBridge
from .errors import CodeloopError
from .extractor import PageCorpus, PageFetcher
from .gateway import LlmConfig, LlmGateway, Transcript
from .htmldoc import parse_html
from .prompts import template_ids
from .taskfile import load_task_file
from .types import ABLATIONS, PipelineConfig, ProblemSpec, apply_ablations, config_from_dict, validate_config
from .websearch import SearchCache, SearchClient

log = logging.getLogger(__name__)


def config_options(fn):
    """One generated option per PipelineConfig field (tested: no drift)."""
    for name, (flag, help_text) in reversed(list(PipelineConfig.flagged_fields().items())):
        field = PipelineConfig.__dataclass_fields__[name]
        if field.type == "bool":
            fn = click.option(flag, name, default=None, help=help_text)(fn)
        elif field.type == "float":
            fn = click.option(flag, name, type=float, default=None, help=help_text)(fn)
        elif field.type == "int":
            fn = click.option(flag, name, type=int, default=None, help=help_text)(fn)
        else:
            fn = click.option(flag, name, type=str, default=None, help=help_text)(fn)
    return fn


def run_options(fn):
    options = [
        click.option("--mode", type=click.Choice(["live", "record", "replay"]), default="replay", show_default=True),
        click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file."),
        click.option("--out", "out_dir", type=click.Path(), required=True, help="Output directory."),
        click.option("--transcript", "transcript_path", type=click.Path(), default=None, help="LLM transcript file."),
        click.option("--search-cache", "search_cache_path", type=click.Path(), default=None, help="Search cache file."),
        click.option("--fixtures", "fixtures_dir", type=click.Path(), default=None, help="HTML fixture corpus dir."),
        click.option("--runner-cmd", default=None, help="Sandbox runner command line (shell-quoted)."),
        click.option("--ablate", "ablations", multiple=True, type=click.Choice(sorted(ABLATIONS)), help="Named ablations."),
        click.option("--workers", type=int, default=1, show_default=True, help="Concurrent problem workers."),
        click.option("--model", default="gpt-4", show_default=True, help="Chat model name."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(config_path: str | None, ablations: tuple[str, ...], overrides: dict) -> PipelineConfig:
    if config_path:
        cfg = config_from_dict(json.loads(Path(config_path).read_text(encoding="utf-8")))
    else:
        cfg = PipelineConfig()
    set_overrides = {k: v for k, v in overrides.items() if v is not None}
    if set_overrides:
        cfg = dataclasses.replace(cfg, **set_overrides)
    cfg = validate_config(cfg)
    return apply_ablations(cfg, ablations)


def _build_services(
    mode: str,
    transcript_path: str | None,
    search_cache_path: str | None,
    fixtures_dir: str | None,
    runner_cmd: str | None,
    workers: int,
    model: str,
) -> pipeline.Services:
    if mode == "replay":
        for label, p in (
            ("--transcript", transcript_path),
            ("--search-cache", search_cache_path),
            ("--fixtures", fixtures_dir),
        ):
            if not p or not Path(p).exists():
                raise click.UsageError(f"replay mode requires {label} to exist (got {p!r})")

    transcript = Transcript(transcript_path) if transcript_path else None
    gateway = LlmGateway(LlmConfig(model_name=model, mode=mode), transcript)

    search = None
    fetcher = None
    if search_cache_path:
        search = SearchClient(mode=mode, cache=SearchCache(search_cache_path))
    elif mode == "live":
        search = SearchClient(mode="live")
    if fixtures_dir:
        fetcher = PageFetcher(mode=mode, corpus=PageCorpus(fixtures_dir))
    elif mode == "live":
        fetcher = PageFetcher(mode="live")

    bridge = ExecBridge(shlex.split(runner_cmd) if runner_cmd else None, max_workers=workers)
    return pipeline.Services(gateway=gateway, bridge=bridge, search=search, fetcher=fetcher)


def _write_manifest(out_dir: Path, mode: str, cfg: PipelineConfig, ablations, paths, started, runtime_stats) -> None:
    doc = {
        "run_id": uuid.uuid4().hex,
        "mode": mode,
        "config": dataclasses.asdict(cfg),
        "ablations": sorted(ablations),
        "paths": paths,
        "templates": template_ids(),
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "runtime_stats": runtime_stats,
    }
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


@main.command()
@run_options
@config_options
@click.option("--task-file", type=click.Path(exists=True), default=None, help="Task file holding the problem.")
@click.option("--id", "problem_id", default=None, help="Problem id inside --task-file.")
@click.option("--problem", "inline_problem", default=None, help="Inline problem description.")
def solve(mode, config_path, out_dir, transcript_path, search_cache_path, fixtures_dir,
          runner_cmd, ablations, workers, model, task_file, problem_id, inline_problem, **overrides):
    """Solve one problem end to end and write its artifacts."""
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    t0 = time.monotonic()
    try:
        cfg = _build_config(config_path, ablations, overrides)
        if inline_problem:
            problem = ProblemSpec(id="inline", description=inline_problem)
        elif task_file and problem_id:
            candidates = [p for p in load_task_file(task_file) if p.id == problem_id]
            if not candidates:
                raise click.UsageError(f"problem {problem_id!r} not found in {task_file}")
            problem = candidates[0]
        else:
            raise click.UsageError("need --problem, or --task-file with --id")

        services = _build_services(mode, transcript_path, search_cache_path, fixtures_dir,
                                   runner_cmd, workers, model)
        result = pipeline.solve_problem(problem, cfg, services)

        out = Path(out_dir)
        pipeline.write_solve_artifacts(out, result)
        pipeline.write_prompt_log(out, services.gateway)
        _write_manifest(
            out, mode, cfg, ablations,
            {"transcript": transcript_path, "search_cache": search_cache_path, "fixtures": fixtures_dir},
            started, {"total_s": round(time.monotonic() - t0, 3)},
        )
    except click.UsageError:
        raise
    except (CodeloopError, EnvironmentError, OSError, ValueError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc
    click.echo(f"solved {problem.id}: decision={result.trace.decision} revision={result.final.revision}")


def _solve_and_judge(problem, cfg, services, sample_dir) -> evaluator.Verdict:
    try:
        result = pipeline.solve_problem(problem, cfg, services)
        pipeline.write_solve_artifacts(sample_dir, result)
        return evaluator.judge(problem, result.final, services.bridge, cfg)
    except (CodeloopError, EnvironmentError) as exc:
        log.warning("problem %s failed: %s", problem.id, exc)
        return evaluator.failed_verdict(problem, f"{type(exc).__name__}: {exc}")


@main.command()
@run_options
@config_options
@click.option("--task-file", type=click.Path(exists=True), required=True)
@click.option("--samples", type=int, default=1, show_default=True, help="Samples per problem (n).")
@click.option("--ks", default="1,3,5", show_default=True, help="Comma-separated Ks for Pass@K.")
def bench(mode, config_path, out_dir, transcript_path, search_cache_path, fixtures_dir,
          runner_cmd, ablations, workers, model, task_file, samples, ks, **overrides):
    """Solve and judge every problem in a task file; write the report."""
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    t0 = time.monotonic()
    try:
        cfg = _build_config(config_path, ablations, overrides)
        problems = load_task_file(task_file)
        judgeable = [p for p in problems if p.eval_bundle is not None]
        if not judgeable:
            raise click.ClickException(f"no problems with eval bundles in {task_file}")
        k_list = [int(x) for x in ks.split(",") if x.strip()]

        services = _build_services(mode, transcript_path, search_cache_path, fixtures_dir,
                                   runner_cmd, workers, model)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        tasks = [(p, s) for p in judgeable for s in range(samples)]
        verdicts: dict[tuple[str, int], evaluator.Verdict] = {}
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            futures = {
                pool.submit(_solve_and_judge, p, cfg, services, out / "problems" / p.id / f"s{s}"): (p.id, s)
                for p, s in tasks
            }
            for future, key in futures.items():
                verdicts[key] = future.result()
                log.info("judged %s sample %d: passed=%s", key[0], key[1], verdicts[key].passed)

        verdicts_by_problem = {
            p.id: [verdicts[(p.id, s)] for s in range(samples)] for p in judgeable
        }
        report = evaluator.aggregate(judgeable, verdicts_by_problem, k_list)
        report_doc = evaluator.report_to_doc(report, ablations=tuple(ablations))
        (out / "report.json").write_text(
            json.dumps(report_doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        (out / "report.md").write_text(evaluator.report_to_markdown(report), encoding="utf-8")
        pipeline.write_prompt_log(out, services.gateway)
        _write_manifest(
            out, mode, cfg, ablations,
            {"transcript": transcript_path, "search_cache": search_cache_path,
             "fixtures": fixtures_dir, "task_file": str(task_file)},
            started, {"total_s": round(time.monotonic() - t0, 3)},
        )
    except click.ClickException:
        raise
    except (CodeloopError, EnvironmentError, OSError, ValueError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc
    pass1 = report.pass_at.get(1)
    click.echo(f"bench done: {len(judgeable)} problems, pass@1={pass1 if pass1 is None else round(pass1, 4)}")


@main.group()
def fixtures() -> None:
    """Fixture maintenance."""


@fixtures.command()
@click.option("--transcript", "transcript_path", type=click.Path(), default=None)
@click.option("--search-cache", "search_cache_path", type=click.Path(), default=None)
@click.option("--fixtures", "fixtures_dir", type=click.Path(), default=None)
@click.option("--stub-rules", type=click.Path(), default=None)
def verify(transcript_path, search_cache_path, fixtures_dir, stub_rules) -> None:
    """Check that replay fixtures exist, parse, and are internally consistent."""
    problems: list[str] = []

    def check(label: str, fn) -> None:
        try:
            fn()
            click.echo(f"ok: {label}")
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            problems.append(label)
            click.echo(f"FAIL: {label}: {exc}")

    if transcript_path:
        def check_transcript():
            doc = json.loads(Path(transcript_path).read_text(encoding="utf-8"))
            assert isinstance(doc.get("entries"), dict), "transcript needs an 'entries' object"
        check(f"transcript {transcript_path}", check_transcript)
    if search_cache_path:
        def check_cache():
            doc = json.loads(Path(search_cache_path).read_text(encoding="utf-8"))
            assert all(isinstance(v, list) for v in doc.values()), "cache values must be URL lists"
        check(f"search cache {search_cache_path}", check_cache)
    if fixtures_dir:
        def check_corpus():
            corpus = PageCorpus(fixtures_dir)
            urls = corpus.urls()
            assert urls, "corpus manifest is empty"
            for url in urls:
                html = corpus.get(url)
                assert html, f"missing page for {url}"
                parse_html(html)
        check(f"fixture corpus {fixtures_dir}", check_corpus)
    if stub_rules:
        def check_rules():
            doc = json.loads(Path(stub_rules).read_text(encoding="utf-8"))
            assert isinstance(doc.get("rules"), list) and doc["rules"], "rules file needs a 'rules' list"
            for rule in doc["rules"]:
                assert isinstance(rule.get("result"), dict), "every rule needs a result object"
        check(f"stub rules {stub_rules}", check_rules)

    if not any([transcript_path, search_cache_path, fixtures_dir, stub_rules]):
        raise click.UsageError("nothing to verify; pass at least one fixture path")
    if problems:
        raise click.ClickException(f"{len(problems)} fixture check(s) failed")


if __name__ == "__main__":
    main()
