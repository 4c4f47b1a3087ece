from __future__ import annotations

import json
import subprocess
import sys

import pytest

from codeloop_runner.protocol import DEFAULT_SERIALIZE_CFG

RUNNER_CMD = [sys.executable, "-m", "codeloop_runner"]


@pytest.fixture
def cfg() -> dict:
    return dict(DEFAULT_SERIALIZE_CFG)


@pytest.fixture(autouse=True)
def fresh_pyplot_state():
    """In production each job gets its own process; in-process tests must
    reset pyplot's figure registry themselves."""
    yield
    plt = sys.modules.get("matplotlib.pyplot")
    if plt is not None:
        plt.close("all")


def make_job(source: str, setup: str = "pad = 0", output_var: str = "result",
             enabled: bool = True, capture_figures: bool = False) -> dict:
    cfg = dict(DEFAULT_SERIALIZE_CFG)
    cfg["enabled"] = enabled
    return {
        "schema": 1,
        "source": source,
        "setup_snippet": setup,
        "output_var": output_var,
        "serialize_cfg": cfg,
        "capture_figures": capture_figures,
    }


def run_runner(job: dict, timeout: float = 60.0) -> subprocess.CompletedProcess:
    return subprocess.run(
        RUNNER_CMD,
        input=json.dumps(job),
        capture_output=True,
        text=True,
        timeout=timeout,
    )


def run_runner_result(job: dict, timeout: float = 60.0) -> dict:
    proc = run_runner(job, timeout)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)
