"""Shared fixtures: cached simulation runs and the per-criterion acceptance summary."""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import pytest
import yaml

from critheat.cli import bundled_config, main

# criterion number -> short measured detail, filled by the acceptance tests
DETAILS: dict[int, str] = {}
_CRIT = re.compile(r"test_criterion_(\d+)")


@pytest.fixture
def detail():
    def put(n: int, text: str) -> None:
        DETAILS[n] = text
        print(f"criterion {n}: {text}")
    return put


class SimRun:
    def __init__(self, code: int, out: Path):
        self.code = code
        self.out = out
        self.manifest = json.loads((out / "manifest.json").read_text()) if code == 0 else {}
        self.csv_bytes = (out / "survival.csv").read_bytes() if code == 0 else b""
        self.rows = []
        if code == 0:
            with open(out / "survival.csv", newline="") as fh:
                self.rows = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]

    @property
    def slope(self) -> float:
        return self.manifest["slope"]

    @property
    def stderr(self) -> float:
        return self.manifest["slope_stderr"]

    @property
    def ratios(self) -> list[float]:
        return [r["ratio"] for r in self.rows]


@pytest.fixture(scope="session")
def simulation(tmp_path_factory):
    """simulation(config_name, workers, **component_exponents) -> SimRun, cached per session.

    Runs go through the CLI ``simulate`` command so the acceptance suite
    exercises the same code path as a user.
    """
    cache: dict = {}

    def run(name: str, workers: int = 1, **exponents) -> SimRun:
        key = (name, workers, tuple(sorted(exponents.items())))
        if key not in cache:
            base = tmp_path_factory.mktemp(f"sim-{name}-w{workers}")
            cfg_path = bundled_config(name)
            if exponents:
                cfg = yaml.safe_load(cfg_path.read_text())
                for comp in cfg["components"]:
                    if comp["name"] in exponents:
                        comp["target_exponent"] = exponents[comp["name"]]
                cfg_path = base / f"{name}.yaml"
                cfg_path.write_text(yaml.safe_dump(cfg))
            out = base / "out"
            code = main(["simulate", "--config", str(cfg_path), "--workers", str(workers), "--out", str(out)])
            cache[key] = SimRun(code, out)
        return cache[key]

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcome: dict[int, str] = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = _CRIT.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            n = int(m.group(1))
            bad = status != "passed"
            if bad or n not in outcome:
                outcome[n] = "FAIL" if bad else "PASS"
    if not outcome:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcome):
        extra = f"  ({DETAILS[n]})" if n in DETAILS else ""
        terminalreporter.write_line(f"criterion {n:2d}: {outcome[n]}{extra}")
