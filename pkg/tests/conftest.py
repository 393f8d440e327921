"""Shared fixtures and the per-criterion acceptance report.

Acceptance tests carry ``@pytest.mark.ac(k)``. A criterion passes only when
every test tagged with it passes; one summary line per criterion is printed
at the end of the run. Tests can attach a short measurement string through
the ``ac_detail`` fixture.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
CRITERIA = tuple(range(1, 11))

_outcomes: dict[int, list[tuple[str, str]]] = {}
_details: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "ac(k): test belongs to acceptance criterion k")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def ac_detail(request):
    marker = request.node.get_closest_marker("ac")
    if marker is None:
        raise RuntimeError("ac_detail used outside an acceptance test")
    k = int(marker.args[0])

    def record(text: str) -> None:
        _details.setdefault(k, []).append(text)

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("ac")
    if marker is None:
        return
    k = int(marker.args[0])
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(k, []).append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in CRITERIA:
        results = _outcomes.get(k)
        if not results:
            tr.write_line(f"AC{k} NOT RUN")
            continue
        ok = all(o == "passed" for _, o in results)
        failed = [name for name, o in results if o != "passed"]
        line = f"AC{k} {'PASS' if ok else 'FAIL'}"
        if failed:
            line += f" (failed: {', '.join(failed)})"
        if _details.get(k):
            line += " | " + "; ".join(_details[k])
        tr.write_line(line)
