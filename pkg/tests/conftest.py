from __future__ import annotations

import time
from pathlib import Path

import pytest

from mobilebench.device import load_world
from mobilebench.runner import RunConfig, load_tasks, run

WORLD = Path(__file__).resolve().parents[1] / "src" / "mobilebench" / "data" / "worlds" / "phone.yaml"

_criteria: dict[str, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test checks")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            label = mark.args[0]
            _criteria.setdefault(label.split(" ", 1)[0], (label, []))


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    key = label.split(" ", 1)[0]
    _criteria.setdefault(key, (label, []))[1].append(report.outcome)


@pytest.fixture(autouse=True)
def _tag_criterion(request):
    mark = request.node.get_closest_marker("criterion")
    if mark is not None:
        request.node.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: int(k[2:])):
        label, outcomes = _criteria[key]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        if not outcomes:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"{verdict:<7} {label}")


@pytest.fixture
def phone():
    return load_world(WORLD)


@pytest.fixture(scope="session")
def golden_tasks():
    return load_tasks()


@pytest.fixture(scope="session")
def golden_run(tmp_path_factory, golden_tasks):
    out = tmp_path_factory.mktemp("golden")
    t0 = time.perf_counter()
    result = run(RunConfig(out_dir=out, seed=7), golden_tasks)
    result.elapsed = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def sabotage_run(tmp_path_factory, golden_tasks):
    out = tmp_path_factory.mktemp("sabotage")
    return run(RunConfig(out_dir=out, script="sabotage", seed=7), golden_tasks)
