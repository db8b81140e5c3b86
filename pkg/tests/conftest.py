import os
import sys
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from krylov_lab.experiments import ExperimentSpec, run_experiment  # noqa: E402

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def _desk(kind, tmp_path_factory):
    out = tmp_path_factory.mktemp(kind)
    spec = ExperimentSpec(kind=kind, n=64, m=40, seed=1, profile="desk", output_dir=str(out),
                          threads=os.cpu_count() or 1)
    start = time.perf_counter()
    report = run_experiment(spec)
    return report, time.perf_counter() - start, out


@pytest.fixture(scope="session")
def desk_basis_sweep(tmp_path_factory):
    """Desk-scale basis sweep: (report, seconds, output dir)."""
    return _desk("basis_sweep", tmp_path_factory)


@pytest.fixture(scope="session")
def desk_beta_sweep(tmp_path_factory):
    return _desk("beta_sweep", tmp_path_factory)


@pytest.fixture(scope="session")
def desk_time_target(tmp_path_factory):
    return _desk("time_target", tmp_path_factory)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
