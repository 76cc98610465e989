from pathlib import Path

import numpy as np
import pytest

from riskots import fixture_path, load_case
from riskots.grid import Branch, Bus, GridCase

DATA = Path(__file__).parent / "data"


def make_grid(gen, load, edges, susceptance=1.0, limit=1e4, probabilities=None,
              source_bus=None, base_mva=100.0) -> GridCase:
    """Small grid from per-bus gen/load and ``(from, to)`` edges."""
    buses = tuple(Bus(i, chr(ord("A") + i), float(g), float(d))
                  for i, (g, d) in enumerate(zip(gen, load)))
    sus = susceptance if np.iterable(susceptance) else [susceptance] * len(edges)
    lim = limit if np.iterable(limit) else [limit] * len(edges)
    branches = tuple(Branch(e, a, b, float(sus[e]), float(lim[e])) for e, (a, b) in enumerate(edges))
    probabilities = probabilities or {e: 0.1 for e in range(len(edges))}
    return GridCase(buses, branches, tuple(sorted(probabilities)), probabilities,
                    source_bus=source_bus, base_mva=base_mva)


@pytest.fixture(scope="session")
def case14():
    return load_case(fixture_path())


@pytest.fixture
def two_bus():
    return make_grid([100, 0], [0, 100], [(0, 1)], limit=150)


@pytest.fixture
def triangle():
    # 1 MW from bus A to bus C, equal susceptances
    return make_grid([1, 0, 0], [0, 0, 1], [(0, 1), (1, 2), (0, 2)], base_mva=1.0)


@pytest.fixture
def path3():
    return make_grid([30, 0, 0], [0, 10, 20], [(0, 1), (1, 2)])


@pytest.fixture(params=range(5))
def rng(request):
    return np.random.default_rng(request.param)


# one summary line per acceptance criterion, taken from the test docstrings
_CRITERIA: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.name.startswith("test_criterion_") and (rep.when == "call" or rep.failed):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        verdict = "PASS" if rep.passed else "FAIL"
        if item.name not in _CRITERIA or verdict == "FAIL":
            _CRITERIA[item.name] = (verdict, doc)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[2])):
        verdict, doc = _CRITERIA[name]
        terminalreporter.write_line(f"{verdict}  {doc}")
