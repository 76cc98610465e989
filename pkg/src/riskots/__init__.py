"""Risk-based optimal transmission switching."""

from importlib.resources import files

from .analysis import SecurityReport, analyze_contingency, security_report
from .grid import Branch, Bus, CaseError, GridCase, SwitchingState, load_case
from .ots import (
    BackendFailure,
    Infeasible,
    OtsConfig,
    OtsSolution,
    build_problem,
    enumerate_states,
    solve,
    verify,
)

__all__ = [
    "BackendFailure", "Branch", "Bus", "CaseError", "GridCase", "Infeasible", "OtsConfig",
    "OtsSolution", "SecurityReport", "SwitchingState", "analyze_contingency", "build_problem",
    "enumerate_states", "fixture_path", "load_case", "security_report", "solve", "verify",
]


def fixture_path(name: str = "case14_fixture.json"):
    """Path of a file shipped in ``riskots/data``."""
    return files(__package__) / "data" / name
