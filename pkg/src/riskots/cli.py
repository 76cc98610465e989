"""``ots`` command line: solve, enumerate, security, verify.

Exit status is 0 on success, 2 when no secure state exists and 1 on any other
error; errors are also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .analysis import OVERLOAD_TOL, security_report
from .grid import GridCase, SwitchingState, load_case, validate_switching
from .milp.lpformat import serialize_lp
from .ots import Infeasible, OtsConfig, OtsSolution, build_problem, enumerate_states, solve, verify
from .report import dumps, emit_dot, read_report, report_from_dict, report_to_dict

COMMANDS = ("solve", "enumerate", "security", "verify")


class VerificationFailed(RuntimeError):
    def __init__(self, issues: list[str]):
        super().__init__(f"{len(issues)} discrepancies")
        self.issues = issues


@dataclass
class RunConfig:
    case: Path
    command: str
    max_open: int | None = None
    backend: str | None = None
    theta_max: float = math.pi
    sigma_max: float | None = None
    overload_tol: float = OVERLOAD_TOL
    int_tol: float = 1e-6
    workers: int = 1
    open: str = ""
    report: Path | None = None
    dot: Path | None = None
    lp: Path | None = None
    verify_report: Path | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not (self.overload_tol > 0 and self.int_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def ots_config(self) -> OtsConfig:
        return OtsConfig(theta_max=self.theta_max, sigma_max=self.sigma_max,
                         int_tol=self.int_tol, backend=self.backend,
                         overload_tol=self.overload_tol, max_open=self.max_open)


def parse_open(grid: GridCase, text: str) -> list[int]:
    """Comma-separated branch ids or two-letter names (``"3,JK"``)."""
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        out.append(int(tok) if tok.lstrip("-").isdigit() else grid.branch_by_label(tok))
    return out


def _check_max_open(grid: GridCase, k: int | None) -> None:
    if k is not None and not 0 <= k <= grid.n_branch:
        raise ValueError(f"max_open must be in [0, {grid.n_branch}]")


def _solution_meta(grid: GridCase, sol: OtsSolution, extra: dict | None = None) -> dict:
    meta = {
        "provenance": sol.provenance,
        "objective_mw": sol.objective,
        "gap": sol.gap,
        "openings": sol.openings,
        "opening_names": [grid.branch_name(e) for e in sol.openings],
    }
    if extra:
        meta.update(extra)
    return meta


def _emit(cfg: RunConfig, grid: GridCase, report, solution: dict | None = None) -> dict:
    data = report_to_dict(report, grid, solution)
    text = dumps(data)
    if cfg.report:
        cfg.report.write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.dot:
        emit_dot(grid, report, cfg.dot)
    return data


def compare_report(grid: GridCase, data: dict, tol: float = 1e-6) -> list[str]:
    """Discrepancies between a stored report and a fresh analysis of its state."""
    recorded = report_from_dict(data)
    issues = validate_switching(grid, recorded.state)
    if issues:
        return issues
    fresh = security_report(grid, recorded.state)
    if abs(fresh.risk - recorded.risk) > tol * max(1.0, fresh.risk):
        issues.append(f"risk {recorded.risk} differs from oracle {fresh.risk}")
    if len(recorded.per_contingency) != len(fresh.per_contingency):
        issues.append("contingency list differs from the case")
        return issues
    for rec, new in zip((recorded.base, *recorded.per_contingency),
                        (fresh.base, *fresh.per_contingency)):
        name = "base" if new.contingency is None else f"contingency {new.contingency}"
        if rec.contingency != new.contingency:
            issues.append(f"{name}: recorded as {rec.contingency}")
            continue
        if rec.energized.energized != new.energized.energized:
            issues.append(f"{name}: energized set differs")
        if rec.overloads != new.overloads:
            issues.append(f"{name}: overloads {list(rec.overloads)} != {list(new.overloads)}")
        if abs(rec.load_lost - new.load_lost) > tol * max(1.0, new.load_lost):
            issues.append(f"{name}: load lost {rec.load_lost} != {new.load_lost}")
        if any(abs(a - b) > tol * max(1.0, abs(b)) for a, b in zip(rec.flows, new.flows)):
            issues.append(f"{name}: flows differ")
    if "solution" in data:
        sol = OtsSolution(recorded.state, float(data["solution"]["objective_mw"]), {},
                          str(data["solution"].get("provenance", "")))
        issues += verify(grid, sol)
    return issues


def run(cfg: RunConfig) -> int:
    grid = load_case(cfg.case)
    _check_max_open(grid, cfg.max_open)
    if cfg.command == "security":
        state = SwitchingState.from_open_set(grid.n_branch, parse_open(grid, cfg.open))
        problems = validate_switching(grid, state)
        if problems:
            raise ValueError("; ".join(problems))
        _emit(cfg, grid, security_report(grid, state, tol=cfg.overload_tol))
        return 0
    if cfg.command == "verify":
        issues = compare_report(grid, read_report(cfg.verify_report))
        if issues:
            raise VerificationFailed(issues)
        sys.stdout.write(dumps({"ok": True}))
        return 0
    if cfg.command == "solve":
        problem = build_problem(grid, cfg.ots_config())
        if cfg.lp:
            cfg.lp.write_text(serialize_lp(problem.model))
        sol = solve(problem)
        extra = {"model": problem.model.stats()}
    else:
        if cfg.max_open is None:
            raise ValueError("enumerate needs --max-open")
        sol = enumerate_states(grid, cfg.max_open, cfg.workers, cfg.overload_tol)
        extra = {"max_open": cfg.max_open}
    report = security_report(grid, sol.state, tol=cfg.overload_tol)
    _emit(cfg, grid, report, _solution_meta(grid, sol, extra))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ots", description="Risk-based optimal transmission switching")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("case", type=Path)
        p.add_argument("--report", type=Path, help="write the report JSON here instead of stdout")
        p.add_argument("--dot", type=Path, help="directory for DOT panels")
        p.add_argument("--tol", type=float, default=OVERLOAD_TOL, help="overload tolerance in MW")

    p = sub.add_parser("solve", help="solve the switching MILP")
    common(p)
    p.add_argument("--backend", default=None)
    p.add_argument("--max-open", type=int, default=None)
    p.add_argument("--lp", type=Path, help="dump the model in LP format")
    p.add_argument("--theta-max", type=float, default=math.pi)
    p.add_argument("--sigma-max", type=float, default=None)
    p.add_argument("--int-tol", type=float, default=1e-6)

    p = sub.add_parser("enumerate", help="exhaustive search over opening sets")
    common(p)
    p.add_argument("--max-open", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("security", help="N-1 analysis of one switching state")
    common(p)
    p.add_argument("--open", default="", help="comma-separated branch ids or names")

    p = sub.add_parser("verify", help="check a stored report against the case")
    p.add_argument("case", type=Path)
    p.add_argument("verify_report", type=Path, metavar="report")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    kw = {k: v for k, v in vars(args).items() if v is not None}
    if "tol" in kw:
        kw["overload_tol"] = kw.pop("tol")
    return RunConfig(**kw)


def _fail(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except Infeasible as exc:
        _fail("infeasible", str(exc))
        return 2
    except VerificationFailed as exc:
        _fail("verification_failed", str(exc), discrepancies=exc.issues)
        return 1
    except Exception as exc:  # noqa: BLE001 - every other failure maps to exit 1
        _fail(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
