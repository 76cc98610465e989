"""Walk the 14-bus fixture from the all-closed grid to the optimized switching state.

Prints one row per state (all closed, the manual {JK, IN, GI} attempt, the
optimizer's choice) with openings, overloading and de-energizing contingency
counts, and both average-loss figures. ``--dot DIR`` also writes the panels.

    python scripts/run_case14.py --dot out/panels
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from riskots import fixture_path, load_case
from riskots.analysis import security_report
from riskots.grid import SwitchingState
from riskots.ots import build_problem, enumerate_states, solve
from riskots.report import emit_dot

MANUAL = ("JK", "IN", "GI")


def describe(grid, label, state):
    r = security_report(grid, state)
    names = ",".join(sorted(grid.branch_name(e) for e in state.open_set)) or "-"
    over = ",".join(f"{grid.branch_name(c)}->{'/'.join(grid.branch_name(e) for e in r.outcome(c).overloads)}"
                    for c in r.overloading) or "-"
    print(f"{label:<12} {len(state.open_set):>3} {len(r.overloading):>5} {len(r.deenergizing):>6} "
          f"{100 * r.avg_loss_fraction:>7.2f} {100 * r.avg_loss_fraction_deenergizing:>7.2f} "
          f"{r.risk:>8.3f}  open={names}  overloads={over}")
    return r


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", type=Path, default=None)
    ap.add_argument("--dot", type=Path, default=None)
    ap.add_argument("--enumerate", action="store_true", help="also run the exhaustive oracle")
    args = ap.parse_args(argv)
    grid = load_case(args.case or fixture_path())

    t0 = time.perf_counter()
    sol = solve(build_problem(grid))
    t_solve = time.perf_counter() - t0

    print(f"{'state':<12} {'open':>3} {'overl':>5} {'de-en':>6} {'avg%all':>7} {'avg%hit':>7} "
          f"{'risk MW':>8}")
    states = {
        "all-closed": SwitchingState.closed(grid.n_branch),
        "manual": SwitchingState.from_open_set(grid.n_branch,
                                               [grid.branch_by_label(n) for n in MANUAL]),
        "optimized": sol.state,
    }
    reports = {label: describe(grid, label, s) for label, s in states.items()}
    print(f"solve: {t_solve:.2f} s, objective {sol.objective:.3f} MW, backend {sol.provenance}")

    if args.enumerate:
        t0 = time.perf_counter()
        ref = enumerate_states(grid, 6)
        print(f"enumerate(6): {time.perf_counter() - t0:.1f} s, objective {ref.objective:.3f} MW, "
              f"open={','.join(sorted(grid.branch_name(e) for e in ref.openings))}")

    if args.dot:
        for label, r in reports.items():
            emit_dot(grid, r, args.dot / label)
        print(f"panels written under {args.dot}")


if __name__ == "__main__":
    main()
