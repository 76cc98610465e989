"""Compare the MILP against exhaustive enumeration on random small grids.

    python scripts/oracle_crosscheck.py --cases 200 --seed 0
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from riskots.ots import Infeasible, build_problem, enumerate_states, solve
from riskots.synth import SynthConfig, random_case


def objective_or_none(fn):
    try:
        return fn().objective
    except Infeasible:
        return None


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--squeeze", type=float, default=1.0,
                    help="scale every drawn limit, values below 1 produce infeasible cases")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    agree = infeasible = 0
    t_solve = t_enum = 0.0
    for k in range(args.cases):
        grid = random_case(rng, SynthConfig())
        if args.squeeze != 1.0:
            grid = replace(grid, branches=tuple(replace(b, limit=b.limit * args.squeeze)
                                                for b in grid.branches))
        t0 = time.perf_counter()
        a = objective_or_none(lambda: solve(build_problem(grid)))
        t1 = time.perf_counter()
        b = objective_or_none(lambda: enumerate_states(grid, grid.n_branch))
        t2 = time.perf_counter()
        t_solve, t_enum = t_solve + t1 - t0, t_enum + t2 - t1
        same = (a is None and b is None) or (a is not None and b is not None and abs(a - b) <= 1e-6)
        agree += same
        infeasible += a is None
        if not same:
            print(f"case {k}: solve {a} enumerate {b} ({grid.n_bus} buses, {grid.n_branch} branches)")
    print(f"{agree}/{args.cases} agree, {infeasible} infeasible; "
          f"solve {t_solve:.1f} s, enumerate {t_enum:.1f} s")


if __name__ == "__main__":
    main()
