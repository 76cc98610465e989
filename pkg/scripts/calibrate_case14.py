"""Calibrate the 14-bus fixture (injections and flow limits).

The published case has no flow limits and the study's loading scenario is only
shown graphically, so both are searched for. A scenario is accepted when, with
limits derived from it,

* the all-closed N-1 analysis overloads exactly four contingencies, all on DI,
* the state {JK, IN, GI} overloads BE when AE trips,
* the target opening set is secure and every cheaper state with at most six
  openings is not, and the target's mean demand loss is within the band.

Loads and the B/H generators are tuned by a seeded random local search on a
penalty that is zero exactly when all three hold. The N-1 sweeps use an
outage-compensation evaluator; ``write_fixture`` re-checks the result with the
direct-solve oracle in ``riskots.analysis`` before writing anything.

    python scripts/calibrate_case14.py --out src/riskots/data
"""

from __future__ import annotations

import argparse
import itertools
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from riskots.analysis import security_report
from riskots.connectivity import energized_set, is_connected
from riskots.grid import Bus, GridCase, SwitchingState, incidence, write_case
from riskots.matpower import import_matpower

HERE = Path(__file__).resolve().parent
CASE14 = HERE.parent / "tests" / "data" / "case14.m"
LABELS = list("ABCDEFGHIJKLMN")
TARGET_LOSS = 0.067
LOSS_BAND = 0.003
MARGIN = 0.05  # MW between any limit and the flows that must (not) trip it
SOURCE = 0


class FastN1:
    """N-1 flows for every connected state with at most ``max_open`` openings."""

    def __init__(self, grid: GridCase, max_open: int = 6):
        self.grid = grid
        self.a = incidence(grid)
        self.b = np.array([br.susceptance for br in grid.branches]) * grid.base_mva
        self.states = [
            s for k in range(max_open + 1)
            for s in itertools.combinations(range(grid.n_branch), k)
            if is_connected(grid, s)
        ]
        self.index = {s: k for k, s in enumerate(self.states)}
        self.size = np.array([len(s) for s in self.states])
        # topology only: how often each bus is lost, and which contingencies cut
        self.lost = np.zeros((len(self.states), grid.n_bus))
        self.cuts: list[dict[int, np.ndarray]] = []
        for k, s in enumerate(self.states):
            cuts = {}
            for c in grid.contingencies:
                if c in s:
                    continue
                on = np.array(energized_set(grid, set(s) | {c}, SOURCE).energized, bool)
                if not on.all():
                    cuts[c] = on
                    self.lost[k] += ~on
            self.cuts.append(cuts)
        self.n_cut = np.array([len(c) for c in self.cuts])
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _sensitivities(self, k: int):
        if k not in self._cache:
            n = self.grid.n_bus
            keep = [i for i in range(n) if i != SOURCE]
            closed = np.ones(self.grid.n_branch, bool)
            closed[list(self.states[k])] = False
            bw = self.b * closed
            lap = (self.a * bw) @ self.a.T
            x = np.zeros((n, n))
            x[np.ix_(keep, keep)] = np.linalg.inv(lap[np.ix_(keep, keep)])
            h = (bw[:, None] * self.a.T) @ x
            self._cache[k] = (h, h @ self.a)
        return self._cache[k]

    def flows(self, k: int, gen: np.ndarray, load: np.ndarray):
        """Yield ``(contingency or None, flows)`` for the base case and each contingency."""
        h, mm = self._sensitivities(k)
        f0 = h @ (gen - load)
        yield None, f0
        s = self.states[k]
        for c in self.grid.contingencies:
            if c in s:
                yield c, f0
                continue
            on = self.cuts[k].get(c)
            if on is not None:
                g_on, d_on = gen * on, load * on
                f = h @ (d_on.sum() / g_on.sum() * g_on - d_on)
            else:
                f = f0 + mm[:, c] * (f0[c] / (1.0 - mm[c, c]))
            f[c] = 0.0
            yield c, f

    def envelope(self, k, gen, load) -> np.ndarray:
        return np.max([np.abs(f) for _, f in self.flows(k, gen, load)], axis=0)

    def secure(self, k, gen, load, limits) -> bool:
        return all(np.all(np.abs(f) <= limits) for _, f in self.flows(k, gen, load))


def scenario_grid(base: GridCase, gen, load) -> GridCase:
    buses = tuple(Bus(i, LABELS[i], float(gen[i]), float(load[i])) for i in range(base.n_bus))
    return replace(base, buses=buses)


def evaluate(fast: FastN1, gen, load, target: tuple[int, ...], over_hit: bool):
    """Return ``(penalty, limits, info)``; penalty 0 means every goal holds."""
    g = fast.grid
    nb = g.branch_by_label
    di, be, ae = nb("DI"), nb("BE"), nb("AE")
    closed_k = fast.index[()]
    inter_k = fast.index[tuple(sorted(nb(x) for x in ("JK", "IN", "GI")))]
    t_k = fast.index[target]

    per = dict(fast.flows(closed_k, gen, load))
    base0 = np.abs(per.pop(None))
    flows0 = np.abs(np.array([per[c] for c in g.contingencies]))
    di_sorted = np.sort(flows0[:, di])[::-1]
    lower = np.maximum(flows0.max(0), base0) + MARGIN
    lower[di] = max(di_sorted[4], base0[di]) + MARGIN
    limits = np.maximum(lower, fast.envelope(t_k, gen, load) + MARGIN)
    be_ae = abs(dict(fast.flows(inter_k, gen, load))[ae][be])

    penalty = max(0.0, limits[di] - (di_sorted[3] - MARGIN))
    penalty += max(0.0, limits[be] - (be_ae - MARGIN))

    loss = fast.lost @ load
    denom = (fast.n_cut[t_k] if over_hit else len(g.contingencies)) * load.sum()
    avg = loss[t_k] / denom
    penalty += 100 * max(0.0, abs(avg - TARGET_LOSS) - LOSS_BAND)
    pull = abs(avg - TARGET_LOSS)

    cheaper = np.flatnonzero((loss < loss[t_k] - 1e-9) |
                             ((np.abs(loss - loss[t_k]) <= 1e-9) & (fast.size < len(target))))
    rivals = []
    if penalty == 0:
        # only worth the sweep once the cheap goals hold
        slack = limits + MARGIN
        for k in cheaper[np.argsort(loss[cheaper], kind="stable")]:
            if fast.secure(k, gen, load, slack):
                rivals.append(fast.states[k])
                if len(rivals) >= 5:
                    break
        penalty += len(rivals)
    info = {"avg": avg, "rivals": rivals, "be_ae": be_ae, "di_top": di_sorted[:5].tolist(),
            "score": penalty + pull}
    return penalty, limits, info


def search(fast: FastN1, target, over_hit, steps, seed, gen0, load0, verbose=True):
    rng = np.random.default_rng(seed)
    gen, load = gen0.copy(), load0.copy()
    best, limits, info = evaluate(fast, gen, load, target, over_hit)
    score = info["score"]
    for step in range(steps):
        if best == 0 and abs(info["avg"] - TARGET_LOSS) < LOSS_BAND / 3:
            break
        g2, l2 = gen.copy(), load.copy()
        for _ in range(rng.integers(1, 4)):
            i = rng.integers(1, 14)
            l2[i] = max(0.0, round(l2[i] * rng.uniform(0.6, 1.6) + rng.normal(0, 2), 1))
        if rng.random() < 0.3:
            j = rng.choice([1, 7])
            g2[j] = max(0.0, round(g2[j] + rng.normal(0, 5), 1))
        g2[0] = round(l2.sum() - g2[1:].sum(), 1)
        if g2[0] <= g2[1:].max():
            continue
        pen, lim, inf = evaluate(fast, g2, l2, target, over_hit)
        temp = 0.02 * (1 - step / steps)
        if inf["score"] <= score or rng.random() < np.exp((score - inf["score"]) / max(temp, 1e-9)):
            gen, load, best, limits, info, score = g2, l2, pen, lim, inf, inf["score"]
            if verbose:
                print(f"step {step} penalty {best:.3f} avg {info['avg']:.4f} "
                      f"rivals {len(info['rivals'])}", flush=True)
    return best, gen, load, limits, info


def write_fixture(base: GridCase, gen, load, limits, out: Path) -> GridCase:
    limits = np.round(np.asarray(limits), 2)
    grid = scenario_grid(base, gen, load)
    branches = tuple(replace(br, limit=float(limits[br.id])) for br in grid.branches)
    grid = replace(grid, branches=branches,
                   probabilities={c: 1.0 / len(grid.contingencies) for c in grid.contingencies})
    report = security_report(grid, SwitchingState.closed(grid.n_branch))
    di = grid.branch_by_label("DI")
    bad = [o.contingency for o in report.per_contingency if o.overloads and o.overloads != (di,)]
    if len(report.overloading) != 4 or bad or report.base.overloads:
        raise SystemExit(f"oracle disagrees with the calibration: {report.overloading}, {bad}")
    out.mkdir(parents=True, exist_ok=True)
    write_case(grid, out / "case14_fixture.json")
    with open(out / "case14_limits.csv", "w") as fh:
        fh.write("branch_id,limit_mw\n")
        for br in branches:
            fh.write(f"{br.id},{br.limit}\n")
    return grid


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", default="JK,IN,GI,BE,CD")
    ap.add_argument("--over-hit", action="store_true",
                    help="average the loss over de-energizing contingencies only")
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--h-gen", type=float, default=20.0, help="starting generation at bus H")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)

    base = import_matpower(CASE14, limits={e: 1e4 for e in range(20)}, labels=LABELS)
    fast = FastN1(base)
    target = tuple(sorted(base.branch_by_label(x) for x in args.target.split(",")))
    load0 = base.load.copy()
    gen0 = np.zeros(14)
    gen0[1], gen0[7] = 40.0, args.h_gen
    gen0[0] = load0.sum() - gen0[1:].sum()
    pen, gen, load, limits, info = search(fast, target, args.over_hit, args.steps, args.seed,
                                          gen0, load0)
    print("penalty", pen, info)
    print("gen", gen.tolist())
    print("load", load.tolist())
    print("limits", np.round(limits, 2).tolist())
    if pen == 0 and args.out:
        write_fixture(base, gen, load, limits, args.out)
        (args.out / "case14_scenario.json").write_text(json.dumps(
            {"target": args.target, "over_hit": args.over_hit, "seed": args.seed,
             "gen_mw": gen.tolist(), "load_mw": load.tolist()}, indent=2) + "\n")
    return 0 if pen == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
