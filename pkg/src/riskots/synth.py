"""Random small grids for property tests and oracle cross-checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import InfeasibleBalance, analyze_contingency
from .connectivity import is_connected, resolve_source
from .grid import Branch, Bus, GridCase, SwitchingState, validate_case


@dataclass(frozen=True)
class SynthConfig:
    min_bus: int = 4
    max_bus: int = 8
    max_branch: int = 12
    # susceptances in per unit; large values keep angles well inside the MILP bounds
    susceptance: tuple[float, float] = (5.0, 20.0)
    load: tuple[float, float] = (5.0, 60.0)
    max_generators: int = 3
    positive_loads: bool = False
    # share of single-opening states that should be secure
    feasible_share: tuple[float, float] = (0.2, 0.8)


def random_topology(rng: np.random.Generator, n_bus: int, n_branch: int) -> list[tuple[int, int]]:
    """Connected simple graph: a random spanning tree plus distinct extra edges."""
    order = rng.permutation(n_bus)
    edges = set()
    for k in range(1, n_bus):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    free = [(a, b) for a in range(n_bus) for b in range(a + 1, n_bus) if (a, b) not in edges]
    extra = min(n_branch - len(edges), len(free))
    for k in rng.choice(len(free), size=extra, replace=False) if extra > 0 else []:
        edges.add(free[int(k)])
    out = sorted(edges)
    rng.shuffle(out)
    # random orientation so both signs of the incidence matrix get exercised
    return [(b, a) if rng.random() < 0.5 else (a, b) for a, b in out]


def random_injections(rng: np.random.Generator, n_bus: int, cfg: SynthConfig):
    n_gen = int(rng.integers(1, min(cfg.max_generators, n_bus - 1) + 1))
    gens = rng.choice(n_bus, size=n_gen, replace=False)
    load = np.round(rng.uniform(*cfg.load, size=n_bus), 1)
    if not cfg.positive_loads:
        load[gens] = 0.0
        load[rng.random(n_bus) < 0.15] = 0.0
        if load.sum() == 0:
            load[[i for i in range(n_bus) if i not in gens][0]] = 10.0
    share = rng.dirichlet(np.ones(n_gen))
    gen = np.zeros(n_bus)
    gen[gens] = share * load.sum()
    return gen, load


def _envelope(grid: GridCase, state: SwitchingState, source: int) -> np.ndarray | None:
    try:
        flows = [analyze_contingency(grid, state, c, source, warn=False).flows
                 for c in (None, *grid.contingencies)]
    except InfeasibleBalance:
        return None
    return np.max(np.abs(np.array(flows)), axis=0)


def draw_limits(rng: np.random.Generator, grid: GridCase, cfg: SynthConfig,
                tries: int = 40) -> np.ndarray | None:
    """Limits under which a share of single-opening states within ``cfg.feasible_share`` is secure."""
    source = resolve_source(grid)
    singles = [SwitchingState.from_open_set(grid.n_branch, [e]) for e in range(grid.n_branch)]
    singles = [s for s in singles if is_connected(grid, s.open_set)]
    if not singles:
        return None
    envs = [_envelope(grid, s, source) for s in singles]
    if any(e is None for e in envs):
        return None
    envs = np.array(envs)
    lo, hi = cfg.feasible_share
    for _ in range(tries):
        k = max(1, int(round(rng.uniform(lo, hi) * len(singles))))
        pick = rng.choice(len(singles), size=k, replace=False)
        limits = envs[pick].max(axis=0) * 1.001 + 0.05
        # zero-flow branches still need a positive limit
        limits = np.maximum(limits, 1.0)
        share = np.mean([(env <= limits).all() for env in envs])
        if lo <= share <= hi:
            return np.round(limits, 3) + 0.001
    return None


def random_case(rng: np.random.Generator, cfg: SynthConfig = SynthConfig(),
                with_limits: bool = True, max_tries: int = 50) -> GridCase:
    for _ in range(max_tries):
        n_bus = int(rng.integers(cfg.min_bus, cfg.max_bus + 1))
        n_branch = int(rng.integers(n_bus - 1, cfg.max_branch + 1))
        edges = random_topology(rng, n_bus, n_branch)
        gen, load = random_injections(rng, n_bus, cfg)
        buses = [Bus(i, f"B{i}", float(gen[i]), float(load[i])) for i in range(n_bus)]
        sus = np.round(rng.uniform(*cfg.susceptance, size=len(edges)), 3)
        branches = [Branch(e, a, b, float(sus[e]), 1e6) for e, (a, b) in enumerate(edges)]
        probs = {e: float(np.round(rng.uniform(0.001, 0.1), 4)) for e in range(len(edges))}
        grid = GridCase(tuple(buses), tuple(branches), tuple(range(len(edges))), probs)
        if not with_limits:
            return validate_case(grid)
        limits = draw_limits(rng, grid, cfg)
        if limits is None:
            continue
        branches = [Branch(br.id, br.from_bus, br.to_bus, br.susceptance, float(limits[br.id]))
                    for br in branches]
        return validate_case(GridCase(tuple(buses), tuple(branches), grid.contingencies, probs))
    raise RuntimeError("could not draw a case with the requested feasibility share")
