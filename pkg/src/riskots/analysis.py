"""DC security analysis: rebalancing, DC power flow and risk scoring.

This is the simulation oracle. It solves the power flow directly for a given
switching state and never looks at the MILP.

Sign convention: flow on a branch is ``b * (angle[to] - angle[from])`` and
``A @ flows`` equals the bus injections, with ``A`` from :func:`grid.incidence`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .connectivity import EnergizedSet, components, energized_set, is_connected, resolve_source
from .grid import GridCase, SwitchingState

log = logging.getLogger(__name__)

OVERLOAD_TOL = 1e-6
SIGMA_WARN = (0.5, 2.0)


class InfeasibleBalance(RuntimeError):
    """Energized area keeps load but has no generation left to scale."""


class SingularSystem(RuntimeError):
    """Power-flow system could not be solved (unbalanced component or bad data)."""


@dataclass(frozen=True)
class ContingencyOutcome:
    contingency: int | None  # None is the base case
    energized: EnergizedSet
    sigma: float
    flows: tuple[float, ...]
    angles: tuple[float, ...]
    injections: tuple[float, ...]
    overloads: tuple[int, ...]
    load_lost: float

    @property
    def is_base(self) -> bool:
        return self.contingency is None

    @property
    def deenergizes(self) -> bool:
        return not self.energized.all_energized


@dataclass(frozen=True)
class SecurityReport:
    state: SwitchingState
    base: ContingencyOutcome
    per_contingency: tuple[ContingencyOutcome, ...]
    risk: float
    total_load: float

    @property
    def overloading(self) -> list[int]:
        return [o.contingency for o in self.per_contingency if o.overloads]

    @property
    def deenergizing(self) -> list[int]:
        return [o.contingency for o in self.per_contingency if o.deenergizes]

    @property
    def secure(self) -> bool:
        return not self.base.overloads and not self.overloading

    @property
    def avg_loss_fraction(self) -> float:
        """Mean fraction of total demand lost, over every listed contingency."""
        if not self.per_contingency or self.total_load <= 0:
            return 0.0
        return sum(o.load_lost for o in self.per_contingency) / (
            len(self.per_contingency) * self.total_load)

    @property
    def avg_loss_fraction_deenergizing(self) -> float:
        """Mean fraction of total demand lost, over de-energizing contingencies only."""
        hit = [o.load_lost for o in self.per_contingency if o.deenergizes]
        if not hit or self.total_load <= 0:
            return 0.0
        return sum(hit) / (len(hit) * self.total_load)

    def outcome(self, contingency: int | None) -> ContingencyOutcome:
        if contingency is None:
            return self.base
        for o in self.per_contingency:
            if o.contingency == contingency:
                return o
        raise KeyError(contingency)


def effective_open(state: SwitchingState | Iterable[int], contingency: int | None) -> frozenset[int]:
    opened = state.open_set if isinstance(state, SwitchingState) else frozenset(state)
    return opened if contingency is None else opened | {contingency}


def rebalance(grid: GridCase, energized: EnergizedSet,
              warn: bool = True) -> tuple[np.ndarray, np.ndarray, float]:
    """Scale the energized generators so they exactly cover the energized load."""
    mask = energized.mask()
    d_hat = np.where(mask, grid.load, 0.0)
    g_on = np.where(mask, grid.gen, 0.0)
    gen_sum, load_sum = g_on.sum(), d_hat.sum()
    if gen_sum > 0:
        sigma = float(load_sum / gen_sum)
    elif load_sum == 0:
        sigma = 1.0
    else:
        raise InfeasibleBalance(f"{load_sum} MW energized load with no generation")
    if energized.all_energized:
        # base balance makes sigma exactly 1 up to rounding; keep g untouched
        sigma = 1.0 if abs(sigma - 1.0) < 1e-9 else sigma
    lo, hi = SIGMA_WARN
    if warn and not lo <= sigma <= hi:
        log.warning("generation scaling factor %.3f outside [%s, %s]", sigma, lo, hi)
    return sigma * g_on, d_hat, sigma


def dc_flow(grid: GridCase, open_branches: Iterable[int], injections: np.ndarray,
            reference: int) -> tuple[np.ndarray, np.ndarray]:
    """DC power flow on the closed subgraph; returns ``(flows_mw, angles_rad)``.

    Each connected component gets one zero-angle bus: ``reference`` for its own
    component, the lowest bus id for the others.
    """
    opened = frozenset(open_branches)
    p = np.asarray(injections, dtype=float)
    scale = max(1.0, float(np.max(np.abs(p)))) if p.size else 1.0
    theta = np.zeros(grid.n_bus)
    closed = [br for br in grid.branches if br.id not in opened]
    for comp in components(grid, opened):
        if abs(p[comp].sum()) > 1e-9 * scale * len(comp):
            raise SingularSystem(f"component {comp} has net injection {p[comp].sum()}")
        if len(comp) == 1:
            continue
        ref = reference if reference in comp else comp[0]
        local = {bus: k for k, bus in enumerate(comp)}
        lap = np.zeros((len(comp), len(comp)))
        for br in closed:
            if br.from_bus in local:
                i, j = local[br.from_bus], local[br.to_bus]
                lap[i, i] += br.susceptance
                lap[j, j] += br.susceptance
                lap[i, j] -= br.susceptance
                lap[j, i] -= br.susceptance
        keep = [k for k, bus in enumerate(comp) if bus != ref]
        try:
            sol = np.linalg.solve(lap[np.ix_(keep, keep)], p[[comp[k] for k in keep]] / grid.base_mva)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        for k, val in zip(keep, sol):
            theta[comp[k]] = val
    flows = np.zeros(grid.n_branch)
    for br in closed:
        flows[br.id] = grid.base_mva * br.susceptance * (theta[br.to_bus] - theta[br.from_bus])
    return flows, theta


def analyze_contingency(grid: GridCase, state: SwitchingState, contingency: int | None,
                        source: int | None = None, tol: float = OVERLOAD_TOL,
                        warn: bool = True) -> ContingencyOutcome:
    if source is None:
        source = resolve_source(grid)
    opened = effective_open(state, contingency)
    energized = energized_set(grid, opened, source)
    g_hat, d_hat, sigma = rebalance(grid, energized, warn)
    injections = g_hat - d_hat
    flows, theta = dc_flow(grid, opened, injections, source)
    limits = np.array([br.limit for br in grid.branches])
    overloads = tuple(int(e) for e in np.flatnonzero(np.abs(flows) > limits + tol))
    return ContingencyOutcome(
        contingency=contingency,
        energized=energized,
        sigma=sigma,
        flows=tuple(float(x) for x in flows),
        angles=tuple(float(x) for x in theta),
        injections=tuple(float(x) for x in injections),
        overloads=overloads,
        load_lost=float(grid.load[~energized.mask()].sum()),
    )


def security_report(grid: GridCase, state: SwitchingState, source: int | None = None,
                    tol: float = OVERLOAD_TOL) -> SecurityReport:
    if not is_connected(grid, state.open_set):
        raise ValueError("security_report requires a connected base case")
    if source is None:
        source = resolve_source(grid)
    base = analyze_contingency(grid, state, None, source, tol)
    per = tuple(analyze_contingency(grid, state, c, source, tol) for c in grid.contingencies)
    risk = sum(grid.probabilities[o.contingency] * o.load_lost for o in per)
    return SecurityReport(state, base, per, float(risk), grid.total_load)
