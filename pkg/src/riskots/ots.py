"""Risk-based optimal transmission switching.

:func:`build_problem` assembles the MILP, :func:`solve` hands it to a backend,
:func:`enumerate_states` is the exhaustive oracle and :func:`verify` checks any
solution against the direct DC analysis.

Variable families (``c`` is a contingency branch id, ``base`` the base case):

* ``v.e``            preventive opening of branch ``e``
* ``fstar.*.e``      mirror-graph commodity flow
* ``pstar.c.s``      commodity produced at the source under ``c``
* ``pi.c.i``         bus ``i`` energized under ``c``
* ``psi.c.i.e``      bus ``i`` fed through branch ``e`` under ``c``
* ``sigma.c``        generation scaling factor
* ``ghat.c.i``, ``dhat.c.i``  rebalanced generation and served load
* ``phi.*.i``, ``f.*.e``      bus angles and branch flows

``w_{c,e}`` (branch ``e`` open under ``c``) is ``v.e`` itself for ``e != c`` and
the constant 1 for ``e == c``, so it never becomes a variable.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    OVERLOAD_TOL,
    InfeasibleBalance,
    SingularSystem,
    analyze_contingency,
    security_report,
)
from .connectivity import energized_set, is_connected, resolve_source
from .grid import GridCase, SwitchingState
from .milp.backends import INFEASIBLE, OPTIMAL, Backend, check_integral, get_backend
from .milp.encoders import (
    encode_abs_limit,
    encode_and_not,
    encode_flow_equation,
    encode_or,
    encode_product,
    encode_zero_when,
)
from .milp.model import BINARY, CONTINUOUS, ModelIR, VarRef

log = logging.getLogger(__name__)

BASE = "base"


class Infeasible(RuntimeError):
    """No switching state satisfies every security constraint."""


class BackendFailure(RuntimeError):
    """The backend failed or returned an unusable solution."""


@dataclass(frozen=True)
class OtsConfig:
    theta_max: float = math.pi
    # None picks a bound large enough that it never cuts off a valid state
    sigma_max: float | None = None
    int_tol: float = 1e-6
    mip_rel_gap: float = 1e-9
    time_limit: float | None = None
    backend: str | None = None
    overload_tol: float = OVERLOAD_TOL
    max_open: int | None = None

    def __post_init__(self):
        if self.max_open is not None and self.max_open < 0:
            raise ValueError("max_open must be non-negative")
        if not self.theta_max > 0:
            raise ValueError("theta_max must be positive")
        if self.sigma_max is not None and not self.sigma_max > 0:
            raise ValueError("sigma_max must be positive")
        if not 0 < self.int_tol < 0.5:
            raise ValueError("int_tol must be in (0, 0.5)")


def auto_sigma_max(grid: GridCase) -> float:
    """Largest scaling any energized area can need, floored at 3."""
    positive = grid.gen[grid.gen > 0]
    if positive.size == 0:
        return 3.0
    return max(3.0, grid.total_load / float(positive.min()))


@dataclass
class OtsProblem:
    grid: GridCase
    model: ModelIR
    source: int
    config: OtsConfig
    registry: dict[str, dict] = field(default_factory=dict)

    def family(self, name: str) -> dict:
        return self.registry.setdefault(name, {})

    def w(self, c, e: int):
        """Opening indicator of branch ``e`` under scenario ``c``."""
        return 1 if c == e else self.registry["v"][e]


@dataclass
class OtsSolution:
    state: SwitchingState
    objective: float
    assignment: dict[str, float]
    provenance: str
    gap: float = 0.0

    @property
    def openings(self) -> list[int]:
        return sorted(self.state.open_set)


def _new_problem(grid: GridCase, config: OtsConfig) -> OtsProblem:
    model = ModelIR(name="risk_ots")
    problem = OtsProblem(grid, model, resolve_source(grid), config)
    v = problem.family("v")
    for br in grid.branches:
        v[br.id] = model.add_var(f"v.{br.id}", BINARY)
    return problem


def _mirror_flows(problem: OtsProblem, key, tag: str) -> dict[int, VarRef]:
    grid, model = problem.grid, problem.model
    big = grid.n_bus
    fstar = problem.family("fstar")
    out = {}
    for br in grid.branches:
        if br.id == key:
            continue
        f = model.add_var(f"fstar.{key}.{br.id}", CONTINUOUS, -big, big)
        encode_zero_when(model, f, problem.registry["v"][br.id], big, tag=tag)
        fstar[(key, br.id)] = out[br.id] = f
    return out


def _node_balance(grid: GridCase, flows: dict[int, VarRef], bus: int) -> list:
    terms = []
    for e in grid.incident(bus):
        if e in flows:
            br = grid.branches[e]
            terms.append((1.0 if br.to_bus == bus else -1.0, flows[e]))
    return terms


def build_base_connectedness(problem: OtsProblem) -> None:
    """Every bus must receive one unit of commodity from the source in the base case."""
    grid, model, s = problem.grid, problem.model, problem.source
    flows = _mirror_flows(problem, BASE, "base_connectivity")
    for i in range(grid.n_bus):
        rhs = -(grid.n_bus - 1) if i == s else 1.0
        model.add_constraint(_node_balance(grid, flows, i), "=", rhs, "base_connectivity")


def build_contingency_connectedness(problem: OtsProblem, c: int) -> None:
    grid, model, s = problem.grid, problem.model, problem.source
    tag = "contingency_connectivity"
    pi = problem.family("pi")
    for i in range(grid.n_bus):
        lo = 1.0 if i == s else 0.0
        pi[(c, i)] = model.add_var(f"pi.{c}.{i}", BINARY, lo, 1.0)
    pstar = model.add_var(f"pstar.{c}.{s}", CONTINUOUS, -(grid.n_bus - 1), 0.0)
    problem.family("pstar")[(c, s)] = pstar

    flows = _mirror_flows(problem, c, tag)
    for i in range(grid.n_bus):
        balance = _node_balance(grid, flows, i)
        if i == s:
            model.add_constraint(balance + [(-1.0, pstar)], "=", 0.0, tag)
        else:
            model.add_constraint(balance + [(-1.0, pi[(c, i)])], "=", 0.0, tag)

    # energization spreads over closed branches; the source needs no support
    psi = problem.family("psi")
    for i in range(grid.n_bus):
        if i == s:
            continue
        feeds = []
        for e in grid.incident(i):
            if e == c:
                continue
            j = grid.branches[e].other(i)
            x = model.add_var(f"psi.{c}.{i}.{e}", BINARY)
            encode_and_not(model, x, pi[(c, j)], problem.w(c, e), tag)
            psi[(c, i, e)] = x
            feeds.append(x)
        if feeds:
            encode_or(model, pi[(c, i)], feeds, tag)
        else:
            model.add_constraint([(1.0, pi[(c, i)])], "=", 0.0, tag)


def _dc_flows(problem: OtsProblem, key) -> dict[int, VarRef]:
    grid, model, theta = problem.grid, problem.model, problem.config.theta_max
    phi = problem.family("phi")
    for i in range(grid.n_bus):
        phi[(key, i)] = model.add_var(f"phi.{key}.{i}", CONTINUOUS, -theta, theta)
    fam = problem.family("f")
    out = {}
    for br in grid.branches:
        if br.id == key:
            continue
        f = model.add_var(f"f.{key}.{br.id}", CONTINUOUS, -math.inf, math.inf)
        b = grid.base_mva * br.susceptance
        encode_flow_equation(model, f, b, phi[(key, br.to_bus)], phi[(key, br.from_bus)],
                             problem.w(key, br.id), 2.0 * b * theta)
        encode_abs_limit(model, f, br.limit)
        fam[(key, br.id)] = out[br.id] = f
    return out


def build_balancing_and_flows(problem: OtsProblem, c) -> None:
    """Rebalanced injections and DC flows for contingency ``c`` or the base case."""
    grid, model = problem.grid, problem.model
    gen, load = grid.gen, grid.load
    flows = _dc_flows(problem, c)
    if c == BASE:
        for i in range(grid.n_bus):
            model.add_constraint(_node_balance(grid, flows, i), "=", gen[i] - load[i], "dc_flow")
        return

    sigma_max = problem.config.sigma_max or auto_sigma_max(grid)
    sigma = model.add_var(f"sigma.{c}", CONTINUOUS, 0.0, sigma_max)
    problem.family("sigma")[c] = sigma
    pi = problem.registry["pi"]
    ghat, dhat = problem.family("ghat"), problem.family("dhat")
    served = []
    for i in range(grid.n_bus):
        inj = []
        if gen[i] > 0:
            x = model.add_var(f"ghat.{c}.{i}", CONTINUOUS, 0.0, sigma_max * gen[i])
            encode_product(model, x, [(gen[i], sigma)], pi[(c, i)], sigma_max * gen[i],
                           tag="balancing")
            ghat[(c, i)] = x
            inj.append((1.0, x))
        if load[i] > 0:
            y = model.add_var(f"dhat.{c}.{i}", CONTINUOUS, 0.0, load[i])
            model.add_constraint([(1.0, y), (-load[i], pi[(c, i)])], "=", 0.0, "balancing")
            dhat[(c, i)] = y
            inj.append((-1.0, y))
            served.append(y)
        balance = _node_balance(grid, flows, i)
        model.add_constraint(balance + [(-k, x) for k, x in inj], "=", 0.0, "dc_flow")
    model.add_constraint([(1.0, x) for x in ghat_of(problem, c)] + [(-1.0, y) for y in served],
                         "=", 0.0, "balancing")


def ghat_of(problem: OtsProblem, c) -> list[VarRef]:
    return [x for (k, _), x in problem.registry.get("ghat", {}).items() if k == c]


def build_objective(problem: OtsProblem) -> None:
    """Expected load lost: sum over c of p_c (total load - served load under c)."""
    grid = problem.grid
    terms, offset = [], 0.0
    for c in grid.contingencies:
        p = grid.probabilities[c]
        offset += p * grid.total_load
        terms += [(-p, y) for (k, _), y in problem.registry["dhat"].items() if k == c]
    problem.model.set_objective(terms, offset)


def build_problem(grid: GridCase, config: OtsConfig | None = None) -> OtsProblem:
    problem = _new_problem(grid, config or OtsConfig())
    problem.family("dhat")
    build_base_connectedness(problem)
    build_balancing_and_flows(problem, BASE)
    for c in grid.contingencies:
        build_contingency_connectedness(problem, c)
        build_balancing_and_flows(problem, c)
    if problem.config.max_open is not None:
        model = problem.model
        model.add_constraint([(1.0, v) for v in problem.registry["v"].values()], "<=",
                             problem.config.max_open, "plumbing")
    build_objective(problem)
    return problem


def _risk_from_pi(grid: GridCase, pi: dict) -> float:
    load = grid.load
    return float(sum(grid.probabilities[c] * sum(load[i] for i in range(grid.n_bus)
                                                 if pi[(c, i)] == 0)
                     for c in grid.contingencies))


def solve(problem: OtsProblem, backend: Backend | str | None = None) -> OtsSolution:
    """Solve the MILP and return a verified solution."""
    cfg = problem.config
    if backend is None or isinstance(backend, str):
        backend = get_backend(backend or cfg.backend, mip_rel_gap=cfg.mip_rel_gap,
                              time_limit=cfg.time_limit)
    result = backend.solve(problem.model)
    if result.status == INFEASIBLE:
        raise Infeasible("no switching state satisfies the security constraints")
    if result.status != OPTIMAL:
        raise BackendFailure(result.message or result.status)
    x = result.values
    bad = check_integral(problem.model, x, cfg.int_tol)
    if bad:
        raise BackendFailure(f"non-integral binaries: {bad[:5]}")
    grid = problem.grid
    assignment = {}
    for v in problem.model.variables:
        assignment[v.name] = float(round(x[v.index])) if v.is_binary else float(x[v.index])
    opened = [e for e, var in problem.registry["v"].items() if assignment[var.name] == 1.0]
    pi = {k: assignment[var.name] for k, var in problem.registry["pi"].items()}
    solution = OtsSolution(
        state=SwitchingState.from_open_set(grid.n_branch, opened),
        objective=_risk_from_pi(grid, pi),
        assignment=assignment,
        provenance=getattr(backend, "name", type(backend).__name__),
        gap=result.gap,
    )
    issues = verify(grid, solution, tol=cfg.overload_tol)
    if issues:
        raise BackendFailure("solution failed verification: " + "; ".join(issues))
    return solution


def verify(grid: GridCase, solution: OtsSolution, tol: float = OVERLOAD_TOL) -> list[str]:
    """Discrepancies between ``solution`` and the direct DC analysis (empty when ok)."""
    issues: list[str] = []
    if not is_connected(grid, solution.state.open_set):
        return ["base case disconnected"]
    try:
        report = security_report(grid, solution.state, tol=tol)
    except (InfeasibleBalance, SingularSystem) as exc:
        return [f"analysis failed: {exc}"]
    if report.base.overloads:
        issues.append(f"overload in base case on {list(report.base.overloads)}")
    for o in report.per_contingency:
        if o.overloads:
            issues.append(f"overload under contingency {o.contingency} on {list(o.overloads)}")
    if abs(report.risk - solution.objective) > 1e-6 * max(1.0, abs(solution.objective)):
        issues.append(f"objective {solution.objective} differs from oracle risk {report.risk}")
    for o in report.per_contingency:
        c = o.contingency
        values = [solution.assignment.get(f"pi.{c}.{i}") for i in range(grid.n_bus)]
        if any(val is None for val in values):
            continue
        milp_on = tuple(bool(round(val)) for val in values)
        if milp_on != o.energized.energized:
            issues.append(f"pi mismatch under contingency {c}")
    return issues


# --- exhaustive oracle -------------------------------------------------------

def _topology_risk(grid: GridCase, opened: frozenset[int], source: int) -> float:
    load, risk = grid.load, 0.0
    for c in grid.contingencies:
        if c in opened:
            continue
        mask = energized_set(grid, opened | {c}, source).mask()
        if not mask.all():
            risk += grid.probabilities[c] * float(load[~mask].sum())
    return risk


def _secure(grid: GridCase, state: SwitchingState, source: int, tol: float) -> bool:
    try:
        for c in (None, *grid.contingencies):
            if analyze_contingency(grid, state, c, source, tol, warn=False).overloads:
                return False
    except (InfeasibleBalance, SingularSystem):
        return False
    return True


def _better(a: tuple, b: tuple | None, tie: float) -> bool:
    """``a`` beats ``b``; tuples are ``(risk, size, open_tuple)``."""
    if b is None:
        return True
    if a[0] < b[0] - tie:
        return True
    if a[0] > b[0] + tie:
        return False
    return a[1:] < b[1:]


def _scan(grid: GridCase, candidates, source: int, tol: float) -> tuple | None:
    best = None
    tie = 1e-9 * max(1.0, grid.total_load)
    for opened in candidates:
        key_size = len(opened)
        fs = frozenset(opened)
        if not is_connected(grid, fs):
            continue
        risk = _topology_risk(grid, fs, source)
        cand = (risk, key_size, opened)
        if not _better(cand, best, tie):
            continue
        if _secure(grid, SwitchingState.from_open_set(grid.n_branch, fs), source, tol):
            best = cand
    return best


def _scan_chunk(args):
    grid, candidates, source, tol = args
    return _scan(grid, candidates, source, tol)


def enumerate_states(grid: GridCase, max_open: int, workers: int = 1,
                     tol: float = OVERLOAD_TOL) -> OtsSolution:
    """Minimum-risk secure state among those with at most ``max_open`` openings.

    Ties go to fewer openings, then to the lexicographically smallest open set.
    """
    if not 0 <= max_open <= grid.n_branch:
        raise ValueError(f"max_open must be in [0, {grid.n_branch}]")
    source = resolve_source(grid)
    # size-ascending lexicographic order makes the first of equal-risk states the canonical one
    ordered = [s for k in range(max_open + 1)
               for s in itertools.combinations(range(grid.n_branch), k)]
    if workers > 1 and len(ordered) > 1:
        chunks = np.array_split(np.arange(len(ordered)), workers)
        jobs = [(grid, [ordered[i] for i in idx], source, tol) for idx in chunks if len(idx)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(_scan_chunk, jobs))
        best = None
        tie = 1e-9 * max(1.0, grid.total_load)
        for cand in partial:
            if cand is not None and _better(cand, best, tie):
                best = cand
    else:
        best = _scan(grid, ordered, source, tol)
    if best is None:
        raise Infeasible(f"no secure state with at most {max_open} openings")
    risk, _, opened = best
    state = SwitchingState.from_open_set(grid.n_branch, opened)
    assignment = {f"v.{e}": float(e in opened) for e in range(grid.n_branch)}
    return OtsSolution(state, risk, assignment, "enumeration", 0.0)
