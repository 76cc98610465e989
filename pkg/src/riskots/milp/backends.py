"""Pluggable MILP backends.

A backend takes a :class:`ModelIR` and returns a :class:`BackendResult`. The
default uses HiGHS through :func:`scipy.optimize.milp`.
"""

from __future__ import annotations

import math
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import ModelIR

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ERROR = "error"


@dataclass
class BackendResult:
    status: str
    objective: float | None = None
    values: np.ndarray | None = None
    gap: float = 0.0
    message: str = ""


class Backend(ABC):
    name = "abstract"

    @abstractmethod
    def solve(self, model: ModelIR) -> BackendResult:
        ...


def model_arrays(model: ModelIR):
    """Dense objective, sparse rows, and row bounds of ``model``."""
    n = len(model.variables)
    c = np.zeros(n)
    for coef, v in model.objective:
        c[v.index] += coef
    rows, cols, vals = [], [], []
    lo = np.empty(len(model.constraints))
    hi = np.empty(len(model.constraints))
    for r, con in enumerate(model.constraints):
        for coef, v in con.terms:
            rows.append(r)
            cols.append(v.index)
            vals.append(coef)
        lo[r] = -np.inf if con.sense == "<=" else con.rhs
        hi[r] = np.inf if con.sense == ">=" else con.rhs
    a = sparse.csr_array((vals, (rows, cols)), shape=(len(model.constraints), n))
    return c, a, lo, hi


class HighsBackend(Backend):
    name = "highs"

    def __init__(self, mip_rel_gap: float = 1e-9, time_limit: float | None = None,
                 presolve: bool = True):
        self.mip_rel_gap = mip_rel_gap
        self.time_limit = time_limit
        self.presolve = presolve

    def solve(self, model: ModelIR) -> BackendResult:
        c, a, lo, hi = model_arrays(model)
        integrality = np.array([1 if v.is_binary else 0 for v in model.variables])
        bounds = Bounds([v.lo for v in model.variables], [v.hi for v in model.variables])
        options = {"mip_rel_gap": self.mip_rel_gap, "presolve": self.presolve}
        if self.time_limit is not None:
            options["time_limit"] = self.time_limit
        cons = [LinearConstraint(a, lo, hi)] if model.constraints else []
        res = milp(c, constraints=cons, integrality=integrality, bounds=bounds, options=options)
        if res.status == 0:
            gap = getattr(res, "mip_gap", 0.0) or 0.0
            return BackendResult(OPTIMAL, float(res.fun) + model.objective_offset,
                                 np.asarray(res.x), float(gap), res.message)
        if res.status == 2:
            return BackendResult(INFEASIBLE, message=res.message)
        return BackendResult(ERROR, message=f"status {res.status}: {res.message}")


BACKENDS = {"highs": HighsBackend}


def get_backend(name: str | None = None, **options) -> Backend:
    """Instantiate a backend by name; ``OTS_BACKEND`` supplies the default."""
    name = name or os.environ.get("OTS_BACKEND") or "highs"
    try:
        cls = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}") from None
    return cls(**options)


def check_integral(model: ModelIR, x: np.ndarray, tol: float = 1e-6) -> list[str]:
    """Names of binaries farther than ``tol`` from 0 or 1."""
    return [v.name for v in model.binaries
            if not math.isclose(x[v.index], round(x[v.index]), abs_tol=tol)]
