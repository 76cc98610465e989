"""Solver-agnostic MILP intermediate representation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class VarRef:
    index: int
    kind: str
    lo: float
    hi: float
    name: str

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY


Term = tuple[float, VarRef]


@dataclass(frozen=True)
class LinConstraint:
    terms: tuple[Term, ...]
    sense: str
    rhs: float
    tag: str

    def activity(self, x: Sequence[float]) -> float:
        return sum(c * x[v.index] for c, v in self.terms)

    def satisfied(self, x: Sequence[float], tol: float = 1e-9) -> bool:
        lhs = self.activity(x)
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


def canonical(terms: Iterable[Term]) -> tuple[Term, ...]:
    """Merge repeated variables, drop zero coefficients, order by variable index."""
    acc: dict[int, float] = {}
    refs: dict[int, VarRef] = {}
    for coef, var in terms:
        coef = float(coef)
        if not math.isfinite(coef):
            raise ValueError(f"non-finite coefficient on {var.name}")
        acc[var.index] = acc.get(var.index, 0.0) + coef
        refs[var.index] = var
    return tuple((acc[i], refs[i]) for i in sorted(acc) if acc[i] != 0.0)


@dataclass
class ModelIR:
    """A minimization MILP: variables, linear constraints and a linear objective."""

    name: str = "model"
    variables: list[VarRef] = field(default_factory=list)
    constraints: list[LinConstraint] = field(default_factory=list)
    objective: list[Term] = field(default_factory=list)
    objective_offset: float = 0.0
    direction: str = "minimize"

    def __post_init__(self):
        self._by_name = {v.name: v for v in self.variables}

    def add_var(self, name: str, kind: str = CONTINUOUS, lo: float = 0.0,
                hi: float = math.inf) -> VarRef:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lo, hi = max(0.0, lo), min(1.0, hi)
        if lo > hi:
            raise ValueError(f"empty bounds for {name!r}: [{lo}, {hi}]")
        var = VarRef(len(self.variables), kind, float(lo), float(hi), name)
        self.variables.append(var)
        self._by_name[name] = var
        return var

    def var(self, name: str) -> VarRef:
        return self._by_name[name]

    def has_var(self, name: str) -> bool:
        return name in self._by_name

    def add_constraint(self, terms: Iterable[Term], sense: str, rhs: float,
                       tag: str = "plumbing") -> LinConstraint:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        terms = canonical(terms)
        for _, v in terms:
            if self.variables[v.index] is not v and self.variables[v.index] != v:
                raise ValueError(f"variable {v.name} is not registered in this model")
        con = LinConstraint(terms, sense, float(rhs), tag)
        self.constraints.append(con)
        return con

    def set_objective(self, terms: Iterable[Term], offset: float = 0.0) -> None:
        self.objective = list(canonical(terms))
        self.objective_offset = float(offset)

    def objective_value(self, x: Sequence[float]) -> float:
        return self.objective_offset + sum(c * x[v.index] for c, v in self.objective)

    @property
    def binaries(self) -> list[VarRef]:
        return [v for v in self.variables if v.is_binary]

    def stats(self) -> dict:
        return {
            "variables": len(self.variables),
            "binaries": len(self.binaries),
            "constraints": len(self.constraints),
            "by_tag": dict(sorted(Counter(c.tag for c in self.constraints).items())),
        }

    def violations(self, x: Sequence[float], tol: float = 1e-9) -> list[LinConstraint]:
        bad = [c for c in self.constraints if not c.satisfied(x, tol)]
        for v in self.variables:
            if not v.lo - tol <= x[v.index] <= v.hi + tol:
                bad.append(LinConstraint(((1.0, v),), "=", x[v.index], f"bounds:{v.name}"))
        return bad
