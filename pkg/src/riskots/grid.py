"""Grid data model, case-file IO and structural validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class CaseError(ValueError):
    """Raised when a case file is malformed or violates a grid invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    label: str
    gen: float = 0.0
    load: float = 0.0

    @property
    def injection(self) -> float:
        return self.gen - self.load


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    limit: float

    def other(self, bus: int) -> int:
        return self.to_bus if bus == self.from_bus else self.from_bus


LARGEST_GENERATOR = "largest_generator"


@dataclass(frozen=True)
class GridCase:
    """Immutable grid description.

    ``source_bus`` is ``None`` for the largest-generator policy, otherwise the
    explicit bus id used as the energization source.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    contingencies: tuple[int, ...]
    probabilities: dict[int, float] = field(hash=False)
    source_bus: int | None = None
    base_mva: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "contingencies", tuple(int(c) for c in self.contingencies))
        object.__setattr__(
            self, "probabilities", {int(k): float(v) for k, v in self.probabilities.items()}
        )

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def gen(self) -> np.ndarray:
        return np.array([b.gen for b in self.buses], dtype=float)

    @property
    def load(self) -> np.ndarray:
        return np.array([b.load for b in self.buses], dtype=float)

    @property
    def total_load(self) -> float:
        return float(sum(b.load for b in self.buses))

    def incident(self, bus: int) -> list[int]:
        """Ids of branches touching ``bus``, ascending."""
        return [br.id for br in self.branches if bus in (br.from_bus, br.to_bus)]

    def branch_by_label(self, name: str) -> int:
        """Resolve a two-letter branch name such as ``"GH"`` (either orientation)."""
        labels = {b.label: b.id for b in self.buses}
        for br in self.branches:
            pair = {self.buses[br.from_bus].label, self.buses[br.to_bus].label}
            for k in range(1, len(name)):
                a, b = name[:k], name[k:]
                if a in labels and b in labels and pair == {a, b}:
                    return br.id
        raise KeyError(f"no branch named {name!r}")

    def branch_name(self, branch_id: int) -> str:
        br = self.branches[branch_id]
        return self.buses[br.from_bus].label + self.buses[br.to_bus].label


@dataclass(frozen=True)
class SwitchingState:
    """Preventive openings: ``open[e]`` is True when branch ``e`` is open."""

    open: tuple[bool, ...]

    @classmethod
    def closed(cls, n_branch: int) -> SwitchingState:
        return cls((False,) * n_branch)

    @classmethod
    def from_open_set(cls, n_branch: int, opened: Iterable[int]) -> SwitchingState:
        opened = set(opened)
        bad = [e for e in opened if not 0 <= e < n_branch]
        if bad:
            raise CaseError(f"branch ids out of range: {sorted(bad)}")
        return cls(tuple(e in opened for e in range(n_branch)))

    @property
    def open_set(self) -> frozenset[int]:
        return frozenset(e for e, o in enumerate(self.open) if o)

    def __len__(self) -> int:
        return len(self.open)


def _connected(n_bus: int, branches: Sequence[Branch], opened: frozenset[int] = frozenset()) -> bool:
    # local traversal so grid validation does not depend on the connectivity module
    adj: list[list[int]] = [[] for _ in range(n_bus)]
    for br in branches:
        if br.id not in opened:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n_bus


def validate_case(grid: GridCase) -> GridCase:
    """Check every GridCase invariant, raising CaseError on the first violation."""
    if grid.n_bus < 2:
        raise CaseError("a case needs at least two buses")
    for i, bus in enumerate(grid.buses):
        if bus.id != i:
            raise CaseError(f"bus ids must be contiguous from 0 (got {bus.id} at position {i})")
        for name, value in (("gen", bus.gen), ("load", bus.load)):
            if not math.isfinite(value) or value < 0:
                raise CaseError(f"bus {i}: {name} must be finite and non-negative")
    for e, br in enumerate(grid.branches):
        if br.id != e:
            raise CaseError(f"branch ids must be contiguous from 0 (got {br.id} at position {e})")
        for end in (br.from_bus, br.to_bus):
            if not 0 <= end < grid.n_bus:
                raise CaseError(f"branch {e}: endpoint {end} is not a bus")
        if br.from_bus == br.to_bus:
            raise CaseError(f"branch {e}: self-loop")
        if not (br.susceptance > 0 and math.isfinite(br.susceptance)):
            raise CaseError(f"branch {e}: susceptance must be positive")
        if not (br.limit > 0 and math.isfinite(br.limit)):
            raise CaseError(f"branch {e}: limit must be positive")
    gen, load = sum(b.gen for b in grid.buses), grid.total_load
    if abs(gen - load) > 1e-6 * max(1.0, load):
        raise CaseError(f"unbalanced case: generation {gen} MW != load {load} MW")
    if not _connected(grid.n_bus, grid.branches):
        raise CaseError("disconnected: the all-closed grid is not connected")
    for c in grid.contingencies:
        if not 0 <= c < grid.n_branch:
            raise CaseError(f"contingency {c} is not a branch id")
        if c not in grid.probabilities:
            raise CaseError(f"contingency {c} has no probability")
    if len(set(grid.contingencies)) != len(grid.contingencies):
        raise CaseError("duplicate contingency ids")
    for c, p in grid.probabilities.items():
        if not 0.0 <= p <= 1.0:
            raise CaseError(f"probability of contingency {c} outside [0, 1]")
    if grid.source_bus is not None and not 0 <= grid.source_bus < grid.n_bus:
        raise CaseError(f"source bus {grid.source_bus} out of range")
    if not grid.base_mva > 0:
        raise CaseError("base_mva must be positive")
    return grid


def case_from_dict(data: dict) -> GridCase:
    try:
        buses = [
            Bus(int(b["id"]), str(b["label"]), float(b["gen_mw"]), float(b["load_mw"]))
            for b in data["buses"]
        ]
        branches = [
            Branch(int(r["id"]), int(r["from"]), int(r["to"]),
                   float(r["susceptance_pu"]), float(r["limit_mw"]))
            for r in data["branches"]
        ]
        policy = data.get("source_policy", LARGEST_GENERATOR)
        if policy == LARGEST_GENERATOR:
            source = None
        elif isinstance(policy, dict) and "bus" in policy:
            source = int(policy["bus"])
        else:
            raise CaseError(f"unknown source_policy {policy!r}")
        grid = GridCase(
            buses=tuple(buses),
            branches=tuple(branches),
            contingencies=tuple(int(c) for c in data["contingencies"]),
            probabilities={int(k): float(v) for k, v in data["probabilities"].items()},
            source_bus=source,
            base_mva=float(data.get("base_mva", 100.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CaseError):
            raise
        raise CaseError(f"malformed case: {exc!r}") from exc
    return validate_case(grid)


def case_to_dict(grid: GridCase) -> dict:
    return {
        "base_mva": grid.base_mva,
        "buses": [
            {"id": b.id, "label": b.label, "gen_mw": b.gen, "load_mw": b.load} for b in grid.buses
        ],
        "branches": [
            {"id": r.id, "from": r.from_bus, "to": r.to_bus,
             "susceptance_pu": r.susceptance, "limit_mw": r.limit}
            for r in grid.branches
        ],
        "contingencies": list(grid.contingencies),
        "probabilities": {str(c): grid.probabilities[c] for c in sorted(grid.probabilities)},
        "source_policy": LARGEST_GENERATOR if grid.source_bus is None else {"bus": grid.source_bus},
    }


def load_case(path: str | Path) -> GridCase:
    """Read and validate a case JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CaseError(f"cannot parse {path}: {exc}") from exc
    return case_from_dict(data)


def write_case(grid: GridCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(grid), indent=2) + "\n")


def incidence(grid: GridCase) -> np.ndarray:
    """Signed bus-by-branch incidence: +1 at the ``to`` bus, -1 at the ``from`` bus."""
    a = np.zeros((grid.n_bus, grid.n_branch))
    for br in grid.branches:
        a[br.to_bus, br.id] = 1.0
        a[br.from_bus, br.id] = -1.0
    return a


def validate_switching(grid: GridCase, state: SwitchingState) -> list[str]:
    """Return the list of violations of ``state`` on ``grid``; empty means ok."""
    if len(state) != grid.n_branch:
        return [f"state length {len(state)} != {grid.n_branch} branches"]
    if not _connected(grid.n_bus, grid.branches, state.open_set):
        return ["base case disconnected"]
    return []
