"""Graph-traversal oracle for connectedness, energized sets and bridges.

Nothing here touches the MILP; these functions are the ground truth the
optimizer is checked against.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Collection

import numpy as np

from .grid import GridCase


@dataclass(frozen=True)
class EnergizedSet:
    energized: tuple[int, ...]
    source: int

    @property
    def all_energized(self) -> bool:
        return all(self.energized)

    @property
    def deenergized(self) -> list[int]:
        return [i for i, e in enumerate(self.energized) if not e]

    def mask(self) -> np.ndarray:
        return np.array(self.energized, dtype=bool)


def resolve_source(grid: GridCase) -> int:
    """Source bus per the case policy; the largest generator wins, lowest id on ties."""
    if grid.source_bus is not None:
        if not 0 <= grid.source_bus < grid.n_bus:
            raise ValueError(f"explicit source bus {grid.source_bus} out of range")
        return grid.source_bus
    best = 0
    for bus in grid.buses:
        if bus.gen > grid.buses[best].gen:
            best = bus.id
    return best


def _adjacency(grid: GridCase, open_branches: Collection[int]) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(grid.n_bus)]
    for br in grid.branches:
        if br.id in open_branches:
            continue
        adj[br.from_bus].append((br.to_bus, br.id))
        adj[br.to_bus].append((br.from_bus, br.id))
    return adj


def _reach(adj, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j, _ in adj[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return seen


def energized_set(grid: GridCase, open_branches: Collection[int], source: int) -> EnergizedSet:
    if not 0 <= source < grid.n_bus:
        raise ValueError(f"source bus {source} out of range")
    reached = _reach(_adjacency(grid, frozenset(open_branches)), source)
    return EnergizedSet(tuple(int(i in reached) for i in range(grid.n_bus)), source)


def components(grid: GridCase, open_branches: Collection[int]) -> list[list[int]]:
    """Connected components of the closed subgraph, each sorted, ordered by lowest bus."""
    adj = _adjacency(grid, frozenset(open_branches))
    seen: set[int] = set()
    out = []
    for i in range(grid.n_bus):
        if i not in seen:
            comp = _reach(adj, i)
            seen |= comp
            out.append(sorted(comp))
    return out


def is_connected(grid: GridCase, open_branches: Collection[int] = ()) -> bool:
    return len(_reach(_adjacency(grid, frozenset(open_branches)), 0)) == grid.n_bus


def bridges(grid: GridCase, open_branches: Collection[int] = ()) -> set[int]:
    """Closed branches whose removal disconnects the closed subgraph.

    Iterative Tarjan low-link; parallel branches are told apart by branch id,
    so a doubled line is never a bridge.
    """
    opened = frozenset(open_branches)
    if not is_connected(grid, opened):
        raise ValueError("bridges() requires a connected closed subgraph")
    adj = _adjacency(grid, opened)
    disc = [-1] * grid.n_bus
    low = [0] * grid.n_bus
    found: set[int] = set()
    timer = 0
    disc[0] = low[0] = timer
    # frames: (bus, branch used to enter it, iterator position)
    stack = [(0, -1, 0)]
    while stack:
        node, via, pos = stack[-1]
        if pos < len(adj[node]):
            stack[-1] = (node, via, pos + 1)
            nxt, eid = adj[node][pos]
            if eid == via:
                continue
            if disc[nxt] == -1:
                timer += 1
                disc[nxt] = low[nxt] = timer
                stack.append((nxt, eid, 0))
            else:
                low[node] = min(low[node], disc[nxt])
        else:
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    found.add(via)
    return found
