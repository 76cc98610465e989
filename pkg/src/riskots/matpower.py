"""Import of MATPOWER ``.m`` case files into a :class:`GridCase`.

Only the active-power data the DC model needs is kept: bus loads, in-service
generator outputs and branch reactances.
"""

from __future__ import annotations

import csv
import logging
import re
from pathlib import Path

import numpy as np

from .grid import Branch, Bus, CaseError, GridCase, validate_case

log = logging.getLogger(__name__)

_MATRIX = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR = re.compile(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)\s*;")


def _parse_matrix(body: str) -> np.ndarray:
    rows = []
    for line in body.splitlines():
        line = line.split("%", 1)[0].strip().rstrip(";").strip()
        if not line:
            continue
        for chunk in line.split(";"):
            vals = chunk.replace(",", " ").split()
            if vals:
                rows.append([float(v) for v in vals])
    if not rows:
        return np.zeros((0, 0))
    width = min(len(r) for r in rows)
    return np.array([r[:width] for r in rows])


def read_limits_csv(path: str | Path) -> dict[int, float]:
    """Read a ``branch_id,limit_mw`` override file."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["branch_id", "limit_mw"]:
            raise CaseError(f"{path}: expected header 'branch_id,limit_mw'")
        return {int(row["branch_id"]): float(row["limit_mw"]) for row in reader}


def import_matpower(path: str | Path, limits: dict[int, float] | str | Path | None = None,
                    merge_parallel: bool = False, labels: list[str] | None = None,
                    probability: float = 1.0) -> GridCase:
    """Build a GridCase from a MATPOWER case file.

    Branch ids follow the order of in-service rows in ``mpc.branch``. Limits
    come from ``rateA`` when positive; ``limits`` (a mapping or CSV path)
    overrides per branch id. Generation is scaled proportionally to match total
    load, since the DC model is lossless. Every branch becomes a contingency
    with the given ``probability``.
    """
    text = Path(path).read_text()
    tables = {name: _parse_matrix(body) for name, body in _MATRIX.findall(text)}
    for name in ("bus", "branch"):
        if name not in tables or tables[name].size == 0:
            raise CaseError(f"{path}: missing mpc.{name} table")
    m = _SCALAR.search(text)
    base_mva = float(m.group(1)) if m else 100.0
    if isinstance(limits, (str, Path)):
        limits = read_limits_csv(limits)
    limits = dict(limits or {})

    bus_tab = tables["bus"]
    numbers = [int(n) for n in bus_tab[:, 0]]
    index = {n: k for k, n in enumerate(numbers)}
    load = bus_tab[:, 2].astype(float).copy()
    gen = np.zeros(len(numbers))
    gen_tab = tables.get("gen")
    if gen_tab is not None and gen_tab.size:
        for row in gen_tab:
            in_service = row[7] > 0 if row.shape[0] > 7 else True
            if in_service:
                gen[index[int(row[0])]] += row[1]
    if np.any(load < 0) or np.any(gen < 0):
        raise CaseError(f"{path}: negative loads or generation are not supported")
    if gen.sum() <= 0:
        raise CaseError(f"{path}: no generation")
    if abs(gen.sum() - load.sum()) > 1e-9:
        log.warning("scaling generation %.3f MW to match load %.3f MW", gen.sum(), load.sum())
        gen = gen * (load.sum() / gen.sum())

    raw = []
    for row in tables["branch"]:
        status = row[10] if row.shape[0] > 10 else 1
        if status <= 0:
            continue
        f, t, x = index[int(row[0])], index[int(row[1])], float(row[3])
        if x == 0:
            raise CaseError(f"{path}: zero reactance on branch {int(row[0])}-{int(row[1])}")
        rate = float(row[5]) if row.shape[0] > 5 else 0.0
        raw.append((f, t, 1.0 / abs(x), rate))

    if merge_parallel:
        merged: dict[frozenset, list] = {}
        order = []
        for f, t, b, rate in raw:
            key = frozenset((f, t))
            if key in merged:
                log.warning("merging parallel branch %d-%d", numbers[f], numbers[t])
                merged[key][2] += b
                merged[key][3] += rate
            else:
                merged[key] = [f, t, b, rate]
                order.append(key)
        raw = [tuple(merged[k]) for k in order]

    branches = []
    for e, (f, t, b, rate) in enumerate(raw):
        limit = limits.get(e, rate if rate > 0 else None)
        if limit is None:
            raise CaseError(f"limits required: branch {e} has no positive rateA and no override")
        branches.append(Branch(e, f, t, b, float(limit)))

    if labels is None:
        labels = [str(n) for n in numbers]
    buses = [Bus(k, labels[k], float(gen[k]), float(load[k])) for k in range(len(numbers))]
    ids = tuple(range(len(branches)))
    grid = GridCase(tuple(buses), tuple(branches), ids, {e: probability for e in ids},
                    None, base_mva)
    return validate_case(grid)
