"""Report JSON (round-trippable) and Graphviz DOT panels."""

from __future__ import annotations

import json
import math
from pathlib import Path

from .analysis import ContingencyOutcome, SecurityReport
from .connectivity import EnergizedSet
from .grid import GridCase, SwitchingState


def _outcome_to_dict(o: ContingencyOutcome) -> dict:
    return {
        "contingency": "base" if o.contingency is None else o.contingency,
        "energized": [int(x) for x in o.energized.energized],
        "sigma": o.sigma,
        "flows_mw": list(o.flows),
        "overloads": list(o.overloads),
        "load_lost_mw": o.load_lost,
        "angles_rad": list(o.angles),
        "injections_mw": list(o.injections),
    }


def _outcome_from_dict(d: dict, source: int) -> ContingencyOutcome:
    c = d["contingency"]
    return ContingencyOutcome(
        contingency=None if c == "base" else int(c),
        energized=EnergizedSet(tuple(bool(x) for x in d["energized"]), source),
        sigma=float(d["sigma"]),
        flows=tuple(float(x) for x in d["flows_mw"]),
        angles=tuple(float(x) for x in d.get("angles_rad", [0.0] * len(d["energized"]))),
        injections=tuple(float(x) for x in d.get("injections_mw", [0.0] * len(d["energized"]))),
        overloads=tuple(int(x) for x in d["overloads"]),
        load_lost=float(d["load_lost_mw"]),
    )


def summary(report: SecurityReport) -> dict:
    return {
        "openings": len(report.state.open_set),
        "overloading_contingencies": len(report.overloading),
        "deenergizing_contingencies": len(report.deenergizing),
        "avg_loss_fraction_all": report.avg_loss_fraction,
        "avg_loss_fraction_deenergizing": report.avg_loss_fraction_deenergizing,
        "total_load_mw": report.total_load,
        "secure": report.secure,
    }


def report_to_dict(report: SecurityReport, grid: GridCase | None = None,
                   solution: dict | None = None) -> dict:
    """Serialize a report; ``solution`` adds optimizer metadata under ``"solution"``."""
    data = {
        "state": sorted(report.state.open_set),
        "risk_mw": report.risk,
        "base": _outcome_to_dict(report.base),
        "contingencies": [_outcome_to_dict(o) for o in report.per_contingency],
        "source": report.base.energized.source,
        "summary": summary(report),
    }
    if grid is not None:
        data["state_names"] = [grid.branch_name(e) for e in data["state"]]
    if solution is not None:
        data["solution"] = solution
    return data


def report_from_dict(data: dict) -> SecurityReport:
    source = int(data.get("source", 0))
    base = _outcome_from_dict(data["base"], source)
    n_branch = len(base.flows)
    return SecurityReport(
        state=SwitchingState.from_open_set(n_branch, data["state"]),
        base=base,
        per_contingency=tuple(_outcome_from_dict(d, source) for d in data["contingencies"]),
        risk=float(data["risk_mw"]),
        total_load=float(data.get("summary", {}).get("total_load_mw", 0.0)),
    )


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2) + "\n"


def write_report(data: dict, path: str | Path) -> None:
    Path(path).write_text(dumps(data))


def read_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


# --- DOT ---------------------------------------------------------------------

GREEN, RED, BLACK = "darkgreen", "red", "black"


def _node_size(inj: float, scale: float) -> str:
    return f"{0.35 + 0.65 * math.sqrt(abs(inj) / scale):.2f}" if scale > 0 else "0.35"


def dot_panel(grid: GridCase, report: SecurityReport, outcome: ContingencyOutcome) -> str:
    """One panel: the base case or a single contingency under ``report.state``."""
    opened = report.state.open_set
    on = outcome.energized.energized
    title = "base case" if outcome.is_base else f"contingency {grid.branch_name(outcome.contingency)}"
    scale = max((abs(x) for x in outcome.injections), default=0.0)
    lines = [f'digraph "{title}" {{', f'  label="{title}";', "  node [fixedsize=true];"]
    for bus in grid.buses:
        inj = outcome.injections[bus.id]
        shape = "circle" if inj > 0 else "square"
        label = bus.label
        if not on[bus.id] and bus.load > 0:
            label += f"\\n[{bus.load:.1f}]"
        color = "black" if on[bus.id] else "gray"
        size = _node_size(inj, scale)
        lines.append(f'  n{bus.id} [label="{label}", shape={shape}, width={size}, '
                     f'height={size}, color={color}];')
    for br in grid.branches:
        if br.id in opened:
            continue
        a, b = br.from_bus, br.to_bus
        if br.id == outcome.contingency:
            lines.append(f"  n{a} -> n{b} [dir=none, style=dashed, color={BLACK}];")
            continue
        if not on[a] and not on[b]:
            lines.append(f"  n{a} -> n{b} [dir=none, color={BLACK}];")
            continue
        flow = outcome.flows[br.id]
        color = RED if br.id in outcome.overloads else GREEN
        # positive flow runs from the "to" bus toward the "from" bus
        head, tail = (a, b) if flow >= 0 else (b, a)
        lines.append(f'  n{tail} -> n{head} [color={color}, label="{abs(flow):.1f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def panel_name(grid: GridCase, outcome: ContingencyOutcome) -> str:
    if outcome.is_base:
        return "base.dot"
    return f"c{outcome.contingency:02d}_{grid.branch_name(outcome.contingency)}.dot"


def emit_dot(grid: GridCase, report: SecurityReport, directory: str | Path) -> list[Path]:
    """Write the base panel and one panel per contingency; returns the paths written."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for outcome in (report.base, *report.per_contingency):
        path = out / panel_name(grid, outcome)
        path.write_text(dot_panel(grid, report, outcome))
        paths.append(path)
    return paths
