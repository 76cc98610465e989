"""CPLEX LP text export and a reader for the subset the writer produces."""

from __future__ import annotations

import math
import re

from .model import BINARY, CONTINUOUS, ModelIR, Term

_SENSE_OUT = {"<=": "<=", "=": "=", ">=": ">="}
_WRAP = 8  # terms per line


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(terms: list[Term] | tuple[Term, ...], const: float = 0.0) -> str:
    parts = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        parts.append(f"{sign} {var.name}" if mag == 1 else f"{sign} {_num(mag)} {var.name}")
    if const:
        parts.append(f"{'-' if const < 0 else '+'} {_num(abs(const))}")
    if not parts:
        return "0"
    lines = [" ".join(parts[i:i + _WRAP]) for i in range(0, len(parts), _WRAP)]
    return "\n   ".join(lines)


def serialize_lp(model: ModelIR) -> str:
    """Deterministic LP text; variables appear in index order."""
    out = [f"\\ {model.name}", "Minimize" if model.direction == "minimize" else "Maximize"]
    out.append(f" obj: {_expr(model.objective, model.objective_offset)}")
    out.append("Subject To")
    for k, con in enumerate(model.constraints):
        out.append(f" {con.tag}#{k}: {_expr(con.terms)} {_SENSE_OUT[con.sense]} {_num(con.rhs)}")
    out.append("Bounds")
    # every variable is listed so the reader recovers the index order
    for v in model.variables:
        if v.lo == -math.inf and v.hi == math.inf:
            out.append(f" {v.name} free")
        elif v.lo == v.hi:
            out.append(f" {v.name} = {_num(v.lo)}")
        else:
            lo = "-inf" if v.lo == -math.inf else _num(v.lo)
            hi = "+inf" if v.hi == math.inf else _num(v.hi)
            out.append(f" {lo} <= {v.name} <= {hi}")
    bins = [v.name for v in model.variables if v.is_binary]
    out.append("Binaries")
    for i in range(0, len(bins), _WRAP):
        out.append(" " + " ".join(bins[i:i + _WRAP]))
    out.append("End")
    return "\n".join(out) + "\n"


_TOKEN = re.compile(r"[+-]|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[^\s+-]+")


def _parse_terms(text: str) -> tuple[list[tuple[float, str]], float]:
    tokens = _TOKEN.findall(text)
    terms: list[tuple[float, str]] = []
    const = 0.0
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = 1.0 if tok == "+" else -1.0
            continue
        try:
            value = float(tok)
        except ValueError:
            terms.append((sign * (1.0 if coef is None else coef), tok))
            sign, coef = 1.0, None
            continue
        if coef is not None:
            const += sign * coef
            sign = 1.0
        coef = value
    if coef is not None:
        const += sign * coef
    return terms, const


def parse_lp(text: str) -> ModelIR:
    """Rebuild a ModelIR from text written by :func:`serialize_lp`.

    Variable indices follow the ``Bounds`` section, which the writer fills in
    index order; names missing there are appended in order of appearance.
    """
    name = "model"
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        if raw.startswith("\\"):
            name = raw[1:].strip() or name
            continue
        key = raw.strip().lower()
        if key in ("minimize", "maximize", "subject to", "bounds", "binaries", "end"):
            current = key
            sections.setdefault(current, [])
            continue
        if current:
            sections[current].append(raw)

    def statements(lines: list[str]) -> list[str]:
        stmts: list[str] = []
        for line in lines:
            if line.startswith("   ") and stmts:
                stmts[-1] += " " + line.strip()
            elif line.strip():
                stmts.append(line.strip())
        return stmts

    objective = statements(sections.get("minimize", sections.get("maximize", [])))
    rows = statements(sections.get("subject to", []))
    bounds = statements(sections.get("bounds", []))
    binaries = " ".join(sections.get("binaries", [])).split()

    order: list[str] = []
    seen: set[str] = set()

    def note(var: str):
        if var not in seen:
            seen.add(var)
            order.append(var)

    obj_terms, obj_const = _parse_terms(objective[0].split(":", 1)[1]) if objective else ([], 0.0)
    parsed_rows = []
    for row in rows:
        label, body = row.split(":", 1)
        m = re.match(r"(.*?)\s*(<=|>=|=)\s*(\S+)\s*$", body)
        terms, _ = _parse_terms(m.group(1))
        parsed_rows.append((label.strip(), terms, m.group(2), float(m.group(3))))
    bound_map: dict[str, tuple[float, float]] = {}
    for b in bounds:
        parts = b.split()
        if len(parts) == 2 and parts[1] == "free":
            bound_map[parts[0]] = (-math.inf, math.inf)
        elif len(parts) == 3 and parts[1] == "=":
            bound_map[parts[0]] = (float(parts[2]),) * 2
        else:
            bound_map[parts[2]] = (float(parts[0]), float(parts[4]))

    for v in bound_map:
        note(v)
    for _, v in obj_terms:
        note(v)
    for _, terms, _, _ in parsed_rows:
        for _, v in terms:
            note(v)
    for v in binaries:
        note(v)

    model = ModelIR(name=name)
    bin_set = set(binaries)
    for v in order:
        lo, hi = bound_map.get(v, (0.0, 1.0) if v in bin_set else (0.0, math.inf))
        model.add_var(v, BINARY if v in bin_set else CONTINUOUS, lo, hi)
    model.set_objective([(c, model.var(v)) for c, v in obj_terms], obj_const)
    for label, terms, sense, rhs in parsed_rows:
        tag = label.rsplit("#", 1)[0]
        model.add_constraint([(c, model.var(v)) for c, v in terms], sense, rhs, tag)
    return model
