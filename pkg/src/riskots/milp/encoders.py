"""Big-M and logical encoders that append linear constraints to a ModelIR.

Indicators may be a binary :class:`VarRef` or the constants 0/1. Passing
``complement=True`` uses ``1 - u`` as the indicator without creating a new
variable: the coefficients of ``u`` are sign-flipped instead.
"""

from __future__ import annotations

from typing import Sequence, Union

from .model import ModelIR, Term, VarRef

Indicator = Union[VarRef, int]
LinExpr = Sequence[Term]


def _indicator(u: Indicator, complement: bool) -> tuple[list[Term], float]:
    """Return the indicator as ``terms + const``."""
    if isinstance(u, VarRef):
        if not u.is_binary:
            raise ValueError(f"indicator {u.name} must be binary")
        return ([(-1.0, u)], 1.0) if complement else ([(1.0, u)], 0.0)
    if u not in (0, 1):
        raise ValueError(f"constant indicator must be 0 or 1, got {u!r}")
    return [], float(1 - u if complement else u)


def _scaled(terms: list[Term], k: float) -> list[Term]:
    return [(k * c, v) for c, v in terms]


def _check_m(m: float) -> None:
    if not m > 0:
        raise ValueError(f"big-M must be positive, got {m}")


def encode_zero_when(model: ModelIR, a: VarRef, u: Indicator, m: float,
                     complement: bool = False, tag: str = "plumbing") -> None:
    """``a = 0`` when the indicator is 1, ``|a| <= m`` otherwise."""
    _check_m(m)
    ind, c = _indicator(u, complement)
    # a <= m (1 - ind)  and  -a <= m (1 - ind)
    for sign in (1.0, -1.0):
        model.add_constraint([(sign, a)] + _scaled(ind, m), "<=", m * (1 - c), tag)


def encode_product(model: ModelIR, a: VarRef, expr: LinExpr, u: Indicator, m: float,
                   complement: bool = False, tag: str = "plumbing") -> None:
    """``a = expr * ind`` with ``ind`` binary, given ``|a|, |expr| <= m``."""
    _check_m(m)
    ind, c = _indicator(u, complement)
    expr = list(expr)
    # a <= m ind ; -a <= m ind
    for sign in (1.0, -1.0):
        model.add_constraint([(sign, a)] + _scaled(ind, -m), "<=", m * c, tag)
    # a - expr <= m (1 - ind) ; -a + expr <= m (1 - ind)
    for sign in (1.0, -1.0):
        model.add_constraint([(sign, a)] + _scaled(expr, -sign) + _scaled(ind, m),
                             "<=", m * (1 - c), tag)


def encode_flow_equation(model: ModelIR, f: VarRef, b: float, phi_dst: VarRef, phi_org: VarRef,
                         w: Indicator, m: float, tag: str = "dc_flow") -> None:
    """``f = b (phi_dst - phi_org)`` on a closed branch (``w = 0``), ``f = 0`` when open."""
    encode_product(model, f, [(b, phi_dst), (-b, phi_org)], w, m, complement=True, tag=tag)


def encode_abs_limit(model: ModelIR, f: VarRef, limit: float, tag: str = "flow_limit") -> None:
    if not limit > 0:
        raise ValueError(f"limit must be positive, got {limit}")
    model.add_constraint([(1.0, f)], "<=", limit, tag)
    model.add_constraint([(-1.0, f)], "<=", limit, tag)


def encode_or(model: ModelIR, x: VarRef, inputs: Sequence[VarRef],
              tag: str = "plumbing") -> None:
    """``x = OR(inputs)`` for binaries."""
    if not inputs:
        raise ValueError("encode_or needs at least one input")
    for a in inputs:
        model.add_constraint([(1.0, x), (-1.0, a)], ">=", 0.0, tag)
    model.add_constraint([(1.0, x)] + [(-1.0, a) for a in inputs], "<=", 0.0, tag)


def encode_and_not(model: ModelIR, psi: VarRef, pi: VarRef, w: Indicator,
                   tag: str = "plumbing") -> None:
    """``psi = pi AND NOT w``."""
    w_terms, w_c = _indicator(w, False)
    model.add_constraint([(1.0, psi), (-1.0, pi)], "<=", 0.0, tag)
    model.add_constraint([(1.0, psi)] + w_terms, "<=", 1.0 - w_c, tag)
    model.add_constraint([(1.0, psi), (-1.0, pi)] + w_terms, ">=", -w_c, tag)
