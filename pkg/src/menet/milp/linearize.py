"""Linearization helpers: absolute values, piecewise-linear costs, mutual exclusion."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .model import INF, MilpModel, ModelingError

Expr = int | Mapping[int, float]


def _terms(x: Expr) -> dict[int, float]:
    if isinstance(x, Mapping):
        return {int(k): float(v) for k, v in x.items()}
    return {int(x): 1.0}


def expr_range(model: MilpModel, x: Expr) -> tuple[float, float]:
    """Interval bounds of a linear expression implied by its variables' bounds."""
    lo = hi = 0.0
    for v, c in _terms(x).items():
        lb, ub = model.bounds_of(v)
        if c >= 0:
            lo += c * lb
            hi += c * ub
        else:
            lo += c * ub
            hi += c * lb
    return lo, hi


def add_abs(model: MilpModel, x: Expr, big_m: float | None = None, ref: float = 0.0,
            name: str | None = None) -> int:
    """Epigraph variable ``a >= |x - ref|``.

    Only exact under minimization pressure: the caller must put ``a`` in the
    objective with a positive coefficient.  ``big_m`` (defaulting to the range
    implied by ``x``'s bounds) becomes the upper bound of ``a``.
    """
    terms = _terms(x)
    lo, hi = expr_range(model, terms)
    reach = max(abs(lo - ref), abs(hi - ref))
    if big_m is None:
        big_m = reach
    elif big_m < reach - 1e-9 * max(1.0, reach):
        raise ModelingError(f"big_m={big_m} is smaller than the bound range {reach} of the expression")
    label = name or f"abs{model.n_vars}"
    a = model.add_var(label, 0.0, big_m if math.isfinite(big_m) else INF)
    model.add_constr({**{v: -c for v, c in terms.items()}, a: 1.0}, ">=", -ref, f"{label}_pos")
    model.add_constr({**terms, a: 1.0}, ">=", ref, f"{label}_neg")
    return a


def add_pwl(model: MilpModel, x: int, xs: Sequence[float], ys: Sequence[float],
            active: int | None = None, name: str | None = None) -> int:
    """Return a variable equal to the piecewise-linear interpolant of ``(xs, ys)`` at ``x``.

    Incremental (delta) formulation with one binary per interior breakpoint.
    Segment fills are ordered by the binaries, so the value is exact for any
    curvature.  With ``active`` (a binary) the domain becomes
    ``{0} U [xs[0], xs[-1]]`` and the cost is 0 when ``active`` is 0.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2 or xs.size != ys.size:
        raise ModelingError("a piecewise-linear function needs at least 2 breakpoints")
    if np.any(np.diff(xs) <= 0):
        raise ModelingError("breakpoints must be strictly increasing")
    label = name or f"pwl{model.n_vars}"
    lengths = np.diff(xs)
    slopes = np.diff(ys) / lengths
    k = lengths.size
    delta = model.add_vars(f"{label}_d", k, 0.0, lengths)
    z = model.add_vars(f"{label}_z", k - 1, binary=True) if k > 1 else np.zeros(0, dtype=np.int64)

    link = {x: 1.0, **{int(d): -1.0 for d in delta}}
    cost = model.add_var(f"{label}_cost", -INF, INF)
    cost_terms = {cost: 1.0, **{int(d): -s for d, s in zip(delta, slopes)}}
    if active is None:
        model.add_constr(link, "=", xs[0], f"{label}_x")
        model.add_constr(cost_terms, "=", ys[0], f"{label}_c")
    else:
        link[active] = link.get(active, 0.0) - xs[0]
        model.add_constr(link, "=", 0.0, f"{label}_x")
        cost_terms[active] = cost_terms.get(active, 0.0) - ys[0]
        model.add_constr(cost_terms, "=", 0.0, f"{label}_c")
        model.add_constr({int(delta[0]): 1.0, active: -lengths[0]}, "<=", 0.0, f"{label}_on")
    # segment s may only start filling once segment s-1 is full
    for s in range(1, k):
        zs = int(z[s - 1])
        model.add_constr({int(delta[s - 1]): 1.0, zs: -lengths[s - 1]}, ">=", 0.0, f"{label}_full{s}")
        model.add_constr({int(delta[s]): 1.0, zs: -lengths[s]}, "<=", 0.0, f"{label}_open{s}")
    return cost


def add_exclusive_pair(model: MilpModel, x: int, y: int, x_cap: float | None = None,
                       y_cap: float | None = None, name: str | None = None) -> int:
    """Binary ``b`` with ``x <= x_cap * b`` and ``y <= y_cap * (1 - b)``.

    Caps default to the variables' upper bounds.
    """
    x_cap = model.bounds_of(x)[1] if x_cap is None else float(x_cap)
    y_cap = model.bounds_of(y)[1] if y_cap is None else float(y_cap)
    if not (math.isfinite(x_cap) and math.isfinite(y_cap)) or x_cap < 0 or y_cap < 0:
        raise ModelingError("exclusive-pair caps must be finite and nonnegative")
    label = name or f"excl{model.n_vars}"
    b = model.add_var(label, binary=True)
    model.add_constr({x: 1.0, b: -x_cap}, "<=", 0.0, f"{label}_x")
    model.add_constr({y: 1.0, b: y_cap}, "<=", y_cap, f"{label}_y")
    return b
