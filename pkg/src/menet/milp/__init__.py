"""Mixed-integer linear programming: model IR, linearizations and solver backends.

``solve(model, backend=...)`` is the single entry point.  Two backends ship:

* ``"highs"``: HiGHS through :func:`scipy.optimize.milp`, used for scheduling.
* ``"bnb"``: self-contained best-first branch-and-bound over a dense simplex.
"""

from __future__ import annotations

import logging

from .bnb import BranchAndBoundBackend
from .highs import HighsBackend
from .linearize import add_abs, add_exclusive_pair, add_pwl, expr_range
from .model import INF, MilpModel, ModelingError, ResourceLimitError, Solution, Status
from .simplex import LpResult, solve_lp

logger = logging.getLogger(__name__)

BACKENDS = {"highs": HighsBackend, "bnb": BranchAndBoundBackend}

FEASIBILITY_TOL = 1e-6


def get_backend(backend="highs", **options):
    if isinstance(backend, str):
        try:
            return BACKENDS[backend](**options)
        except KeyError:
            raise ValueError(f"unknown solver backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    return backend


def solve(model: MilpModel, backend="highs", **options) -> Solution:
    """Solve ``model`` to optimality with the named backend (or a backend instance)."""
    sol = get_backend(backend, **options).solve(model)
    if sol.optimal:
        viol = model.max_violation(sol.x)
        if viol > FEASIBILITY_TOL:
            logger.warning("%s: solution violates constraints by %.3g", model.name, viol)
    return sol


__all__ = [
    "BACKENDS",
    "BranchAndBoundBackend",
    "HighsBackend",
    "INF",
    "LpResult",
    "MilpModel",
    "ModelingError",
    "ResourceLimitError",
    "Solution",
    "Status",
    "add_abs",
    "add_exclusive_pair",
    "add_pwl",
    "expr_range",
    "get_backend",
    "solve",
    "solve_lp",
]
