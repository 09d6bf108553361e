"""Adapter for the HiGHS MILP solver shipped with scipy."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import MilpModel, ResourceLimitError, Solution, Status


class HighsBackend:
    """Solve through :func:`scipy.optimize.milp`.

    After a MILP solve the binaries are fixed at their rounded values and the
    remaining LP is re-solved, so continuous values tied to a binary through
    big-M rows come back clean instead of carrying solver tolerance noise.
    """

    name = "highs"

    def __init__(self, mip_rel_gap: float = 1e-6, time_limit: float | None = None,
                 node_limit: int | None = None, polish: bool = True):
        self.mip_rel_gap = mip_rel_gap
        self.time_limit = time_limit
        self.node_limit = node_limit
        self.polish = polish

    def _run(self, c, A, lo, hi, lb, ub, integ):
        options = {"disp": False, "presolve": True, "mip_rel_gap": self.mip_rel_gap}
        if self.time_limit is not None:
            options["time_limit"] = self.time_limit
        if self.node_limit is not None:
            options["node_limit"] = self.node_limit
        cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
        return milp(c, constraints=cons, bounds=Bounds(lb, ub), integrality=integ.astype(int), options=options)

    def solve(self, model: MilpModel) -> Solution:
        c, A, lo, hi, lb, ub, integ = model.to_arrays()
        res = self._run(c, A, lo, hi, lb, ub, integ)
        if res.status == 3:
            return Solution(Status.UNBOUNDED, -math.inf, backend=self.name)
        # HiGHS can report some unbounded models as infeasible; a zero-objective probe tells them apart
        if res.status == 2 or (res.status == 4 and "unbounded" in str(res.message).lower()):
            probe = self._run(np.zeros_like(c), A, lo, hi, lb, ub, integ)
            status = Status.UNBOUNDED if probe.status == 0 else Status.INFEASIBLE
            return Solution(status, -math.inf if status is Status.UNBOUNDED else math.nan, backend=self.name)
        if res.status == 1:
            inc = None
            if res.x is not None:
                inc = Solution(Status.OPTIMAL, model.evaluate(res.x), np.asarray(res.x), backend=self.name)
            raise ResourceLimitError(f"HiGHS stopped early: {res.message}", inc)
        if res.status != 0:
            raise RuntimeError(f"HiGHS failed: {res.message}")

        x = np.asarray(res.x, dtype=float)
        if self.polish and integ.any():
            x = self._polish(x, c, A, lo, hi, lb, ub, integ)
        x = np.clip(x, lb, ub)
        x[integ] = np.round(x[integ])
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        return Solution(Status.OPTIMAL, model.evaluate(x), x, nodes, self.name)

    def _polish(self, x, c, A, lo, hi, lb, ub, integ):
        fixed = np.round(x[integ])
        plb, pub = lb.copy(), ub.copy()
        plb[integ] = pub[integ] = fixed
        res = self._run(c, A, lo, hi, plb, pub, np.zeros_like(integ))
        if res.status != 0:
            return x
        return np.asarray(res.x, dtype=float)
