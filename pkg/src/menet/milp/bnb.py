"""Best-first branch-and-bound over the dense simplex."""

from __future__ import annotations

import heapq
import math

import numpy as np

from .model import MilpModel, ResourceLimitError, Solution, Status
from .simplex import solve_lp


class BranchAndBoundBackend:
    """Exact MILP solver for binary-only integrality.

    Nodes are explored best-bound first (ties by creation order, so runs are
    deterministic); branching picks the most fractional binary.

    Args:
        node_limit: Maximum number of LP relaxations solved.
        rel_gap: A node is pruned when its bound is within
            ``rel_gap * max(1, |incumbent|)`` of the incumbent.
        int_tol: Distance from {0, 1} accepted as integral.
    """

    name = "bnb"

    def __init__(self, node_limit: int = 200_000, rel_gap: float = 1e-9, int_tol: float = 1e-6):
        self.node_limit = node_limit
        self.rel_gap = rel_gap
        self.int_tol = int_tol

    def solve(self, model: MilpModel) -> Solution:
        c, A, lo, hi, lb, ub, integ = model.to_arrays()
        A = A.toarray()
        bins = np.flatnonzero(integ)
        best_x, best_obj = None, math.inf
        counter = 0
        nodes = 0

        root = solve_lp(c, A, lo, hi, lb, ub)
        nodes += 1
        if root.status is Status.INFEASIBLE:
            return Solution(Status.INFEASIBLE, nodes=nodes, backend=self.name)
        if root.status is Status.UNBOUNDED:
            return Solution(Status.UNBOUNDED, -math.inf, nodes=nodes, backend=self.name)
        heap = [(root.objective, counter, lb.copy(), ub.copy(), root.x)]

        while heap:
            bound, _, nlb, nub, x = heapq.heappop(heap)
            if bound >= self._cutoff(best_obj):
                continue
            frac = np.abs(x[bins] - np.round(x[bins])) if bins.size else np.zeros(0)
            if not bins.size or frac.max() <= self.int_tol:
                best_x, best_obj = x, bound
                continue
            k = int(bins[np.argmax(frac)])
            for val in (0.0, 1.0):
                clb, cub = nlb.copy(), nub.copy()
                clb[k] = cub[k] = val
                if nodes >= self.node_limit:
                    inc = self._finish(model, best_x, nodes) if best_x is not None else None
                    raise ResourceLimitError(f"node limit {self.node_limit} reached", inc)
                res = solve_lp(c, A, lo, hi, clb, cub)
                nodes += 1
                if res.status is Status.OPTIMAL and res.objective < self._cutoff(best_obj):
                    counter += 1
                    heapq.heappush(heap, (res.objective, counter, clb, cub, res.x))

        if best_x is None:
            return Solution(Status.INFEASIBLE, nodes=nodes, backend=self.name)
        return self._finish(model, best_x, nodes)

    def _cutoff(self, incumbent: float) -> float:
        if not math.isfinite(incumbent):
            return math.inf
        return incumbent - self.rel_gap * max(1.0, abs(incumbent))

    def _finish(self, model: MilpModel, x: np.ndarray, nodes: int) -> Solution:
        x = x.copy()
        integ = np.array(model.binary, dtype=bool)
        x[integ] = np.round(x[integ])
        return Solution(Status.OPTIMAL, model.evaluate(x), x, nodes, self.name)
