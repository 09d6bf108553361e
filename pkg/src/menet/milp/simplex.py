"""Dense bounded-variable primal simplex.

Small and dependency-free (numpy only); meant for models with at most a few
hundred columns, namely the branch-and-bound backend and cross-checks.  Large
scheduling models go through the HiGHS backend instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Status

# Dantzig pricing until this many consecutive degenerate pivots, then Bland's rule
_DEGENERATE_SWITCH = 30


@dataclass
class LpResult:
    status: Status
    x: np.ndarray | None
    objective: float
    iterations: int = 0


class _StandardForm:
    """``min c y  s.t.  A y = b,  0 <= y <= u`` plus the map back to ``x``."""

    def __init__(self, c, A, lo, hi, lb, ub):
        m, n = A.shape
        upper = []
        offset = np.zeros(n)
        tcols = []  # (x index, sign, upper bound) per structural y column
        for j in range(n):
            if math.isfinite(lb[j]):
                offset[j] = lb[j]
                tcols.append((j, 1.0, ub[j] - lb[j]))
            elif math.isfinite(ub[j]):
                offset[j] = ub[j]
                tcols.append((j, -1.0, math.inf))
            else:
                tcols.append((j, 1.0, math.inf))
                tcols.append((j, -1.0, math.inf))
        ny = len(tcols)
        xmap = np.zeros((n, ny))
        for k, (j, s, u) in enumerate(tcols):
            xmap[j, k] = s
            upper.append(u)
        A_y = A @ xmap
        c_y = c @ xmap
        shift = A @ offset

        rows, rhs, slack_cols = [], [], []
        for i in range(m):
            l, h = lo[i] - shift[i], hi[i] - shift[i]
            if not math.isfinite(l) and not math.isfinite(h):
                continue
            if math.isfinite(l) and math.isfinite(h) and l == h:
                rows.append(A_y[i])
                rhs.append(l)
                slack_cols.append(None)
            elif math.isfinite(h) and math.isfinite(l):
                # a y - s = l, 0 <= s <= h - l
                rows.append(A_y[i])
                rhs.append(l)
                slack_cols.append((-1.0, h - l))
            elif math.isfinite(h):
                rows.append(A_y[i])
                rhs.append(h)
                slack_cols.append((1.0, math.inf))
            else:
                rows.append(A_y[i])
                rhs.append(l)
                slack_cols.append((-1.0, math.inf))
        mr = len(rows)
        n_slack = sum(s is not None for s in slack_cols)
        N = ny + n_slack
        At = np.zeros((mr, N))
        if mr:
            At[:, :ny] = np.array(rows)
        u = np.full(N, math.inf)
        u[:ny] = upper
        b = np.array(rhs, dtype=float)
        slack_of_row = np.full(mr, -1)
        k = ny
        for i, s in enumerate(slack_cols):
            if s is not None:
                At[i, k] = s[0]
                u[k] = s[1]
                slack_of_row[i] = k
                k += 1
        neg = b < 0
        At[neg] *= -1
        b[neg] *= -1
        self.A, self.b, self.u = At, b, u
        self.c = np.concatenate([c_y, np.zeros(n_slack)])
        self.ny = ny
        self.xmap, self.offset = xmap, offset
        self.slack_of_row = slack_of_row

    def to_x(self, y: np.ndarray) -> np.ndarray:
        return self.offset + self.xmap @ y[: self.ny]


def _iterate(T, xB, basis, at_upper, c, u, eligible, tol, max_iter):
    """Run primal simplex pivots in place; returns ``(status, iterations)``."""
    m, N = T.shape
    degenerate = 0
    it = 0
    while True:
        if it >= max_iter:
            raise RuntimeError(f"simplex iteration limit {max_iter} reached")
        it += 1
        d = c - c[basis] @ T if m else c.copy()
        d[basis] = 0.0
        down = at_upper & (d > tol)
        up = ~at_upper & (d < -tol)
        cand = eligible & (down | up) & (u > 0)
        cand[basis] = False
        if not cand.any():
            return Status.OPTIMAL, it
        if degenerate < _DEGENERATE_SWITCH:
            j = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
        else:
            j = int(np.flatnonzero(cand)[0])
        s = -1.0 if at_upper[j] else 1.0
        delta = s * T[:, j]
        theta = u[j]
        leave, leave_upper = -1, False
        best_var = None
        for i in range(m):
            di = delta[i]
            if di > tol:
                r = xB[i] / di
                to_upper = False
            elif di < -tol and math.isfinite(u[basis[i]]):
                r = (u[basis[i]] - xB[i]) / (-di)
                to_upper = True
            else:
                continue
            r = max(r, 0.0)
            if r < theta - tol or (abs(r - theta) <= tol and leave >= 0 and basis[i] < best_var):
                theta, leave, leave_upper, best_var = r, i, to_upper, basis[i]
        if not math.isfinite(theta):
            return Status.UNBOUNDED, it
        degenerate = degenerate + 1 if theta <= tol else 0
        xB -= theta * delta
        if leave < 0:
            at_upper[j] = not at_upper[j]
            continue
        enter_val = (u[j] if at_upper[j] else 0.0) + s * theta
        old = basis[leave]
        at_upper[old] = leave_upper
        basis[leave] = j
        at_upper[j] = False
        xB[leave] = enter_val
        piv = T[leave, j]
        T[leave] /= piv
        col = T[:, j].copy()
        col[leave] = 0.0
        T -= np.outer(col, T[leave])
        np.clip(xB, 0.0, u[basis], out=xB)


def solve_lp(c, A, lo, hi, lb, ub, tol: float = 1e-9, max_iter: int | None = None) -> LpResult:
    """Minimize ``c x`` subject to ``lo <= A x <= hi`` and ``lb <= x <= ub``.

    Args:
        c: Objective coefficients, shape (n,).
        A: Dense constraint matrix, shape (m, n).
        lo, hi: Row bounds (may be infinite).
        lb, ub: Variable bounds (may be infinite).
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, c.size)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub):
        return LpResult(Status.INFEASIBLE, None, math.nan)
    sf = _StandardForm(c, A, np.asarray(lo, float), np.asarray(hi, float), lb, ub)
    m, N = sf.A.shape
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000

    # phase 1: slack columns start basic where possible, artificials elsewhere
    basis = np.empty(m, dtype=np.int64)
    art_rows = []
    for i in range(m):
        k = sf.slack_of_row[i]
        if k >= 0 and sf.A[i, k] > 0 and sf.b[i] <= sf.u[k]:
            basis[i] = k
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    T = np.zeros((m, N + n_art))
    T[:, :N] = sf.A
    for a, i in enumerate(art_rows):
        T[i, N + a] = 1.0
        basis[i] = N + a
    u = np.concatenate([sf.u, np.zeros(n_art) + math.inf])
    at_upper = np.zeros(N + n_art, dtype=bool)
    xB = sf.b.copy()
    eligible = np.ones(N + n_art, dtype=bool)
    iters = 0
    if n_art:
        c1 = np.concatenate([np.zeros(N), np.ones(n_art)])
        _, it1 = _iterate(T, xB, basis, at_upper, c1, u, eligible, tol, max_iter)
        iters += it1
        infeas = float(c1[basis] @ xB)
        if infeas > 1e-7 * max(1.0, float(np.abs(sf.b).max(initial=0.0))):
            return LpResult(Status.INFEASIBLE, None, math.nan, iters)
        u[N:] = 0.0
        eligible[N:] = False
    c2 = np.concatenate([sf.c, np.zeros(n_art)])
    status, it2 = _iterate(T, xB, basis, at_upper, c2, u, eligible, tol, max_iter)
    iters += it2
    if status is Status.UNBOUNDED:
        return LpResult(status, None, -math.inf, iters)
    y = np.where(at_upper, u, 0.0)
    y[basis] = xB
    x = sf.to_x(y[:N])
    x = np.clip(x, lb, ub)
    return LpResult(Status.OPTIMAL, x, float(c @ x), iters)
