"""Reference implementations used only by the tests.

Each oracle is written independently of the package code it checks: the
normal quantile avoids scipy, the MILP enumerator talks to highspy directly,
and the session sampler builds schedules from per-vehicle reachability.
"""

import itertools
import math

import highspy
import numpy as np


def erf_series(x: float, terms: int = 80) -> float:
    """Maclaurin series of erf; accurate to ~1e-15 for |x| <= 4."""
    s = 0.0
    for n in range(terms):
        s += (-1) ** n * x ** (2 * n + 1) / (math.factorial(n) * (2 * n + 1))
    return 2.0 / math.sqrt(math.pi) * s


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + erf_series(x / math.sqrt(2.0)))


def normal_quantile_bisect(p: float, tol: float = 1e-13) -> float:
    lo, hi = -8.0, 8.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def brute_force_milp(c, A, lo, hi, lb, ub, integ):
    """Optimal objective by enumerating every binary assignment.

    The LP is loaded into one highspy instance; each assignment only changes
    column bounds, so later solves warm-start from the previous basis.
    Returns ``inf`` when every assignment is infeasible.
    """
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    m, n = A.shape
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    inf = highspy.kHighsInf
    big = lambda v: inf if v == math.inf else (-inf if v == -math.inf else float(v))  # noqa: E731
    for j in range(n):
        h.addVar(big(lb[j]), big(ub[j]))
        h.changeColCost(j, float(c[j]))
    for i in range(m):
        nz = np.flatnonzero(A[i])
        h.addRow(big(lo[i]), big(hi[i]), len(nz), nz.astype(np.int32), A[i, nz])
    bins = np.flatnonzero(integ)
    best = math.inf
    for assign in itertools.product((0.0, 1.0), repeat=len(bins)):
        for j, v in zip(bins, assign):
            h.changeColBounds(int(j), v, v)
        h.run()
        if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
            best = min(best, h.getInfo().objective_function_value)
    return best


def random_feasible_session_schedule(s, n_steps: int, dt: float, rng):
    """Random per-vehicle schedule meeting power, SOC and departure constraints.

    The SOC is walked forward step by step, each step drawn uniformly from the
    interval that is reachable in one step, inside the corridor, and still
    allows reaching ``soc_leave`` by the departure step.  Returns
    ``(p_ch, p_dis, soc)`` on the full grid (zero outside the window).
    """
    up = s.eta_ch * s.p_ch_max * dt
    down = s.eta_ref * s.p_dis_max * dt / s.eta_dis
    p_ch = np.zeros(n_steps)
    p_dis = np.zeros(n_steps)
    soc = np.zeros(n_steps)
    level = s.soc_arrive
    for t in s.window:
        left = s.t_leave - t
        lo = max(level - down, s.soc_min, s.soc_leave - left * up)
        hi = min(level + up, s.soc_max, s.soc_leave + left * down)
        if t == s.t_leave:
            lo = hi = s.soc_leave
        if lo > hi + 1e-9:
            raise ValueError("session is not feasible")
        nxt = rng.uniform(lo, max(lo, hi))
        delta = nxt - level
        if delta >= 0:
            p_ch[t] = min(delta / (s.eta_ch * dt), s.p_ch_max)
        else:
            p_dis[t] = min(-delta * s.eta_dis / (s.eta_ref * dt), s.p_dis_max)
        level = level + s.eta_ch * p_ch[t] * dt - s.eta_ref * p_dis[t] * dt / s.eta_dis
        soc[t] = level
    return p_ch, p_dis, soc


def greedy_ramp_projection(target, p0: float, ramp_up: float, ramp_down: float):
    """Closest ramp-feasible path to ``target`` built step by step from ``p0``."""
    out = []
    prev = p0
    for x in target:
        prev = min(max(x, prev - ramp_down), prev + ramp_up)
        out.append(prev)
    return np.array(out)
