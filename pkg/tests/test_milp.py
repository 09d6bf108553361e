import itertools
import math

import numpy as np
import pytest
from oracles import brute_force_milp

from menet import milp
from menet.milp import MilpModel, ModelingError, ResourceLimitError, Status, solve_lp
from menet.milp.bnb import BranchAndBoundBackend

BACKENDS = ["highs", "bnb"]


def knapsack(values, weights, cap):
    m = MilpModel("knapsack")
    x = m.add_vars("x", len(values), binary=True)
    m.add_constr({int(v): float(w) for v, w in zip(x, weights)}, "<=", cap)
    m.add_objective({int(v): -float(c) for v, c in zip(x, values)})
    return m, x


def knapsack_brute(values, weights, cap):
    best = 0.0
    for pick in itertools.product((0, 1), repeat=len(values)):
        if np.dot(pick, weights) <= cap:
            best = max(best, float(np.dot(pick, values)))
    return best


@pytest.mark.parametrize("backend", BACKENDS)
def test_knapsack_matches_enumeration(backend):
    rng = np.random.default_rng(0)
    for _ in range(15):
        n = int(rng.integers(3, 11))
        vals = rng.integers(1, 30, n)
        wts = rng.integers(1, 20, n)
        cap = float(wts.sum() // 2)
        m, _ = knapsack(vals, wts, cap)
        sol = milp.solve(m, backend)
        assert sol.optimal
        assert math.isclose(-sol.objective, knapsack_brute(vals, wts, cap), rel_tol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_small_lp_hand_solution(backend):
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6 -> (8/5, 6/5), objective 14/5
    m = MilpModel()
    x, y = m.add_var("x"), m.add_var("y")
    m.add_constr({x: 1, y: 2}, "<=", 4)
    m.add_constr({x: 3, y: 1}, "<=", 6)
    m.add_objective({x: -1, y: -1})
    sol = milp.solve(m, backend)
    assert sol.optimal
    assert math.isclose(sol.objective, -14 / 5, rel_tol=1e-9)
    assert np.allclose(sol.x, [1.6, 1.2])


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible_and_unbounded(backend):
    m = MilpModel()
    x = m.add_var("x", 0, 1)
    m.add_constr({x: 1}, ">=", 2)
    assert milp.solve(m, backend).status is Status.INFEASIBLE
    u = MilpModel()
    y = u.add_var("y", -milp.INF, milp.INF)
    u.add_objective({y: 1})
    assert milp.solve(u, backend).status is Status.UNBOUNDED


def test_objective_constant_is_reported():
    m = MilpModel()
    x = m.add_var("x", 1, 2)
    m.add_objective({x: 1}, constant=10)
    sol = milp.solve(m)
    assert math.isclose(sol.objective, 11.0)


def test_unknown_backend():
    with pytest.raises(ValueError):
        milp.solve(MilpModel(), "cplex")


def test_node_limit_raises_with_incumbent():
    rng = np.random.default_rng(4)
    vals, wts = rng.integers(10, 30, 14), rng.integers(10, 30, 14)
    m, _ = knapsack(vals, wts, float(wts.sum() / 2))
    with pytest.raises(ResourceLimitError):
        milp.solve(m, BranchAndBoundBackend(node_limit=3))


def test_simplex_against_highspy_oracle():
    rng = np.random.default_rng(9)
    for _ in range(25):
        n, k = 6, 4
        A = rng.normal(size=(k, n))
        x0 = rng.uniform(0, 1, n)
        hi = A @ x0 + rng.uniform(0, 1, k)
        c = rng.normal(size=n)
        lb, ub = np.zeros(n), np.full(n, 3.0)
        res = solve_lp(c, A, np.full(k, -np.inf), hi, lb, ub)
        ref = brute_force_milp(c, A, np.full(k, -np.inf), hi, lb, ub, np.zeros(n, bool))
        assert res.status is Status.OPTIMAL
        assert math.isclose(res.objective, ref, rel_tol=1e-7, abs_tol=1e-9)


def test_abs_epigraph():
    m = MilpModel()
    x = m.add_var("x", -5, 5)
    m.add_constr({x: 1}, "=", -3)
    a = milp.add_abs(m, {x: 1}, ref=1.0)
    m.add_objective({a: 1})
    sol = milp.solve(m)
    assert math.isclose(sol.value(a), 4.0)
    assert m.bounds_of(a)[1] == 6.0
    with pytest.raises(ModelingError):
        milp.add_abs(m, {x: 1}, big_m=1.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_pwl_exact_on_nonconvex_curve(backend):
    xs = [0.0, 1.0, 2.0, 3.0]
    ys = [0.0, 4.0, 5.0, 9.0]  # concave then convex
    for target in (0.5, 1.0, 1.5, 2.7):
        m = MilpModel()
        x = m.add_var("x", 0, 3)
        m.fix(x, target)
        cost = milp.add_pwl(m, x, xs, ys)
        m.add_objective({cost: 1})
        sol = milp.solve(m, backend)
        assert math.isclose(sol.value(cost), float(np.interp(target, xs, ys)), abs_tol=1e-7)


def test_pwl_affine_is_exact_and_active_switch():
    xs = np.linspace(2, 6, 5)
    m = MilpModel()
    x = m.add_var("x", 0, 6)
    on = m.add_var("on", binary=True)
    cost = milp.add_pwl(m, x, xs, 2 * xs + 5, active=on)
    m.fix(on, 0.0)
    m.add_objective({cost: 1})
    sol = milp.solve(m)
    assert sol.value(x) == 0.0 and abs(sol.value(cost)) < 1e-9
    m2 = MilpModel()
    x2 = m2.add_var("x", 0, 6)
    on2 = m2.add_var("on", binary=True)
    c2 = milp.add_pwl(m2, x2, xs, 2 * xs + 5, active=on2)
    m2.fix(on2, 1.0)
    m2.fix(x2, 3.3)
    m2.add_objective({c2: 1})
    assert math.isclose(milp.solve(m2).value(c2), 2 * 3.3 + 5, rel_tol=1e-9)


def test_pwl_rejects_bad_breakpoints():
    m = MilpModel()
    x = m.add_var("x")
    with pytest.raises(ModelingError):
        milp.add_pwl(m, x, [0, 0, 1], [0, 1, 2])


def test_exclusive_pair_blocks_simultaneous_flow():
    m = MilpModel()
    ch, dis = m.add_var("ch", 0, 10), m.add_var("dis", 0, 10)
    milp.add_exclusive_pair(m, ch, dis)
    # paying for both would be profitable without the binary
    m.add_objective({ch: -1, dis: -1})
    sol = milp.solve(m)
    assert sol.value(ch) * sol.value(dis) == 0.0
    assert math.isclose(sol.objective, -10.0)


def test_exclusive_pair_requires_finite_caps():
    m = MilpModel()
    with pytest.raises(ModelingError):
        milp.add_exclusive_pair(m, m.add_var("a"), m.add_var("b"))


def test_model_copy_is_independent():
    m, x = knapsack([3, 4], [1, 1], 1)
    c = m.copy(keep_objective=False)
    c.add_constr({int(x[0]): 1}, "=", 1)
    assert m.n_constraints == 1 and c.n_constraints == 2
    assert np.all(c.objective_vector() == 0)


def test_lp_export_lists_sections():
    m, _ = knapsack([3, 4], [1, 2], 2)
    text = m.to_lp()
    for section in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert section in text


def test_residuals_report_violations():
    m = MilpModel()
    x = m.add_var("x", 0, 1, binary=True)
    m.add_constr({x: 1}, "<=", 0.2)
    r = m.residuals(np.array([0.5]))
    assert math.isclose(r["row"], 0.3) and math.isclose(r["integrality"], 0.5)


def test_backends_agree_and_are_deterministic():
    rng = np.random.default_rng(12)
    m = MilpModel()
    b = m.add_vars("b", 6, binary=True)
    y = m.add_vars("y", 4, 0, 5)
    for _ in range(5):
        coef = rng.normal(size=10)
        m.add_constr({int(v): float(c) for v, c in zip(np.concatenate([b, y]), coef)}, "<=", 2.0)
    m.add_objective({int(v): float(c) for v, c in zip(np.concatenate([b, y]), rng.normal(size=10))})
    objs = [milp.solve(m, be).objective for be in BACKENDS for _ in range(2)]
    assert max(objs) - min(objs) < 1e-7
