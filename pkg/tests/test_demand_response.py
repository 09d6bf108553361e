import numpy as np
import pytest

from menet import milp
from menet.demand_response import DrDecision, DrParams, DrValidationError, add_dr, dr_cost, effective_loads
from menet.milp import MilpModel
from menet.timegrid import Profile, TimeGrid

DA = TimeGrid.day_ahead()
BASE_E = Profile.constant(DA, 100.0)
BASE_H = Profile.constant(DA, 50.0)


def params(frac=0.2, cap_e=20.0, cap_h=10.0):
    return DrParams(frac, Profile.constant(DA, cap_e), Profile.constant(DA, cap_h), 0.8, 0.6)


def decision(**kw):
    z = np.zeros(24)
    vals = {k: kw.get(k, z) for k in ("shift_in", "shift_out", "curtail_e", "curtail_h")}
    return DrDecision(*(Profile(DA, v) for v in vals.values()))


def test_zero_decision_leaves_loads_unchanged():
    le, lh = effective_loads(BASE_E, BASE_H, DrDecision.zero(DA))
    assert np.array_equal(le.values, BASE_E.values) and np.array_equal(lh.values, BASE_H.values)
    assert dr_cost(DrDecision.zero(DA), params()) == 0.0


def test_shift_preserves_total_energy():
    out, into = np.zeros(24), np.zeros(24)
    out[18], into[3] = 10.0, 10.0
    le, _ = effective_loads(BASE_E, BASE_H, decision(shift_in=into, shift_out=out))
    assert le[18] == 90.0 and le[3] == 110.0
    assert le.energy() == pytest.approx(BASE_E.energy())


def test_curtailment_removes_energy_and_is_paid():
    cut = np.zeros(24)
    cut[10] = 5.0
    d = decision(curtail_e=cut)
    le, _ = effective_loads(BASE_E, BASE_H, d)
    assert le.energy() - BASE_E.energy() == pytest.approx(-5.0)
    assert dr_cost(d, params()) == pytest.approx(4.0)


def test_cost_of_ten_kwh_at_point_eight():
    cut = np.zeros(24)
    cut[[9, 10]] = 5.0
    assert dr_cost(decision(curtail_e=cut), params()) == pytest.approx(8.0)


def test_mixed_cost_is_the_sum_of_both_carriers():
    e, h = np.zeros(24), np.zeros(24)
    e[17], h[2], h[5] = 3.0, 4.0, 1.5
    d = decision(curtail_e=e, curtail_h=h)
    assert dr_cost(d, params()) == pytest.approx(0.8 * 3.0 + 0.6 * 5.5)


def test_validation_errors():
    unbalanced = np.zeros(24)
    unbalanced[3] = 1.0
    with pytest.raises(DrValidationError):
        decision(shift_in=unbalanced).validate()
    with pytest.raises(DrValidationError):
        decision(curtail_e=-unbalanced).validate()
    with pytest.raises(DrValidationError):
        decision(curtail_e=unbalanced * 50).validate(params())
    big = np.zeros(24)
    big[3], big[18] = 30.0, 0.0
    out = np.zeros(24)
    out[18] = 30.0
    with pytest.raises(DrValidationError):
        decision(shift_in=big, shift_out=out).validate(params(), BASE_E)
    with pytest.raises(DrValidationError):
        effective_loads(Profile.zeros(DA), BASE_H, decision(curtail_e=unbalanced))


def test_param_validation():
    with pytest.raises(ValueError):
        params(frac=1.5)
    with pytest.raises(ValueError):
        params(cap_e=-1.0)
    with pytest.raises(ValueError):
        DrParams(0.1, Profile.zeros(DA), Profile.zeros(DA), 1.0, 1.0, peak_steps=(3,), valley_steps=(3,))


def test_masks_follow_time_of_use_periods():
    peak, valley = params().masks()
    assert not np.any(peak & valley)
    assert peak[18] and valley[3] and not peak[3]


def test_params_round_trip():
    p = params()
    q = DrParams.from_dict(p.to_dict(), DA)
    assert q.to_dict() == p.to_dict()


def test_disabled_dr_adds_nothing():
    m = MilpModel()
    assert add_dr(m, params(), BASE_E, BASE_H, enabled=False) is None
    assert m.n_vars == 0


def test_optimizer_moves_load_from_peak_to_valley():
    # price only the effective load so the cheapest plan shifts as much as allowed
    p = params(cap_e=0.0, cap_h=0.0)
    m = MilpModel()
    v = add_dr(m, p, BASE_E, BASE_H)
    peak, valley = p.masks()
    price = np.where(peak, 1.0, 0.2)
    m.add_objective({int(x): float(c) for x, c in zip(v.shift_in, price)})
    m.add_objective({int(x): -float(c) for x, c in zip(v.shift_out, price)})
    sol = milp.solve(m)
    out, into = sol.values(v.shift_out), sol.values(v.shift_in)
    assert np.allclose(out[peak], 20.0) and not out[~peak].any()
    assert into.sum() == pytest.approx(out.sum())
    assert not into[~valley].any()
