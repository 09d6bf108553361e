import numpy as np
import pytest
from oracles import greedy_ramp_projection

from menet import milp
from menet.devices import (BatteryParams, GasTurbineParams, GridTieParams, HeatParams, RenewableParams, add_battery,
                           add_gas_turbine, add_grid_tie, add_heat, add_station, battery_power_caps, gt_fuel_pwl,
                           price_profile, renewable_available)
from menet.milp import MilpModel, ModelingError
from menet.timegrid import ForecastModel, Profile, TimeGrid

DA = TimeGrid.day_ahead()


def test_battery_caps_at_bounds():
    b = BatteryParams(100.0, 50.0, soc_min=0.1, soc_max=0.9)
    assert battery_power_caps(b, 0.9)[0] == 0.0
    assert battery_power_caps(b, 0.1)[1] == 0.0


def test_battery_charge_cap_example():
    b = BatteryParams(100.0, 50.0, soc_max=0.9, eta_ch=0.95)
    p_ch, _ = battery_power_caps(b, 0.5, 1.0)
    assert p_ch == pytest.approx(40.0 / 0.95)
    assert round(p_ch, 3) == 42.105


def test_battery_discharge_cap_uses_energy_above_floor():
    b = BatteryParams(100.0, 50.0, soc_min=0.1, eta_dis=0.9)
    assert battery_power_caps(b, 0.3)[1] == pytest.approx(20.0 * 0.9)


def test_renewable_scaling():
    unit = Profile.constant(DA, 3.0)
    r = RenewableParams(10, ForecastModel(unit, Profile.zeros(DA)))
    assert np.allclose(renewable_available(r, unit).values, 30.0)
    assert not renewable_available(RenewableParams(0, r.unit_profile), unit).values.any()
    assert np.array_equal(r.forecast_model().forecast.values, np.full(24, 30.0))


def test_affine_fuel_curve_is_exact():
    g = GasTurbineParams(10.0, 100.0, (0.0, 0.0, 2.0, 5.0))
    for k in (1, 3, 8):
        c = gt_fuel_pwl(g, k)
        assert c.max_error < 1e-12
        assert np.allclose(c(np.array([10.0, 37.3, 100.0])), 2 * np.array([10.0, 37.3, 100.0]) + 5)


def test_fuel_breakpoints_match_the_cubic():
    g = GasTurbineParams(30.0, 300.0, (1e-6, 0.0, 0.08, 3.0), pwl_segments=8)
    c = gt_fuel_pwl(g)
    assert len(c.xs) == 9
    direct = 1e-6 * c.xs ** 3 + 0.08 * c.xs + 3.0
    assert np.max(np.abs(c.ys - direct)) < 1e-12


def test_refining_the_fuel_curve_never_hurts():
    g = GasTurbineParams(30.0, 300.0, (1e-6, 1e-4, 0.08, 3.0))
    errs = [gt_fuel_pwl(g, k).max_error for k in (1, 2, 4, 8, 16, 32)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_parameter_validation():
    with pytest.raises(ValueError):
        GasTurbineParams(50.0, 10.0, (0, 0, 1, 0))
    with pytest.raises(ValueError):
        BatteryParams(100.0, 10.0, soc_min=0.5, soc_start=0.2)
    with pytest.raises(ValueError):
        GridTieParams(0.0, 10.0, Profile.constant(DA, 0.3), Profile.constant(DA, 0.5))
    with pytest.raises(ValueError):
        HeatParams(100.0, hs_ch_min=5.0, hs_ch_max=1.0)


def _storage_model(n=6):
    b = BatteryParams(100.0, 30.0, k_loss=0.01)
    m = MilpModel()
    sv = add_battery(m, b, n, 1.0, e_end=b.e_start)
    return b, m, sv


def test_battery_trajectory_is_cyclic_and_in_bounds():
    b, m, sv = _storage_model()
    # buy low, sell high: price pattern forces cycling
    price = np.array([1.0, 1.0, 1.0, 5.0, 5.0, 5.0])
    m.add_objective({int(v): float(p) for v, p in zip(sv.ch, price)})
    m.add_objective({int(v): -float(p) for v, p in zip(sv.dis, price)})
    sol = milp.solve(m)
    soc = sol.values(sv.soc)
    assert soc.min() >= 10.0 - 1e-9 and soc.max() <= 90.0 + 1e-9
    assert soc[-1] == pytest.approx(b.e_start, abs=1e-6)
    ch, dis = sol.values(sv.ch), sol.values(sv.dis)
    assert np.max(ch * dis) <= 1e-9
    rec = b.e_start + np.cumsum(b.eta_ch * ch - dis / b.eta_dis)
    assert np.allclose(rec, soc, atol=1e-7)


def test_grid_tie_exclusivity_and_caps():
    g = GridTieParams(-20.0, 50.0, Profile.constant(DA, 1.0), Profile.constant(DA, 0.5))
    m = MilpModel()
    tv = add_grid_tie(m, g, 3)
    m.add_objective({int(v): -1.0 for v in np.concatenate([tv.buy, tv.sell])})
    sol = milp.solve(m)
    buy, sell = sol.values(tv.buy), sol.values(tv.sell)
    assert np.max(buy * sell) == 0.0
    assert buy.max() <= 50.0 and sell.max() <= 20.0


def _gt(ramp=40.0):
    return GasTurbineParams(20.0, 100.0, (0.0, 0.0, 1.0, 0.0), ramp_up=ramp, ramp_down=ramp)


def test_gas_turbine_ramp_from_initial_state():
    g = _gt()
    m = MilpModel()
    gv = add_gas_turbine(m, g, 4, with_fuel=False)
    m.add_objective({int(v): -1.0 for v in gv.p})
    sol = milp.solve(m)
    assert np.allclose(sol.values(gv.p), [40.0, 80.0, 100.0, 100.0])
    assert sol.values(gv.start).sum() == pytest.approx(1.0)


def test_gas_turbine_min_output_when_on_and_commitment():
    g = _gt(ramp=200.0)
    m = MilpModel()
    gv = add_gas_turbine(m, g, 3, commitment=[0, 1, 1], with_fuel=False)
    m.add_objective({int(v): 1.0 for v in gv.p})
    sol = milp.solve(m)
    assert np.allclose(sol.values(gv.p), [0.0, 20.0, 20.0])
    assert np.allclose(sol.values(gv.on), [0, 1, 1])


def _track(target, ramp, p0):
    g = _gt(ramp=ramp)
    m = MilpModel()
    n = len(target)
    gv = add_gas_turbine(m, g, n, on0=1, p0=p0, commitment=[1] * n, with_fuel=False)
    for t, x in enumerate(target):
        a = milp.add_abs(m, {int(gv.p[t]): 1.0}, ref=float(x))
        m.add_objective({a: 1.0})
    sol = milp.solve(m)
    return sol.values(gv.p), sol.objective


def test_gas_turbine_ramp_spreads_a_jump():
    target = np.full(5, 90.0)
    p, _ = _track(target, 15.0, 20.0)
    assert np.all(np.abs(np.diff(np.concatenate([[20.0], p]))) <= 15.0 + 1e-9)
    # a target above the fastest ramp makes the step-by-step projection the unique optimum
    assert np.allclose(p, greedy_ramp_projection(target, 20.0, 15.0, 15.0), atol=1e-6)


def test_ramp_tracking_beats_the_greedy_projection_on_reversals():
    target = np.array([20.0, 90.0, 90.0, 30.0, 30.0])
    p, cost = _track(target, 15.0, 20.0)
    greedy = greedy_ramp_projection(target, 20.0, 15.0, 15.0)
    assert np.all(np.abs(np.diff(np.concatenate([[20.0], p]))) <= 15.0 + 1e-9)
    assert cost <= np.abs(greedy - target).sum() + 1e-9


def test_gas_turbine_fuel_cost_follows_the_pwl():
    g = GasTurbineParams(20.0, 100.0, (1e-4, 0.0, 1.0, 4.0), pwl_segments=4)
    m = MilpModel()
    gv = add_gas_turbine(m, g, 1, commitment=[1])
    m.fix(int(gv.p[0]), 55.0)
    m.add_objective({int(gv.fuel[0]): 1.0})
    sol = milp.solve(m)
    assert sol.value(int(gv.fuel[0])) == pytest.approx(float(gt_fuel_pwl(g)(55.0)))


def test_station_rejects_an_initial_state_outside_the_corridor():
    m = MilpModel()
    with pytest.raises(ModelingError):
        add_station(m, [5.0], [5.0], [10.0], [20.0], [30.0], (1.0, 1.0, 1.0), 1.0)


def test_station_post_injection_bound():
    # arrival at step 1 injects 10 kWh; the corridor ceiling is 15, so S[0] <= 5
    m = MilpModel()
    sv = add_station(m, [10.0, 10.0], [10.0, 10.0], [0.0, 0.0], [40.0, 15.0], [0.0, 10.0], (1.0, 1.0, 1.0), 1.0)
    m.add_objective({int(sv.ch[0]): -1.0})
    sol = milp.solve(m)
    assert sol.value(int(sv.ch[0])) == pytest.approx(5.0)


def test_heat_storage_semicontinuous():
    h = HeatParams(100.0, 3.0, hs_ch_min=10.0, hs_ch_max=40.0, hs_dis_min=10.0, hs_dis_max=40.0, hs_capacity=80.0)
    m = MilpModel()
    hv = add_heat(m, h, 4, 1.0, e_end=h.e_start)
    m.add_constr({int(hv.hs_ch[0]): 1.0}, ">=", 1.0)
    m.add_objective({int(v): 1.0 for v in np.concatenate([hv.hs_ch, hv.hs_dis])})
    sol = milp.solve(m)
    ch, dis = sol.values(hv.hs_ch), sol.values(hv.hs_dis)
    assert ch[0] == pytest.approx(10.0)
    assert dis.sum() == pytest.approx(10.0)
    assert np.max(ch * dis) == 0.0
    for x in np.concatenate([ch, dis]):
        assert x == pytest.approx(0.0, abs=1e-9) or x >= 10.0 - 1e-9


def test_flat_price_expands_to_the_grid():
    assert np.array_equal(price_profile(DA, 0.5).values, np.full(24, 0.5))
    assert price_profile(DA, list(range(24)))[23] == 23.0
