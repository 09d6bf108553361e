import json

import numpy as np
import pytest
from conftest import toy_doc
from oracles import normal_quantile_bisect

from menet.day_ahead import (DayAheadInfeasible, build_day_ahead, peak_valley_metric, plan_costs, reserve_requirement,
                             solve_day_ahead)
from menet.scenario import ScenarioConfig


def test_grid_only_toy_matches_hand_calculation():
    cfg = ScenarioConfig.from_dict(toy_doc())
    plan = solve_day_ahead(build_day_ahead(cfg, dr_enabled=False))
    # every kWh is bought at 0.5 plus the 0.02 exchange charge
    assert np.allclose(plan.p_buy, 100.0, atol=1e-6)
    assert not plan.gt_on.any()
    assert plan.objective == pytest.approx(24 * 100.0 * 0.52, rel=1e-9)
    assert plan.costs.c_gird == pytest.approx(plan.objective, rel=1e-9)


def test_infeasible_step_is_named():
    d = toy_doc()
    d["loads"]["electric"][7] = 5000.0
    cfg = ScenarioConfig.from_dict(d)
    with pytest.raises(DayAheadInfeasible) as info:
        solve_day_ahead(build_day_ahead(cfg, dr_enabled=False))
    assert info.value.step == 7
    assert info.value.constraint == "electric_balance"
    assert "step 7" in str(info.value)


def test_reserve_requirement_matches_independent_quantile(baseline):
    q = normal_quantile_bisect(baseline.eta_confidence)
    sig = [r.n_units * r.unit_profile.sigma.values for r in (baseline.pv, baseline.wt)]
    assert np.allclose(reserve_requirement(baseline), q * np.sqrt(sig[0] ** 2 + sig[1] ** 2), rtol=1e-9)


def test_plan_respects_the_reserve_and_balances(plans):
    for plan, _ in plans.values():
        used = plan.p_pv_used + plan.p_wt_used
        assert np.all(used <= plan.pv_avail + plan.wt_avail - plan.reserve + 1e-6)
        assert np.max(np.abs(plan.electric_residual())) < 1e-6
        assert np.max(np.abs(plan.thermal_residual())) < 1e-6


def test_recomputed_costs_match_the_objective(baseline, plans):
    for plan, _ in plans.values():
        assert plan.costs.total == pytest.approx(plan.objective, rel=1e-6)
        # recomputing with starts derived from the commitment gives the same total
        assert plan_costs(baseline, plan).total == pytest.approx(plan.costs.total, rel=1e-9)


def test_demand_response_never_raises_the_optimal_cost(plans):
    assert plans[2][0].objective <= plans[1][0].objective + 1e-6
    assert not plans[1][0].dr.curtail_e.values.any()


def test_shifted_load_stays_energy_neutral(plans):
    plan = plans[2][0]
    moved = plan.dr.shift_in.values.sum() - plan.dr.shift_out.values.sum()
    assert abs(moved) < 1e-6
    plan.dr.validate()


def test_station_soc_ends_at_the_final_energy(baseline, plans):
    for env, sd in zip(baseline.envelopes(), plans[2][0].stations):
        assert sd.soc[-1] == pytest.approx(env.s_final, abs=1e-6)
        assert np.all(sd.soc >= env.s_min.values - 1e-6) and np.all(sd.soc <= env.s_max.values + 1e-6)


def test_plan_csv_shape(plans):
    plan = plans[2][0]
    lines = [ln for ln in plan.to_csv().split("\r\n") if ln]
    header = lines[0].split(",")
    assert len(lines) == 25
    assert header[:3] == ["step", "hour", "p_gt"]
    assert {f"st{s.station_id}_soc" for s in plan.stations} <= set(header)
    assert all(len(ln.split(",")) == len(header) for ln in lines)
    costs = json.loads(plan.cost_json())
    assert costs["total"] == pytest.approx(plan.costs.total)


def test_peak_valley_metric():
    assert peak_valley_metric([3.0, 9.0, 1.0]) == (9.0, 1.0, 8.0)
    with pytest.raises(ValueError):
        peak_valley_metric([])
