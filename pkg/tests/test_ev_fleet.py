import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from menet.ev_fleet import (BoundsError, Cohort, EvSession, FleetSpec, SessionError, boundary_injections,
                            boundary_products, greedy_schedule, max_reachable_soc, presence, sessions_from_json,
                            sessions_to_json, soc_step, synthesize_fleet)
from menet.timegrid import TimeGrid

DA = TimeGrid.day_ahead()


def session(ta=10, tl=20, arrive=12.0, leave=18.0, **kw):
    base = dict(id="a", station_id="1", t_arrive=ta, t_leave=tl, soc_arrive=arrive, soc_leave=leave,
                soc_min=4.0, soc_max=40.0, p_ch_max=7.0, p_dis_max=7.0)
    base.update(kw)
    return EvSession(**base)


def test_presence_window():
    d = presence(session(), DA)
    assert d.tolist() == [0] * 10 + [1] * 11 + [0] * 3
    assert presence(session(0, 23), DA).tolist() == [1] * 24


def test_window_beyond_grid():
    with pytest.raises(BoundsError):
        presence(session(10, 24), DA)


def test_invalid_sessions():
    with pytest.raises(BoundsError):
        session(10, 9)
    with pytest.raises(SessionError):
        session(arrive=50.0)
    with pytest.raises(SessionError):
        session(eta_ch=1.2)


def test_boundary_products():
    arr, dep = boundary_products(presence(session(), DA))
    assert np.flatnonzero(arr).tolist() == [10]
    assert np.flatnonzero(dep).tolist() == [21]


def test_soc_step_examples():
    s = session(eta_ch=0.95)
    assert soc_step(s, 10.0, 5.0, 0.0, 1.0) == pytest.approx(14.75)
    assert soc_step(s, 10.0, 0.0, 0.0, 1.0) == 10.0
    s2 = session(eta_dis=0.9, eta_ref=1.0)
    assert soc_step(s2, 10.0, 0.0, 4.5, 1.0) == pytest.approx(5.0)
    with pytest.raises(SessionError):
        soc_step(s, 10.0, 8.0, 0.0, 1.0)


def test_boundary_injections():
    inj = boundary_injections(session(), DA).values
    assert inj[10] == 12.0 and inj[21] == -18.0
    assert np.count_nonzero(inj) == 2
    full = boundary_injections(session(0, 23), DA).values
    assert full[0] == 12.0 and np.count_nonzero(full) == 1


def test_greedy_schedule_reaches_target():
    s = session()
    p, soc = greedy_schedule(s, DA)
    assert soc[s.t_leave] == pytest.approx(s.soc_leave)
    assert p.max() <= s.p_ch_max + 1e-12
    assert max_reachable_soc(s, 1.0) == pytest.approx(min(40.0, 12.0 + 11 * 0.95 * 7.0))


def test_refined_session_covers_the_same_time():
    fine = session().refined(4)
    assert (fine.t_arrive, fine.t_leave) == (40, 83)
    assert presence(fine, TimeGrid.intra_day()).sum() == 4 * presence(session(), DA).sum()


def test_empty_fleet():
    assert synthesize_fleet(FleetSpec(n_evs=0), DA) == []


def test_fleet_is_deterministic():
    spec = FleetSpec(n_evs=12, seed=5)
    a, b = synthesize_fleet(spec, DA), synthesize_fleet(spec, DA)
    assert a == b
    assert synthesize_fleet(FleetSpec(n_evs=12, seed=6), DA) != a


def test_fifty_ev_fleet_is_valid_and_reachable():
    sessions = synthesize_fleet(FleetSpec(n_evs=50, seed=1), DA)
    assert len(sessions) == 50
    for s in sessions:
        s.check_grid(DA)
        assert s.soc_min <= s.soc_arrive <= s.soc_max
        assert s.soc_leave <= max_reachable_soc(s, DA.dt) + 1e-9
    assert len({s.id for s in sessions}) == 50


def test_fleet_spec_validation():
    with pytest.raises(ValueError):
        FleetSpec(n_evs=-1)
    with pytest.raises(ValueError):
        FleetSpec(n_evs=3, cohorts=())


def test_fleet_spec_round_trip():
    spec = FleetSpec(n_evs=3, seed=2, cohorts=(Cohort(9.0, 1.0, 2.0),))
    assert FleetSpec.from_dict(spec.to_dict()) == spec


@given(st.integers(0, 30), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_sessions_json_round_trip(n, seed):
    sessions = synthesize_fleet(FleetSpec(n_evs=n, seed=seed), DA)
    assert sessions_from_json(sessions_to_json(sessions)) == sessions
