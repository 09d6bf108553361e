import json

import numpy as np
import pytest

from menet.day_ahead import solve_with_repair
from menet.intraday import execute_day_ahead, roll
from menet.scenario import baseline_text, load_baseline

SEED = 42

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def toy_doc(load=100.0):
    """Grid-only toy: no renewables, no stations, no heat demand, an expensive turbine."""
    d = json.loads(baseline_text())
    d["stations"] = []
    for k in ("pv", "wt"):
        d["renewables"][k]["n_units"] = 0
    d["loads"]["electric"] = [load] * 24
    d["loads"]["heat"] = [0.0] * 24
    d["devices"]["grid"]["price_buy"] = [0.5] * 24
    d["devices"]["gas_turbine"]["fuel_coeffs"] = [0.0, 0.0, 10.0, 100.0]
    return d


@pytest.fixture(scope="session")
def baseline():
    return load_baseline()


@pytest.fixture(scope="session")
def plans(baseline):
    """Scenario 1 (no demand response) and scenario 2 plans with repair logs."""
    return {sc: solve_with_repair(baseline, dr_enabled=sc == 2) for sc in (1, 2)}


@pytest.fixture(scope="session")
def rolling_trace(baseline, plans):
    return roll(baseline, plans[2][0], SEED)


@pytest.fixture(scope="session")
def verbatim_trace(baseline, plans):
    return execute_day_ahead(baseline, plans[2][0], SEED)


@pytest.fixture(scope="session")
def zero_error(baseline):
    cfg = baseline.with_zero_error()
    plan, _ = solve_with_repair(cfg)
    return cfg, plan, roll(cfg, plan, SEED)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
