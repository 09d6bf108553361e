"""Device parameter records and their MILP constraint generators.

The generators add one device's variables and physical constraints for ``n``
consecutive steps of length ``dt`` hours and return the variable indices.
Objective terms are left to the callers, since the day-ahead and intra-day
stages price the same devices differently.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import milp
from .milp import MilpModel
from .timegrid import ForecastModel, Profile, Unit


@dataclass(frozen=True, eq=False)
class GridTieParams:
    """Tie-line to the upstream grid.  Negative net power means export."""

    p_min: float
    p_max: float
    price_buy: Profile
    price_sell: Profile
    sigma_gird: float = 0.0

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise ValueError("grid tie: p_min exceeds p_max")
        if self.price_buy.grid != self.price_sell.grid:
            raise ValueError("grid tie: buy and sell prices on different grids")
        if np.any(self.price_sell.values > self.price_buy.values + 1e-12):
            raise ValueError("grid tie: sell price above buy price allows arbitrage")

    @property
    def buy_cap(self) -> float:
        return max(0.0, self.p_max)

    @property
    def sell_cap(self) -> float:
        return max(0.0, -self.p_min)


@dataclass(frozen=True)
class GasTurbineParams:
    p_min: float
    p_max: float
    fuel_coeffs: tuple[float, float, float, float]
    cost_up: float = 0.0
    cost_down: float = 0.0
    k_pollution: float = 0.0
    ramp_up: float = np.inf
    ramp_down: float = np.inf
    pwl_segments: int = 8

    def __post_init__(self):
        if not 0 <= self.p_min <= self.p_max:
            raise ValueError("gas turbine: need 0 <= p_min <= p_max")
        if self.ramp_up <= 0 or self.ramp_down <= 0:
            raise ValueError("gas turbine: ramp limits must be positive")
        if self.pwl_segments < 1:
            raise ValueError("gas turbine: pwl_segments must be at least 1")

    def fuel_rate(self, p):
        """Fuel cost rate (currency/h) of the cubic at output ``p``."""
        a, b, c, d = self.fuel_coeffs
        p = np.asarray(p, dtype=float)
        return ((a * p + b) * p + c) * p + d


@dataclass(frozen=True)
class BatteryParams:
    capacity: float
    p_rated: float
    soc_min: float = 0.1
    soc_max: float = 0.9
    soc_start: float = 0.5
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    k_loss: float = 0.0

    def __post_init__(self):
        if not 0 <= self.soc_min <= self.soc_start <= self.soc_max <= 1:
            raise ValueError("battery: need 0 <= soc_min <= soc_start <= soc_max <= 1")
        if self.capacity <= 0 or self.p_rated < 0:
            raise ValueError("battery: capacity must be positive and p_rated nonnegative")
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dis <= 1):
            raise ValueError("battery: efficiencies must lie in (0, 1]")

    @property
    def e_start(self) -> float:
        return self.soc_start * self.capacity


@dataclass(frozen=True)
class RenewableParams:
    n_units: int
    unit_profile: ForecastModel

    def __post_init__(self):
        if self.n_units < 0:
            raise ValueError("renewables: n_units must be nonnegative")

    def forecast_model(self) -> ForecastModel:
        """Installation-level forecast (per-unit forecast and sigma scaled by ``n_units``)."""
        u = self.unit_profile
        return ForecastModel(u.forecast.scaled(self.n_units), u.sigma.scaled(self.n_units), u.seed)


@dataclass(frozen=True)
class HeatParams:
    hp_q_max: float
    hp_cop: float = 3.0
    hs_ch_min: float = 0.0
    hs_ch_max: float = 0.0
    hs_dis_min: float = 0.0
    hs_dis_max: float = 0.0
    hs_capacity: float = 0.0
    hs_soc_start: float = 0.5
    sigma_hp: float = 0.0
    sigma_hs: float = 0.0

    def __post_init__(self):
        if not 0 <= self.hs_ch_min <= self.hs_ch_max:
            raise ValueError("heat storage: need 0 <= hs_ch_min <= hs_ch_max")
        if not 0 <= self.hs_dis_min <= self.hs_dis_max:
            raise ValueError("heat storage: need 0 <= hs_dis_min <= hs_dis_max")
        if self.hp_cop <= 0 or self.hp_q_max < 0 or self.hs_capacity < 0:
            raise ValueError("heat: cop must be positive, capacities nonnegative")
        if not 0 <= self.hs_soc_start <= 1:
            raise ValueError("heat storage: hs_soc_start must be a fraction")

    @property
    def e_start(self) -> float:
        return self.hs_soc_start * self.hs_capacity


def battery_power_caps(b: BatteryParams, soc_prev: float, dt: float = 1.0) -> tuple[float, float]:
    """Largest charge/discharge power for one step from state ``soc_prev`` (fraction).

    The discharge cap is limited by the energy above the floor, ``soc_prev - soc_min``.
    """
    p_ch = min((b.soc_max - soc_prev) * b.capacity / b.eta_ch / dt, b.p_rated)
    p_dis = min((soc_prev - b.soc_min) * b.capacity * b.eta_dis / dt, b.p_rated)
    return max(p_ch, 0.0), max(p_dis, 0.0)


def renewable_available(r: RenewableParams, realization: Profile) -> Profile:
    """Installation output for a per-unit output profile."""
    if realization.grid != r.unit_profile.grid:
        raise ValueError("realization and unit forecast grids differ")
    return realization.scaled(r.n_units)


@dataclass(frozen=True)
class PwlCurve:
    xs: np.ndarray
    ys: np.ndarray
    max_error: float

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)


def gt_fuel_pwl(g: GasTurbineParams, segments: int | None = None) -> PwlCurve:
    """Equally spaced breakpoints of the fuel cubic on ``[p_min, p_max]``.

    ``max_error`` is the largest absolute gap between cubic and interpolant on
    a fixed 4097-point sample of the interval.
    """
    k = segments or g.pwl_segments
    if not g.p_min < g.p_max:
        raise ValueError("gas turbine: fuel curve needs p_min < p_max")
    xs = np.linspace(g.p_min, g.p_max, k + 1)
    ys = g.fuel_rate(xs)
    probe = np.linspace(g.p_min, g.p_max, 4097)
    err = float(np.max(np.abs(np.interp(probe, xs, ys) - g.fuel_rate(probe))))
    return PwlCurve(xs, ys, err)


# -- constraint generators ----------------------------------------------------


@dataclass
class GridTieVars:
    buy: np.ndarray
    sell: np.ndarray
    mode: np.ndarray


def add_grid_tie(m: MilpModel, g: GridTieParams, n: int, prefix: str = "grid") -> GridTieVars:
    buy = m.add_vars(f"{prefix}_buy", n, 0.0, g.buy_cap)
    sell = m.add_vars(f"{prefix}_sell", n, 0.0, g.sell_cap)
    mode = np.array([milp.add_exclusive_pair(m, int(buy[t]), int(sell[t]), name=f"{prefix}_mode[{t}]") for t in range(n)])
    for t in range(n):
        if g.p_min > 0:
            m.add_constr({int(buy[t]): 1.0, int(sell[t]): -1.0}, ">=", g.p_min, f"{prefix}_min[{t}]")
        if g.p_max < 0:
            m.add_constr({int(buy[t]): 1.0, int(sell[t]): -1.0}, "<=", g.p_max, f"{prefix}_max[{t}]")
    return GridTieVars(buy, sell, mode)


@dataclass
class GasTurbineVars:
    p: np.ndarray
    on: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    fuel: np.ndarray | None = None


def add_gas_turbine(m: MilpModel, g: GasTurbineParams, n: int, on0: int = 0, p0: float = 0.0,
                    commitment=None, with_fuel: bool = True, prefix: str = "gt") -> GasTurbineVars:
    """Unit with on/off state, start/stop indicators, ramps and optional PWL fuel cost.

    ``on0``/``p0`` are the state before the first step.  ``commitment``
    optionally fixes the on/off pattern.  ``fuel[t]`` is the fuel cost rate
    (currency/h) at step ``t``.
    """
    p = m.add_vars(f"{prefix}_p", n, 0.0, g.p_max)
    on = m.add_vars(f"{prefix}_on", n, binary=True)
    start = m.add_vars(f"{prefix}_up", n, 0.0, 1.0)
    stop = m.add_vars(f"{prefix}_down", n, 0.0, 1.0)
    if commitment is not None:
        for t, u in enumerate(np.round(np.asarray(commitment))):
            m.fix(int(on[t]), float(u))
    for t in range(n):
        pt, ut = int(p[t]), int(on[t])
        m.add_constr({pt: 1.0, ut: -g.p_min}, ">=", 0.0, f"{prefix}_pmin[{t}]")
        m.add_constr({pt: 1.0, ut: -g.p_max}, "<=", 0.0, f"{prefix}_pmax[{t}]")
        logic = {ut: 1.0, int(start[t]): -1.0, int(stop[t]): 1.0}
        ramp = {pt: 1.0}
        if t == 0:
            m.add_constr(logic, "=", float(on0), f"{prefix}_logic[{t}]")
            rhs_prev = float(p0)
        else:
            logic[int(on[t - 1])] = -1.0
            m.add_constr(logic, "=", 0.0, f"{prefix}_logic[{t}]")
            ramp[int(p[t - 1])] = -1.0
            rhs_prev = 0.0
        m.add_constr({int(start[t]): 1.0, int(stop[t]): 1.0}, "<=", 1.0, f"{prefix}_updown[{t}]")
        if np.isfinite(g.ramp_up):
            m.add_constr(ramp, "<=", g.ramp_up + rhs_prev, f"{prefix}_rampup[{t}]")
        if np.isfinite(g.ramp_down):
            m.add_constr(ramp, ">=", -g.ramp_down + rhs_prev, f"{prefix}_rampdown[{t}]")
    fuel = None
    if with_fuel:
        if g.p_min < g.p_max:
            curve = gt_fuel_pwl(g)
            fuel = np.array([milp.add_pwl(m, int(p[t]), curve.xs, curve.ys, active=int(on[t]), name=f"{prefix}_fuel[{t}]")
                             for t in range(n)])
        else:
            # fixed-output unit: the fuel rate is constant while on
            fuel = on.copy()
    return GasTurbineVars(p, on, start, stop, fuel)


@dataclass
class StorageVars:
    ch: np.ndarray
    dis: np.ndarray
    soc: np.ndarray
    mode: np.ndarray


def add_battery(m: MilpModel, b: BatteryParams, n: int, dt: float, e0: float | None = None,
                e_end: float | None = None, prefix: str = "ess") -> StorageVars:
    """Battery with energy state in kWh; ``e_end`` pins the final state (cyclic if ``e_start``)."""
    e0 = b.e_start if e0 is None else e0
    ch = m.add_vars(f"{prefix}_ch", n, 0.0, b.p_rated)
    dis = m.add_vars(f"{prefix}_dis", n, 0.0, b.p_rated)
    soc = m.add_vars(f"{prefix}_soc", n, b.soc_min * b.capacity, b.soc_max * b.capacity)
    mode = np.array([milp.add_exclusive_pair(m, int(ch[t]), int(dis[t]), name=f"{prefix}_mode[{t}]") for t in range(n)])
    _energy_recursion(m, ch, dis, soc, b.eta_ch * dt, dt / b.eta_dis, e0, np.zeros(n), prefix)
    if e_end is not None:
        m.add_constr({int(soc[-1]): 1.0}, "=", e_end, f"{prefix}_end")
    return StorageVars(ch, dis, soc, mode)


def add_station(m: MilpModel, p_ch_max, p_dis_max, s_min, s_max, delta_s, efficiencies, dt: float,
                s0: float = 0.0, s_end: float | None = None, prefix: str = "ev") -> StorageVars:
    """Charging station as virtual storage over an envelope slice.

    Besides the stored energy after each step, the energy right after the
    arrival/departure injection (``S[t-1] + delta_s[t]``) must also lie in the
    corridor, so the SOC stays inside it throughout the step.
    """
    eta_ch, eta_dis, eta_ref = efficiencies
    n = len(delta_s)
    s_min, s_max, delta_s = (np.asarray(a, dtype=float) for a in (s_min, s_max, delta_s))
    ch = m.add_vars(f"{prefix}_ch", n, 0.0, p_ch_max)
    dis = m.add_vars(f"{prefix}_dis", n, 0.0, p_dis_max)
    soc = m.add_vars(f"{prefix}_soc", n, s_min, s_max)
    mode = np.array([milp.add_exclusive_pair(m, int(ch[t]), int(dis[t]), name=f"{prefix}_mode[{t}]") for t in range(n)])
    _energy_recursion(m, ch, dis, soc, eta_ch * dt, eta_ref * dt / eta_dis, s0, delta_s, prefix)
    for t in range(n):
        if t == 0:
            level = s0 + delta_s[0]
            if not s_min[0] - 1e-6 <= level <= s_max[0] + 1e-6:
                raise milp.ModelingError(f"{prefix}: initial state {level:.6g} outside the corridor")
            continue
        terms = {int(soc[t - 1]): 1.0}
        m.add_constr(terms, ">=", s_min[t] - delta_s[t], f"{prefix}_inj_lo[{t}]")
        m.add_constr(terms, "<=", s_max[t] - delta_s[t], f"{prefix}_inj_hi[{t}]")
    if s_end is not None:
        m.add_constr({int(soc[-1]): 1.0}, "=", s_end, f"{prefix}_end")
    return StorageVars(ch, dis, soc, mode)


@dataclass
class HeatVars:
    q_hp: np.ndarray
    hs_ch: np.ndarray
    hs_dis: np.ndarray
    hs_soc: np.ndarray
    b_ch: np.ndarray
    b_dis: np.ndarray


def add_heat(m: MilpModel, h: HeatParams, n: int, dt: float, e0: float | None = None,
             e_end: float | None = None, prefix: str = "heat") -> HeatVars:
    """Heat pump output plus lossless heat storage with semicontinuous charge/discharge."""
    e0 = h.e_start if e0 is None else e0
    q = m.add_vars(f"{prefix}_q_hp", n, 0.0, h.hp_q_max)
    ch = m.add_vars(f"{prefix}_hs_ch", n, 0.0, h.hs_ch_max)
    dis = m.add_vars(f"{prefix}_hs_dis", n, 0.0, h.hs_dis_max)
    soc = m.add_vars(f"{prefix}_hs_soc", n, 0.0, h.hs_capacity)
    b_ch = m.add_vars(f"{prefix}_b_ch", n, binary=True)
    b_dis = m.add_vars(f"{prefix}_b_dis", n, binary=True)
    for t in range(n):
        c, d, bc, bd = int(ch[t]), int(dis[t]), int(b_ch[t]), int(b_dis[t])
        m.add_constr({c: 1.0, bc: -h.hs_ch_max}, "<=", 0.0, f"{prefix}_ch_on[{t}]")
        m.add_constr({c: 1.0, bc: -h.hs_ch_min}, ">=", 0.0, f"{prefix}_ch_min[{t}]")
        m.add_constr({d: 1.0, bd: -h.hs_dis_max}, "<=", 0.0, f"{prefix}_dis_on[{t}]")
        m.add_constr({d: 1.0, bd: -h.hs_dis_min}, ">=", 0.0, f"{prefix}_dis_min[{t}]")
        m.add_constr({bc: 1.0, bd: 1.0}, "<=", 1.0, f"{prefix}_mode[{t}]")
    _energy_recursion(m, ch, dis, soc, dt, dt, e0, np.zeros(n), prefix)
    if e_end is not None:
        m.add_constr({int(soc[-1]): 1.0}, "=", e_end, f"{prefix}_end")
    return HeatVars(q, ch, dis, soc, b_ch, b_dis)


def _energy_recursion(m, ch, dis, soc, k_ch, k_dis, e0, inject, prefix):
    # soc[t] = soc[t-1] + inject[t] + k_ch ch[t] - k_dis dis[t]
    for t in range(len(soc)):
        terms = {int(soc[t]): 1.0, int(ch[t]): -k_ch, int(dis[t]): k_dis}
        if t == 0:
            m.add_constr(terms, "=", e0 + inject[0], f"{prefix}_soc[{t}]")
        else:
            terms[int(soc[t - 1])] = -1.0
            m.add_constr(terms, "=", float(inject[t]), f"{prefix}_soc[{t}]")


def params_to_dict(p) -> dict:
    """JSON-ready dict of a parameter record (profiles become value lists)."""
    out = {}
    for k, v in asdict(p).items() if not isinstance(p, GridTieParams) else vars(p).items():
        if isinstance(v, Profile):
            v = v.values.tolist()
        elif isinstance(v, tuple):
            v = list(v)
        elif isinstance(v, float) and not np.isfinite(v):
            v = None
        out[k] = v
    return out


def price_profile(grid, values) -> Profile:
    """Tariff profile from a per-step list or a single flat price."""
    if np.ndim(values) == 0:
        values = np.full(grid.n_steps, float(values))
    return Profile(grid, values, Unit.PRICE)
