"""Rolling-horizon intra-day adjustment of the day-ahead plan.

At every intra-day step a window model is solved that tracks the day-ahead
reference at minimum weighted absolute deviation, subject to the same device
constraints as the day-ahead model plus gas-turbine ramps against the last
executed output.  Only the first step(s) are executed before the window
rolls.  Renewable availability inside a window is the realized value for the
steps about to be executed and a short-horizon re-forecast for the rest.

Strategy 1 (:func:`execute_day_ahead`) executes the day-ahead plan unchanged
and buys any renewable shortfall as emergency power; strategy 2
(:func:`roll`) is the rolling controller.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import milp
from .aggregation import StationEnvelope, soc_trajectory
from .day_ahead import DispatchPlan, StationDispatch, plan_costs
from .devices import add_battery, add_gas_turbine, add_grid_tie, add_heat, add_station
from .scenario import RollingConfig, ScenarioConfig
from .timegrid import TimeGrid, rng_for, sample_realization, table_csv

logger = logging.getLogger(__name__)

SOURCES = ("pv", "wt")
_SOURCE_KEY = {"pv": 1, "wt": 2}


class WindowError(RuntimeError):
    """Raised when even the emergency window model cannot be solved."""


@dataclass(frozen=True)
class SystemState:
    """Storage and unit state at the start of intra-day step ``step``."""

    step: int
    ess_soc: float
    station_soc: tuple[float, ...]
    hs_soc: float
    gt_on: int
    p_gt_prev: float

    @classmethod
    def initial(cls, cfg: ScenarioConfig) -> "SystemState":
        return cls(0, cfg.battery.e_start, tuple(0.0 for _ in cfg.stations), cfg.heat.e_start, 0, 0.0)


# -- reference ------------------------------------------------------------------


def refine_plan(cfg: ScenarioConfig, plan: DispatchPlan, grid: TimeGrid | None = None,
                envelopes: list[StationEnvelope] | None = None) -> DispatchPlan:
    """Day-ahead plan on the intra-day grid.

    Powers are held piecewise constant; storage states are recomputed on the
    fine grid from those powers, and station states use envelopes rebuilt from
    the sessions at the fine resolution.
    """
    grid = grid or cfg.intra_day_grid
    r = plan.grid.ratio(grid)
    dt = grid.dt
    envelopes = envelopes or cfg.envelopes(grid)

    def rep(x):
        return np.repeat(np.asarray(x, dtype=float), r)

    b, h = cfg.battery, cfg.heat
    ch, dis = rep(plan.p_ess_ch), rep(plan.p_ess_dis)
    ess_soc = b.e_start + np.cumsum(b.eta_ch * ch * dt - dis * dt / b.eta_dis)
    hs_ch, hs_dis = rep(plan.h_hs_ch), rep(plan.h_hs_dis)
    hs_soc = h.e_start + np.cumsum((hs_ch - hs_dis) * dt)
    stations = []
    for env, sd in zip(envelopes, plan.stations):
        pc, pd = rep(sd.p_ch), rep(sd.p_dis)
        stations.append(StationDispatch(sd.station_id, pc, pd, soc_trajectory(env, pc, pd)))
    fine = DispatchPlan(
        grid=grid,
        p_gt=rep(plan.p_gt),
        gt_on=rep(plan.gt_on),
        p_buy=rep(plan.p_buy),
        p_sell=rep(plan.p_sell),
        p_ess_ch=ch,
        p_ess_dis=dis,
        ess_soc=ess_soc,
        stations=stations,
        p_hp=rep(plan.p_hp),
        q_hp=rep(plan.q_hp),
        h_hs_ch=hs_ch,
        h_hs_dis=hs_dis,
        hs_soc=hs_soc,
        pv_avail=rep(plan.pv_avail),
        wt_avail=rep(plan.wt_avail),
        p_pv_used=rep(plan.p_pv_used),
        p_wt_used=rep(plan.p_wt_used),
        load_e=rep(plan.load_e),
        load_h=rep(plan.load_h),
        dr=plan.dr.resampled(grid),
        reserve=None if plan.reserve is None else rep(plan.reserve),
        objective=plan.objective,
    )
    fine.costs = plan_costs(cfg, fine)
    return fine


# -- forecasts -------------------------------------------------------------------


def realized_availability(cfg: ScenarioConfig, seed: int, grid: TimeGrid | None = None) -> dict[str, np.ndarray]:
    """One seeded realization of PV and wind output on the intra-day grid."""
    grid = grid or cfg.intra_day_grid
    return {k: sample_realization(fm.on_grid(grid), seed).values for k, fm in cfg.renewable_models().items()}


def fresh_forecast(realized: dict[str, np.ndarray], k: int, n: int, n_exec: int, frac: float, seed: int) -> dict[str, np.ndarray]:
    """Window forecast: realized values for the executed steps, noisy re-forecast after them."""
    out = {}
    for src, real in realized.items():
        win = real[k:k + n].copy()
        if n > n_exec and frac > 0:
            e = rng_for(seed, _SOURCE_KEY[src], k).standard_normal(n - n_exec)
            win[n_exec:] = np.maximum(win[n_exec:] * (1.0 + frac * e), 0.0)
        out[src] = win
    return out


# -- window model -----------------------------------------------------------------


class WindowModel(milp.MilpModel):
    """One rolling window, with handles on the decision variables."""


def build_window_model(cfg: ScenarioConfig, state: SystemState, ref: DispatchPlan, fresh: dict[str, np.ndarray],
                       n: int, envelopes: list[StationEnvelope], rolling: RollingConfig | None = None,
                       emergency: bool = False) -> WindowModel:
    """Adjustment model for steps ``state.step .. state.step + n - 1``.

    Storage states at the window end are pinned to the reference so the rest
    of the reference stays reachable.  With ``emergency`` the balances and
    pins get penalized slacks (emergency purchase, spill, pin deviation).
    """
    rc = rolling or cfg.rolling
    k = state.step
    g = ref.grid
    if k + n > g.n_steps or n < 1:
        raise ValueError(f"window [{k}, {k + n}) does not fit the {g.n_steps}-step reference")
    if any(len(v) != n for v in fresh.values()):
        raise ValueError("fresh forecast length differs from the window length")
    dt = g.dt
    sl = slice(k, k + n)
    end = k + n - 1
    m = WindowModel(f"window_{k}")
    m.step, m.n = k, n

    m.gt = add_gas_turbine(m, cfg.gas_turbine, n, on0=state.gt_on, p0=state.p_gt_prev,
                           commitment=ref.gt_on[sl], with_fuel=False)
    m.tie = add_grid_tie(m, cfg.grid_tie, n)
    m.ess = add_battery(m, cfg.battery, n, dt, e0=state.ess_soc)
    m.stations = []
    for j, env in enumerate(envelopes):
        m.stations.append(add_station(
            m, env.p_ch_max.values[sl], env.p_dis_max.values[sl], env.s_min.values[sl], env.s_max.values[sl],
            env.delta_s.values[sl], env.efficiencies, dt, state.station_soc[j], prefix=f"st{env.station_id}"))
    h = cfg.heat
    m.heat = add_heat(m, h, n, dt, e0=state.hs_soc)
    m.used = {src: m.add_vars(f"{src}_used", n, 0.0, fresh[src]) for src in SOURCES}
    m.avail = fresh

    pen = rc.emergency_penalty
    m.emergency = {}
    pins = [(m.ess.soc, ref.ess_soc[end], "ess")]
    pins += [(sv.soc, sd.soc[end], f"st{sd.station_id}") for sv, sd in zip(m.stations, ref.stations)]
    pins.append((m.heat.hs_soc, ref.hs_soc[end], "hs"))
    for soc, target, name in pins:
        terms = {int(soc[-1]): 1.0}
        if emergency:
            up = m.add_var(f"{name}_pin_up", 0.0)
            dn = m.add_var(f"{name}_pin_dn", 0.0)
            terms.update({up: 1.0, dn: -1.0})
            m.add_objective({up: pen, dn: pen})
        m.add_constr(terms, "=", float(target), f"{name}_pin")
    if emergency:
        for key in ("buy", "spill", "heat_up", "heat_dn"):
            m.emergency[key] = m.add_vars(f"emergency_{key}", n, 0.0)
            m.add_objective({int(v): pen * dt for v in m.emergency[key]})

    inv_cop = 1.0 / h.hp_cop
    for t in range(n):
        bal = {
            int(m.gt.p[t]): 1.0,
            int(m.tie.buy[t]): 1.0,
            int(m.tie.sell[t]): -1.0,
            int(m.ess.dis[t]): 1.0,
            int(m.ess.ch[t]): -1.0,
            int(m.heat.q_hp[t]): -inv_cop,
            **{int(m.used[src][t]): 1.0 for src in SOURCES},
        }
        for sv in m.stations:
            bal[int(sv.dis[t])] = 1.0
            bal[int(sv.ch[t])] = -1.0
        therm = {int(m.heat.q_hp[t]): 1.0, int(m.heat.hs_dis[t]): 1.0, int(m.heat.hs_ch[t]): -1.0}
        if emergency:
            bal[int(m.emergency["buy"][t])] = 1.0
            bal[int(m.emergency["spill"][t])] = -1.0
            therm[int(m.emergency["heat_up"][t])] = 1.0
            therm[int(m.emergency["heat_dn"][t])] = -1.0
        m.add_constr(bal, "=", float(ref.load_e[k + t]), f"electric_balance[{t}]")
        m.add_constr(therm, "=", float(ref.load_h[k + t]), f"thermal_balance[{t}]")

    # adjustment costs: weighted |x - x_ref| per step
    def dev(terms, target, weight, label):
        if weight <= 0:
            return None
        a = milp.add_abs(m, terms, ref=float(target), name=label)
        m.add_objective({a: weight * dt})
        return a

    for t in range(n):
        kt = k + t
        dev({int(m.ess.ch[t]): 1.0, int(m.ess.dis[t]): -1.0}, ref.p_ess_ch[kt] - ref.p_ess_dis[kt], rc.sigma_ess, f"d_ess[{t}]")
        dev({int(m.gt.p[t]): 1.0}, ref.p_gt[kt], rc.sigma_gt, f"d_gt[{t}]")
        dev({int(m.tie.buy[t]): 1.0, int(m.tie.sell[t]): -1.0}, ref.p_grid[kt], rc.sigma_gird, f"d_grid[{t}]")
        for sv, sd in zip(m.stations, ref.stations):
            dev({int(sv.ch[t]): 1.0}, sd.p_ch[kt], rc.c_evc, f"d_{sd.station_id}_ch[{t}]")
            dev({int(sv.dis[t]): 1.0}, sd.p_dis[kt], rc.c_evc, f"d_{sd.station_id}_dis[{t}]")
        dev({int(m.heat.hs_ch[t]): 1.0, int(m.heat.hs_dis[t]): -1.0}, ref.h_hs_ch[kt] - ref.h_hs_dis[kt], h.sigma_hs, f"d_hs[{t}]")
        dev({int(m.heat.q_hp[t]): inv_cop}, ref.p_hp[kt], h.sigma_hp, f"d_hp[{t}]")
        for src in SOURCES:
            # tie-break only; not part of the reported adjustment cost
            ref_used = (ref.p_pv_used if src == "pv" else ref.p_wt_used)[kt]
            dev({int(m.used[src][t]): 1.0}, min(ref_used, fresh[src][t]), rc.tie_break, f"d_{src}[{t}]")
    return m


def adjustment_costs(cfg: ScenarioConfig, x: DispatchPlan, ref: DispatchPlan, rolling: RollingConfig | None = None):
    """Per-step electric-side and heat-side adjustment costs of ``x`` against ``ref``."""
    rc = rolling or cfg.rolling
    h = cfg.heat
    dt = x.grid.dt
    c_g = (rc.sigma_ess * np.abs((x.p_ess_ch - x.p_ess_dis) - (ref.p_ess_ch - ref.p_ess_dis))
           + rc.sigma_gt * np.abs(x.p_gt - ref.p_gt)
           + rc.sigma_gird * np.abs(x.p_grid - ref.p_grid))
    for a, b in zip(x.stations, ref.stations):
        c_g = c_g + rc.c_evc * (np.abs(a.p_ch - b.p_ch) + np.abs(a.p_dis - b.p_dis))
    c_h = (h.sigma_hs * np.abs((x.h_hs_ch - x.h_hs_dis) - (ref.h_hs_ch - ref.h_hs_dis))
           + h.sigma_hp * np.abs(x.p_hp - ref.p_hp))
    return c_g * dt, c_h * dt


# -- execution trace ------------------------------------------------------------------


@dataclass
class WindowRecord:
    step: int
    n: int
    objective: float
    emergency: bool
    nodes: int = 0


@dataclass(eq=False)
class DeviationReport:
    """Negative-deviation assessment per renewable source (shortage in kW per step)."""

    penalty_rate: float
    dt: float
    shortage: dict[str, np.ndarray] = field(repr=False)
    cost: dict[str, float]

    @property
    def total(self) -> float:
        return float(sum(self.cost.values()))

    def to_dict(self) -> dict:
        return {
            "penalty_rate": self.penalty_rate,
            "cost": {k: float(v) for k, v in self.cost.items()},
            "shortage_kwh": {k: float(v.sum() * self.dt) for k, v in self.shortage.items()},
            "total": self.total,
        }


def assess_deviation(committed: dict[str, np.ndarray], deliverable: dict[str, np.ndarray], grid: TimeGrid,
                     penalty_rate: float) -> DeviationReport:
    """Shortage ``max(0, committed - deliverable)`` and its penalty ``rate * sum(shortage) * dt``."""
    shortage, cost = {}, {}
    for src in committed:
        c = np.asarray(committed[src], dtype=float)
        d = np.asarray(deliverable[src], dtype=float)
        if c.shape != (grid.n_steps,) or d.shape != (grid.n_steps,):
            raise ValueError(f"{src}: committed and deliverable series must lie on the {grid.n_steps}-step grid")
        s = np.maximum(c - d, 0.0)
        shortage[src] = s
        cost[src] = float(penalty_rate * s.sum() * grid.dt)
    return DeviationReport(penalty_rate, grid.dt, shortage, cost)


@dataclass(eq=False)
class ExecutionTrace:
    """What was actually executed on the intra-day grid.

    ``executed`` has the plan schema with ``pv_avail``/``wt_avail`` set to the
    realized availability.  ``emergency_buy``/``emergency_spill`` are power
    balancing the network outside the scheduled devices.
    """

    strategy: str
    executed: DispatchPlan
    reference: DispatchPlan
    realized: dict[str, np.ndarray]
    committed: dict[str, np.ndarray]
    c_g: np.ndarray
    c_h: np.ndarray
    emergency_buy: np.ndarray
    emergency_spill: np.ndarray
    deviation: DeviationReport
    windows: list[WindowRecord] = field(default_factory=list)

    @property
    def grid(self) -> TimeGrid:
        return self.executed.grid

    @property
    def c_total(self) -> float:
        return float(self.c_g.sum() + self.c_h.sum())

    def electric_residual(self) -> np.ndarray:
        return self.executed.electric_residual() + self.emergency_buy - self.emergency_spill

    def columns(self) -> dict[str, np.ndarray]:
        cols = self.executed.columns()
        cols.update({
            "emergency_buy": self.emergency_buy,
            "emergency_spill": self.emergency_spill,
            "c_g": self.c_g,
            "c_h": self.c_h,
            "pv_committed": self.committed["pv"],
            "wt_committed": self.committed["wt"],
            "pv_shortage": self.deviation.shortage["pv"],
            "wt_shortage": self.deviation.shortage["wt"],
        })
        return cols

    def to_csv(self) -> str:
        return table_csv(self.grid, self.columns())

    def summary(self) -> dict:
        dt = self.grid.dt
        return {
            "strategy": self.strategy,
            "c_total": self.c_total,
            "c_g": float(self.c_g.sum()),
            "c_h": float(self.c_h.sum()),
            "emergency_buy_kwh": float(self.emergency_buy.sum() * dt),
            "emergency_spill_kwh": float(self.emergency_spill.sum() * dt),
            "emergency_windows": sum(w.emergency for w in self.windows),
            "deviation": self.deviation.to_dict(),
            "costs": self.executed.costs.to_dict(),
        }

    def ledger_json(self) -> str:
        return json.dumps({**self.summary(), "windows": [asdict(w) for w in self.windows]}, indent=1, sort_keys=True)


def roll(cfg: ScenarioConfig, plan: DispatchPlan, realization_seed: int, rolling: RollingConfig | None = None,
         backend="highs") -> ExecutionTrace:
    """Run the rolling controller over the whole intra-day grid (strategy 2)."""
    rc = rolling or cfg.rolling
    grid = cfg.intra_day_grid
    envs = cfg.envelopes(grid)
    ref = refine_plan(cfg, plan, grid, envs)
    realized = realized_availability(cfg, realization_seed, grid)
    T = grid.n_steps
    state = SystemState.initial(cfg)

    cols = {k: np.zeros(T) for k in ("p_gt", "gt_on", "p_buy", "p_sell", "p_ess_ch", "p_ess_dis", "ess_soc",
                                    "q_hp", "h_hs_ch", "h_hs_dis", "hs_soc", "pv", "wt", "e_buy", "e_spill")}
    st_cols = [{k: np.zeros(T) for k in ("ch", "dis", "soc")} for _ in envs]
    windows = []
    while state.step < T:
        k = state.step
        n = min(rc.window_steps, T - k)
        n_exec = min(rc.execute_steps, n)
        fresh = fresh_forecast(realized, k, n, n_exec, rc.intraday_sigma_fraction, realization_seed)
        m = build_window_model(cfg, state, ref, fresh, n, envs, rc)
        sol = milp.solve(m, backend)
        emergency = False
        if not sol.optimal:
            logger.warning("window at step %d infeasible; solving the emergency model", k)
            m = build_window_model(cfg, state, ref, fresh, n, envs, rc, emergency=True)
            sol = milp.solve(m, backend)
            emergency = True
            if not sol.optimal:
                raise WindowError(f"emergency window model at step {k} is {sol.status.value}")
        windows.append(WindowRecord(k, n, sol.objective, emergency, sol.nodes))
        v = sol.values
        on = np.round(v(m.gt.on))
        for t in range(n_exec):
            kt = k + t
            cols["p_gt"][kt] = v(m.gt.p)[t] * on[t]
            cols["gt_on"][kt] = on[t]
            cols["p_buy"][kt] = v(m.tie.buy)[t]
            cols["p_sell"][kt] = v(m.tie.sell)[t]
            cols["p_ess_ch"][kt] = v(m.ess.ch)[t]
            cols["p_ess_dis"][kt] = v(m.ess.dis)[t]
            cols["ess_soc"][kt] = v(m.ess.soc)[t]
            cols["q_hp"][kt] = v(m.heat.q_hp)[t]
            cols["h_hs_ch"][kt] = v(m.heat.hs_ch)[t]
            cols["h_hs_dis"][kt] = v(m.heat.hs_dis)[t]
            cols["hs_soc"][kt] = v(m.heat.hs_soc)[t]
            cols["pv"][kt] = v(m.used["pv"])[t]
            cols["wt"][kt] = v(m.used["wt"])[t]
            if emergency:
                cols["e_buy"][kt] = v(m.emergency["buy"])[t]
                cols["e_spill"][kt] = v(m.emergency["spill"])[t]
            for sc, sv in zip(st_cols, m.stations):
                sc["ch"][kt] = v(sv.ch)[t]
                sc["dis"][kt] = v(sv.dis)[t]
                sc["soc"][kt] = v(sv.soc)[t]
        last = k + n_exec - 1
        state = SystemState(
            step=k + n_exec,
            ess_soc=float(cols["ess_soc"][last]),
            station_soc=tuple(float(sc["soc"][last]) for sc in st_cols),
            hs_soc=float(cols["hs_soc"][last]),
            gt_on=int(cols["gt_on"][last]),
            p_gt_prev=float(cols["p_gt"][last]),
        )

    executed = replace(
        ref,
        p_gt=cols["p_gt"],
        gt_on=cols["gt_on"],
        p_buy=cols["p_buy"],
        p_sell=cols["p_sell"],
        p_ess_ch=cols["p_ess_ch"],
        p_ess_dis=cols["p_ess_dis"],
        ess_soc=cols["ess_soc"],
        stations=[StationDispatch(env.station_id, sc["ch"], sc["dis"], sc["soc"]) for env, sc in zip(envs, st_cols)],
        p_hp=cols["q_hp"] / cfg.heat.hp_cop,
        q_hp=cols["q_hp"],
        h_hs_ch=cols["h_hs_ch"],
        h_hs_dis=cols["h_hs_dis"],
        hs_soc=cols["hs_soc"],
        pv_avail=realized["pv"],
        wt_avail=realized["wt"],
        p_pv_used=cols["pv"],
        p_wt_used=cols["wt"],
        reserve=None,
        objective=float("nan"),
    )
    executed.costs = plan_costs(cfg, executed)
    c_g, c_h = adjustment_costs(cfg, executed, ref, rc)
    committed = {"pv": executed.p_pv_used, "wt": executed.p_wt_used}
    return ExecutionTrace(
        strategy="rolling",
        executed=executed,
        reference=ref,
        realized=realized,
        committed=committed,
        c_g=c_g,
        c_h=c_h,
        emergency_buy=cols["e_buy"],
        emergency_spill=cols["e_spill"],
        deviation=assess_deviation(committed, realized, grid, cfg.penalty_rate),
        windows=windows,
    )


def execute_day_ahead(cfg: ScenarioConfig, plan: DispatchPlan, realization_seed: int) -> ExecutionTrace:
    """Execute the day-ahead plan verbatim on the intra-day grid (strategy 1).

    Renewables deliver ``min(committed, realized)``; any shortfall is bought as
    emergency power and surplus is curtailed.
    """
    grid = cfg.intra_day_grid
    ref = refine_plan(cfg, plan, grid)
    realized = realized_availability(cfg, realization_seed, grid)
    committed = {"pv": ref.p_pv_used, "wt": ref.p_wt_used}
    delivered = {k: np.minimum(committed[k], realized[k]) for k in SOURCES}
    short = (committed["pv"] - delivered["pv"]) + (committed["wt"] - delivered["wt"])
    executed = replace(ref, pv_avail=realized["pv"], wt_avail=realized["wt"],
                       p_pv_used=delivered["pv"], p_wt_used=delivered["wt"], reserve=None)
    executed.costs = plan_costs(cfg, executed)
    zeros = np.zeros(grid.n_steps)
    return ExecutionTrace(
        strategy="day-ahead",
        executed=executed,
        reference=ref,
        realized=realized,
        committed=committed,
        c_g=zeros.copy(),
        c_h=zeros.copy(),
        emergency_buy=short,
        emergency_spill=zeros.copy(),
        deviation=assess_deviation(committed, realized, grid, cfg.penalty_rate),
    )
