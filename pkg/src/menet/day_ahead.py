"""Day-ahead cost-minimizing dispatch with a chance-constrained renewable reserve.

The model minimizes fuel, start/stop, pollution, grid exchange, battery wear,
station throughput, demand-response compensation and curtailment costs subject
to per-step electric and thermal balances.  Renewable commitments are kept
below the forecast by ``q(eta) * sigma_total(t)``, where ``q`` is the
standard-normal quantile and ``sigma_total`` combines the independent PV and
wind forecast errors, so the committed renewable power is delivered with
probability at least ``eta``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import milp
from .aggregation import StationEnvelope, StationSchedule, disaggregate
from .demand_response import DrDecision, DrVars, add_dr, dr_cost
from .devices import GasTurbineVars, GridTieVars, HeatVars, StorageVars, add_battery, add_gas_turbine, add_grid_tie, add_heat, add_station, gt_fuel_pwl
from .scenario import ScenarioConfig
from .timegrid import Profile, TimeGrid, resample, std_normal_quantile, table_csv

logger = logging.getLogger(__name__)

ELASTIC_PENALTY = 1e6


class DayAheadInfeasible(RuntimeError):
    """The day-ahead model has no feasible plan.

    Attributes:
        step: First step whose balance (or reserve) needs relaxation, if found.
        constraint: Name of that balance, e.g. ``"electric_balance"``.
        shortfalls: ``{constraint: per-step slack}`` from the diagnostic solve.
    """

    def __init__(self, message: str, step: int | None = None, constraint: str | None = None, shortfalls=None):
        super().__init__(message)
        self.step = step
        self.constraint = constraint
        self.shortfalls = shortfalls or {}


@dataclass
class CostBreakdown:
    c_g: float = 0.0
    c_pollu: float = 0.0
    c_gird: float = 0.0
    c_ess: float = 0.0
    c_evc: float = 0.0
    c_dr: float = 0.0
    c_cur: float = 0.0

    @property
    def total(self) -> float:
        return self.c_g + self.c_pollu + self.c_gird + self.c_ess + self.c_evc + self.c_dr + self.c_cur

    def to_dict(self) -> dict:
        return {**asdict(self), "total": self.total}


@dataclass(eq=False)
class StationDispatch:
    station_id: str
    p_ch: np.ndarray
    p_dis: np.ndarray
    soc: np.ndarray


@dataclass(eq=False)
class DispatchPlan:
    """Per-step setpoints of every device plus the cost breakdown.

    All power arrays are in kW (kW_th for heat), storage states in kWh.
    ``load_e``/``load_h`` are the loads after demand response.
    """

    grid: TimeGrid
    p_gt: np.ndarray
    gt_on: np.ndarray
    p_buy: np.ndarray
    p_sell: np.ndarray
    p_ess_ch: np.ndarray
    p_ess_dis: np.ndarray
    ess_soc: np.ndarray
    stations: list[StationDispatch]
    p_hp: np.ndarray
    q_hp: np.ndarray
    h_hs_ch: np.ndarray
    h_hs_dis: np.ndarray
    hs_soc: np.ndarray
    pv_avail: np.ndarray
    wt_avail: np.ndarray
    p_pv_used: np.ndarray
    p_wt_used: np.ndarray
    load_e: np.ndarray
    load_h: np.ndarray
    dr: DrDecision
    costs: CostBreakdown = field(default_factory=CostBreakdown)
    reserve: np.ndarray | None = None
    objective: float = float("nan")

    @property
    def p_curtailed(self) -> np.ndarray:
        return (self.pv_avail - self.p_pv_used) + (self.wt_avail - self.p_wt_used)

    @property
    def p_grid(self) -> np.ndarray:
        return self.p_buy - self.p_sell

    def supply(self) -> np.ndarray:
        st = sum((s.p_dis for s in self.stations), np.zeros(self.grid.n_steps))
        return self.p_gt + self.p_buy + self.p_ess_dis + st + self.p_pv_used + self.p_wt_used

    def demand(self) -> np.ndarray:
        st = sum((s.p_ch for s in self.stations), np.zeros(self.grid.n_steps))
        return self.load_e + self.p_sell + self.p_ess_ch + st + self.p_hp

    def electric_residual(self) -> np.ndarray:
        return self.supply() - self.demand()

    def thermal_residual(self) -> np.ndarray:
        return self.q_hp + self.h_hs_dis - self.h_hs_ch - self.load_h

    def supply_margin(self) -> np.ndarray:
        """Forecast renewable headroom plus balance residual: supply capability minus demand."""
        return self.electric_residual() + (self.pv_avail - self.p_pv_used) + (self.wt_avail - self.p_wt_used)

    def columns(self) -> dict[str, np.ndarray]:
        cols = {
            "p_gt": self.p_gt,
            "gt_on": self.gt_on,
            "p_buy": self.p_buy,
            "p_sell": self.p_sell,
            "p_ess_ch": self.p_ess_ch,
            "p_ess_dis": self.p_ess_dis,
            "ess_soc": self.ess_soc,
        }
        for s in self.stations:
            cols[f"st{s.station_id}_p_ch"] = s.p_ch
            cols[f"st{s.station_id}_p_dis"] = s.p_dis
            cols[f"st{s.station_id}_soc"] = s.soc
        cols.update({
            "p_hp": self.p_hp,
            "q_hp": self.q_hp,
            "h_hs_ch": self.h_hs_ch,
            "h_hs_dis": self.h_hs_dis,
            "hs_soc": self.hs_soc,
            "pv_avail": self.pv_avail,
            "p_pv_used": self.p_pv_used,
            "wt_avail": self.wt_avail,
            "p_wt_used": self.p_wt_used,
            "p_curtailed": self.p_curtailed,
            "load_e": self.load_e,
            "load_h": self.load_h,
            "dr_shift_in": self.dr.shift_in.values,
            "dr_shift_out": self.dr.shift_out.values,
            "dr_curtail_e": self.dr.curtail_e.values,
            "dr_curtail_h": self.dr.curtail_h.values,
        })
        return cols

    def to_csv(self) -> str:
        return table_csv(self.grid, self.columns())

    def cost_json(self, **extra) -> str:
        return json.dumps({**self.costs.to_dict(), "objective": self.objective, **extra}, indent=1, sort_keys=True)


class DayAheadModel(milp.MilpModel):
    """MILP of the day-ahead problem with handles on every device's variables."""

    cfg: ScenarioConfig
    envelopes: list[StationEnvelope]
    dr_enabled: bool
    gt: GasTurbineVars
    tie: GridTieVars
    ess: StorageVars
    stations: list[StorageVars]
    heat: HeatVars
    pv_used: np.ndarray
    wt_used: np.ndarray
    dr_vars: DrVars | None
    avail: dict[str, np.ndarray]
    reserve: np.ndarray
    ess_abs: np.ndarray
    slacks: dict[str, np.ndarray]


def reserve_requirement(cfg: ScenarioConfig) -> np.ndarray:
    """Per-step reserve ``q(eta) * sqrt(sigma_pv^2 + sigma_wt^2)`` (kW)."""
    fm = cfg.renewable_models()
    sigma = np.hypot(fm["pv"].sigma.values, fm["wt"].sigma.values)
    return std_normal_quantile(cfg.eta_confidence) * sigma


def build_day_ahead(cfg: ScenarioConfig, envelopes: list[StationEnvelope] | None = None,
                    dr_enabled: bool = True, elastic: bool = False) -> DayAheadModel:
    """Assemble the day-ahead MILP.

    Args:
        cfg: Scenario inputs.
        envelopes: Station envelopes on the day-ahead grid (default: built from ``cfg``).
        dr_enabled: Whether demand-response variables exist.
        elastic: Add penalized slacks to every balance and reserve row (diagnosis only).
    """
    g = cfg.day_ahead_grid
    n, dt = g.n_steps, g.dt
    if envelopes is None:
        envelopes = cfg.envelopes(g)
    for env in envelopes:
        if env.grid != g:
            raise ValueError(f"station {env.station_id}: envelope is not on the day-ahead grid")

    m = DayAheadModel(f"day_ahead_{cfg.name}{'_dr' if dr_enabled else ''}")
    m.cfg, m.envelopes, m.dr_enabled = cfg, list(envelopes), dr_enabled
    fm = cfg.renewable_models()
    m.avail = {k: f.forecast.values.copy() for k, f in fm.items()}
    m.reserve = reserve_requirement(cfg)

    gt_p = cfg.gas_turbine
    m.gt = add_gas_turbine(m, gt_p, n)
    m.tie = add_grid_tie(m, cfg.grid_tie, n)
    b = cfg.battery
    m.ess = add_battery(m, b, n, dt, e_end=b.e_start)
    m.stations = [
        add_station(m, env.p_ch_max.values, env.p_dis_max.values, env.s_min.values, env.s_max.values,
                    env.delta_s.values, env.efficiencies, dt, 0.0, env.s_final, prefix=f"st{env.station_id}")
        for env in envelopes
    ]
    h = cfg.heat
    m.heat = add_heat(m, h, n, dt, e_end=h.e_start)
    m.pv_used = m.add_vars("pv_used", n, 0.0, m.avail["pv"])
    m.wt_used = m.add_vars("wt_used", n, 0.0, m.avail["wt"])
    m.dr_vars = add_dr(m, cfg.dr, cfg.load_e, cfg.load_h, enabled=dr_enabled)

    m.slacks = {}
    if elastic:
        for k in ("electric_up", "electric_down", "thermal_up", "thermal_down", "reserve"):
            m.slacks[k] = m.add_vars(f"slack_{k}", n, 0.0, milp.INF)
            m.add_objective({int(v): ELASTIC_PENALTY for v in m.slacks[k]})

    inv_cop = 1.0 / h.hp_cop
    for t in range(n):
        bal = {
            int(m.gt.p[t]): 1.0,
            int(m.tie.buy[t]): 1.0,
            int(m.tie.sell[t]): -1.0,
            int(m.ess.dis[t]): 1.0,
            int(m.ess.ch[t]): -1.0,
            int(m.pv_used[t]): 1.0,
            int(m.wt_used[t]): 1.0,
            int(m.heat.q_hp[t]): -inv_cop,
        }
        for sv in m.stations:
            bal[int(sv.dis[t])] = 1.0
            bal[int(sv.ch[t])] = -1.0
        if m.dr_vars is not None:
            bal[int(m.dr_vars.shift_in[t])] = -1.0
            bal[int(m.dr_vars.shift_out[t])] = 1.0
            bal[int(m.dr_vars.curtail_e[t])] = 1.0
        therm = {int(m.heat.q_hp[t]): 1.0, int(m.heat.hs_dis[t]): 1.0, int(m.heat.hs_ch[t]): -1.0}
        if m.dr_vars is not None:
            therm[int(m.dr_vars.curtail_h[t])] = 1.0
        res = {int(m.pv_used[t]): 1.0, int(m.wt_used[t]): 1.0}
        if elastic:
            bal[int(m.slacks["electric_up"][t])] = 1.0
            bal[int(m.slacks["electric_down"][t])] = -1.0
            therm[int(m.slacks["thermal_up"][t])] = 1.0
            therm[int(m.slacks["thermal_down"][t])] = -1.0
            res[int(m.slacks["reserve"][t])] = -1.0
        m.add_constr(bal, "=", float(cfg.load_e[t]), f"electric_balance[{t}]")
        m.add_constr(therm, "=", float(cfg.load_h[t]), f"thermal_balance[{t}]")
        m.add_constr(res, "<=", float(m.avail["pv"][t] + m.avail["wt"][t] - m.reserve[t]), f"reserve[{t}]")

    # objective
    tie = cfg.grid_tie
    m.add_objective({int(v): dt for v in m.gt.fuel})
    m.add_objective({int(v): gt_p.cost_up for v in m.gt.start})
    m.add_objective({int(v): gt_p.cost_down for v in m.gt.stop})
    m.add_objective({int(v): gt_p.k_pollution * dt for v in m.gt.p})
    m.add_objective({int(m.tie.buy[t]): (tie.price_buy[t] + tie.sigma_gird) * dt for t in range(n)})
    m.add_objective({int(m.tie.sell[t]): -(tie.price_sell[t] - tie.sigma_gird) * dt for t in range(n)})
    m.ess_abs = np.array([milp.add_abs(m, {int(m.ess.ch[t]): 1.0, int(m.ess.dis[t]): -1.0}, name=f"ess_abs[{t}]") for t in range(n)])
    m.add_objective({int(v): b.k_loss * dt for v in m.ess_abs})
    c_evc = cfg.prices.c_evc
    for sv in m.stations:
        m.add_objective({int(v): c_evc * dt for v in np.concatenate([sv.ch, sv.dis])})
    if m.dr_vars is not None:
        m.add_objective({int(v): cfg.dr.lambda_e * dt for v in m.dr_vars.curtail_e})
        m.add_objective({int(v): cfg.dr.lambda_h * dt for v in m.dr_vars.curtail_h})
    lam = cfg.prices.lambda_cur
    m.add_objective({int(v): -lam * dt for v in np.concatenate([m.pv_used, m.wt_used])},
                    constant=lam * dt * float(m.avail["pv"].sum() + m.avail["wt"].sum()))
    return m


def solve_day_ahead(model: DayAheadModel, backend="highs", check_tol: float = 1e-5) -> DispatchPlan:
    """Solve and decode; costs are recomputed from the primal values.

    Raises:
        DayAheadInfeasible: with the first step needing relaxation in an
            elastic re-solve.
    """
    sol = milp.solve(model, backend)
    if not sol.optimal:
        raise diagnose_infeasible(model.cfg, model.envelopes, model.dr_enabled, backend)
    plan = decode_plan(model, sol)
    gap = abs(plan.costs.total - plan.objective)
    if gap > check_tol * max(1.0, abs(plan.objective)):
        logger.warning("recomputed cost %.6f differs from the solver objective %.6f", plan.costs.total, plan.objective)
    return plan


def diagnose_infeasible(cfg, envelopes, dr_enabled, backend="highs") -> DayAheadInfeasible:
    em = build_day_ahead(cfg, envelopes, dr_enabled, elastic=True)
    sol = milp.solve(em, backend)
    if not sol.optimal:
        return DayAheadInfeasible("day-ahead model is infeasible even with relaxed balances (device limits conflict)")
    shortfalls = {k: sol.values(v) for k, v in em.slacks.items()}
    first = None
    for t in range(cfg.day_ahead_grid.n_steps):
        for k, s in shortfalls.items():
            if s[t] > 1e-6:
                first = (t, k)
                break
        if first:
            break
    if first is None:
        return DayAheadInfeasible("day-ahead model reported infeasible but the elastic model needs no relaxation", shortfalls=shortfalls)
    t, k = first
    name = {"electric_up": "electric_balance", "electric_down": "electric_balance",
            "thermal_up": "thermal_balance", "thermal_down": "thermal_balance"}.get(k, "reserve")
    return DayAheadInfeasible(
        f"day-ahead infeasible: {name} at step {t} short by {shortfalls[k][t]:.3f} kW", t, name, shortfalls
    )


def decode_plan(m: DayAheadModel, sol: milp.Solution) -> DispatchPlan:
    cfg = m.cfg
    g = cfg.day_ahead_grid
    v = sol.values
    on = np.round(v(m.gt.on))
    p_gt = v(m.gt.p) * on
    if m.dr_vars is not None:
        dr = DrDecision(*(Profile(g, np.maximum(v(getattr(m.dr_vars, k)), 0.0)) for k in ("shift_in", "shift_out", "curtail_e", "curtail_h")))
    else:
        dr = DrDecision.zero(g)
    load_e = cfg.load_e.values - dr.shift_out.values + dr.shift_in.values - dr.curtail_e.values
    load_h = cfg.load_h.values - dr.curtail_h.values
    q_hp = v(m.heat.q_hp)
    plan = DispatchPlan(
        grid=g,
        p_gt=p_gt,
        gt_on=on,
        p_buy=v(m.tie.buy),
        p_sell=v(m.tie.sell),
        p_ess_ch=v(m.ess.ch),
        p_ess_dis=v(m.ess.dis),
        ess_soc=v(m.ess.soc),
        stations=[StationDispatch(env.station_id, v(sv.ch), v(sv.dis), v(sv.soc)) for env, sv in zip(m.envelopes, m.stations)],
        p_hp=q_hp / cfg.heat.hp_cop,
        q_hp=q_hp,
        h_hs_ch=v(m.heat.hs_ch),
        h_hs_dis=v(m.heat.hs_dis),
        hs_soc=v(m.heat.hs_soc),
        pv_avail=m.avail["pv"],
        wt_avail=m.avail["wt"],
        p_pv_used=v(m.pv_used),
        p_wt_used=v(m.wt_used),
        load_e=load_e,
        load_h=load_h,
        dr=dr,
        reserve=m.reserve,
        objective=sol.objective,
    )
    plan.costs = plan_costs(cfg, plan, starts=v(m.gt.start), stops=v(m.gt.stop))
    return plan


def plan_costs(cfg: ScenarioConfig, plan: DispatchPlan, starts=None, stops=None) -> CostBreakdown:
    """Cost breakdown recomputed from setpoints (fuel through the PWL interpolant)."""
    dt = plan.grid.dt
    gt = cfg.gas_turbine
    on = plan.gt_on
    if starts is None or stops is None:
        prev = np.concatenate([[0.0], on[:-1]])
        starts, stops = np.maximum(on - prev, 0), np.maximum(prev - on, 0)
    if gt.p_min < gt.p_max:
        fuel = gt_fuel_pwl(gt)(plan.p_gt)
    else:
        fuel = np.full(plan.grid.n_steps, float(gt.fuel_rate(gt.p_min)))
    tie = cfg.grid_tie
    buy_price = _on_grid(tie.price_buy, plan.grid)
    sell_price = _on_grid(tie.price_sell, plan.grid)
    st_through = sum((s.p_ch.sum() + s.p_dis.sum() for s in plan.stations), 0.0)
    return CostBreakdown(
        c_g=float((fuel * on).sum() * dt + gt.cost_up * np.sum(starts) + gt.cost_down * np.sum(stops)),
        c_pollu=float(gt.k_pollution * plan.p_gt.sum() * dt),
        c_gird=float((((buy_price + tie.sigma_gird) * plan.p_buy) - (sell_price - tie.sigma_gird) * plan.p_sell).sum() * dt),
        c_ess=float(cfg.battery.k_loss * np.abs(plan.p_ess_ch - plan.p_ess_dis).sum() * dt),
        c_evc=float(cfg.prices.c_evc * st_through * dt),
        c_dr=dr_cost(plan.dr, cfg.dr),
        c_cur=float(cfg.prices.lambda_cur * plan.p_curtailed.sum() * dt),
    )


def _on_grid(p: Profile, grid: TimeGrid) -> np.ndarray:
    return resample(p, grid).values


def peak_valley_metric(load) -> tuple[float, float, float]:
    """``(peak, valley, peak - valley)`` of a profile or array."""
    x = np.asarray(load, dtype=float)
    if x.size == 0:
        raise ValueError("peak-valley metric of an empty profile")
    return float(x.max()), float(x.min()), float(x.max() - x.min())


@dataclass
class RepairLog:
    iterations: int = 0
    repaired: bool = True
    decomposable: dict[str, bool] = field(default_factory=dict)
    gaps: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def solve_with_repair(cfg: ScenarioConfig, dr_enabled: bool = True, backend="highs", max_iter: int = 3):
    """Solve the day-ahead problem and check that station schedules split over vehicles.

    After each solve every station schedule is disaggregated.  A station whose
    schedule cannot be split gets its SOC ceiling lowered by the detected gap
    and the model is re-solved, at most ``max_iter`` times.  If the stations
    are still not decomposable afterwards, the untightened plan is returned
    (tightening that does not succeed only adds cost) and ``log.repaired`` is
    False.

    Returns:
        ``(plan, log)``.
    """
    envs = cfg.envelopes()
    sessions = cfg.sessions
    log = RepairLog()
    first = None
    for it in range(max_iter + 1):
        plan = solve_day_ahead(build_day_ahead(cfg, envs, dr_enabled), backend)
        first = first or plan
        log.iterations = it
        bad = []
        for k, (env, sd) in enumerate(zip(envs, plan.stations)):
            sch = StationSchedule.from_power(env, sd.p_ch, sd.p_dis)
            d = disaggregate(env, sch, sessions[env.station_id])
            log.decomposable[env.station_id] = d.decomposable
            log.gaps[env.station_id] = float(np.max(d.gap, initial=0.0))
            if not d.decomposable:
                bad.append((k, d.gap))
        if not bad:
            return plan, log
        for k, gap in bad:
            env = envs[k]
            envs[k] = env.with_s_max(env.s_max.values - np.where(gap > 1e-6, gap * env.grid.dt, 0.0))
    log.repaired = False
    logger.info("station schedules not decomposable after %d repairs; keeping the untightened plan", max_iter)
    return first, log
