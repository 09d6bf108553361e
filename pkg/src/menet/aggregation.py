"""Charging-station virtual storage built by summing per-vehicle constraint sets.

Each vehicle contributes power caps and an SOC corridor on the steps it is
connected, plus fixed arrival/departure energy injections.  Adding these
profiles across vehicles gives the station envelope (its dispatchable
potential), which the schedulers treat as one storage unit:

    0 <= p_ch[t] <= p_ch_max[t],   0 <= p_dis[t] <= p_dis_max[t]
    S[t] = S[t-1] + delta_s[t] + eta_ch p_ch[t] dt - eta_ref p_dis[t] dt / eta_dis
    s_min[t] <= S[t] <= s_max[t]

with ``S[-1] = 0``.  The summed set is an outer approximation of the true
Minkowski sum when windows differ, so :func:`disaggregate` checks whether an
aggregate schedule can actually be split across the vehicles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import milp
from .ev_fleet import EvSession, boundary_injections, presence
from .timegrid import Profile, TimeGrid, Unit, table_csv


class AggregationError(ValueError):
    """Raised when sessions cannot share one station envelope."""


@dataclass(frozen=True, eq=False)
class StationEnvelope:
    """Dispatchable potential of one station.

    ``s_final`` is the energy that vehicles still connected at the horizon
    end take with them; the schedulers require ``S[T-1] == s_final`` so the
    station returns to its empty starting state once they leave.
    """

    station_id: str
    grid: TimeGrid
    p_ch_max: Profile
    p_dis_max: Profile
    s_min: Profile
    s_max: Profile
    delta_s: Profile
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    eta_ref: float = 1.0
    s_final: float = 0.0

    def __post_init__(self):
        if np.any(self.s_min.values > self.s_max.values + 1e-9):
            raise AggregationError(f"station {self.station_id}: s_min exceeds s_max")
        if np.any(self.p_ch_max.values < 0) or np.any(self.p_dis_max.values < 0):
            raise AggregationError(f"station {self.station_id}: negative power cap")

    @property
    def efficiencies(self) -> tuple[float, float, float]:
        return (self.eta_ch, self.eta_dis, self.eta_ref)

    @property
    def discharge_factor(self) -> float:
        """SOC drop per kWh discharged (``eta_ref / eta_dis``)."""
        return self.eta_ref / self.eta_dis

    def __add__(self, other: "StationEnvelope") -> "StationEnvelope":
        if self.grid != other.grid:
            raise AggregationError("envelopes live on different grids")
        if not np.allclose(self.efficiencies, other.efficiencies):
            raise AggregationError("envelopes have different efficiencies")
        return StationEnvelope(
            self.station_id,
            self.grid,
            self.p_ch_max + other.p_ch_max,
            self.p_dis_max + other.p_dis_max,
            self.s_min + other.s_min,
            self.s_max + other.s_max,
            self.delta_s + other.delta_s,
            *self.efficiencies,
            s_final=self.s_final + other.s_final,
        )

    def profiles_equal(self, other: "StationEnvelope") -> bool:
        return all(
            getattr(self, k) == getattr(other, k)
            for k in ("p_ch_max", "p_dis_max", "s_min", "s_max", "delta_s")
        ) and self.s_final == other.s_final

    def with_s_max(self, s_max: np.ndarray) -> "StationEnvelope":
        s_max = np.maximum(np.asarray(s_max, dtype=float), self.s_min.values)
        return StationEnvelope(
            self.station_id, self.grid, self.p_ch_max, self.p_dis_max, self.s_min,
            Profile(self.grid, s_max, Unit.KWH), self.delta_s, *self.efficiencies, s_final=self.s_final,
        )

    def to_dict(self) -> dict:
        return {
            "station_id": self.station_id,
            "grid": self.grid.to_dict(),
            "p_ch_max": self.p_ch_max.values.tolist(),
            "p_dis_max": self.p_dis_max.values.tolist(),
            "s_min": self.s_min.values.tolist(),
            "s_max": self.s_max.values.tolist(),
            "delta_s": self.delta_s.values.tolist(),
            "eta_ch": self.eta_ch,
            "eta_dis": self.eta_dis,
            "eta_ref": self.eta_ref,
            "s_final": self.s_final,
        }

    def to_csv(self) -> str:
        keys = ("p_ch_max", "p_dis_max", "s_min", "s_max", "delta_s")
        units = ("kw", "kw", "kwh", "kwh", "kwh")
        return table_csv(self.grid, {f"{k}_{u}": getattr(self, k).values for k, u in zip(keys, units)})


@dataclass(frozen=True, eq=False)
class StationSchedule:
    p_ch: Profile
    p_dis: Profile
    soc: Profile

    @classmethod
    def from_power(cls, env: StationEnvelope, p_ch, p_dis) -> "StationSchedule":
        """Build a schedule whose SOC follows the envelope recursion exactly."""
        g = env.grid
        soc = soc_trajectory(env, p_ch, p_dis)
        return cls(Profile(g, p_ch), Profile(g, p_dis), Profile(g, soc, Unit.KWH))


def soc_trajectory(env: StationEnvelope, p_ch, p_dis, s0: float = 0.0) -> np.ndarray:
    dt = env.grid.dt
    net = env.delta_s.values + env.eta_ch * np.asarray(p_ch, float) * dt - env.discharge_factor * np.asarray(p_dis, float) * dt
    return s0 + np.cumsum(net)


def aggregate(sessions: Sequence[EvSession], grid: TimeGrid, station_id: str | None = None,
              efficiencies: tuple[float, float, float] | None = None) -> StationEnvelope:
    """Sum per-session bounds and injections into a station envelope.

    Raises:
        AggregationError: if sessions carry different efficiencies.
    """
    effs = {s.efficiencies for s in sessions}
    if len(effs) > 1:
        raise AggregationError(f"sessions of one station must share efficiencies, got {sorted(effs)}")
    if effs:
        eta = effs.pop()
    else:
        eta = efficiencies or (0.95, 0.95, 1.0)
    if station_id is None:
        station_id = sessions[0].station_id if sessions else ""
    n = grid.n_steps
    p_ch = np.zeros(n)
    p_dis = np.zeros(n)
    s_min = np.zeros(n)
    s_max = np.zeros(n)
    delta = np.zeros(n)
    s_final = 0.0
    for s in sessions:
        d = presence(s, grid)
        p_ch += s.p_ch_max * d
        p_dis += s.p_dis_max * d
        s_min += s.soc_min * d
        s_max += s.soc_max * d
        delta += boundary_injections(s, grid).values
        if s.t_leave == n - 1:
            s_final += s.soc_leave
    return StationEnvelope(
        station_id,
        grid,
        Profile(grid, p_ch),
        Profile(grid, p_dis),
        Profile(grid, s_min, Unit.KWH),
        Profile(grid, s_max, Unit.KWH),
        Profile(grid, delta, Unit.KWH),
        *eta,
        s_final=s_final,
    )


@dataclass(frozen=True)
class Violation:
    step: int
    constraint: str
    residual: float


def validate_schedule(env: StationEnvelope, sch: StationSchedule, tol: float = 1e-6) -> list[Violation]:
    """Check a schedule against the envelope; an empty list means feasible."""
    if sch.p_ch.grid != env.grid or sch.p_dis.grid != env.grid or sch.soc.grid != env.grid:
        raise AggregationError("schedule and envelope grids differ")
    dt = env.grid.dt
    out: list[Violation] = []
    ch, dis, soc = sch.p_ch.values, sch.p_dis.values, sch.soc.values
    prev = np.concatenate([[0.0], soc[:-1]])
    recursion = soc - (prev + env.delta_s.values + env.eta_ch * ch * dt - env.discharge_factor * dis * dt)
    for t in range(env.grid.n_steps):
        checks = (
            ("p_ch_range", max(-ch[t], ch[t] - env.p_ch_max[t])),
            ("p_dis_range", max(-dis[t], dis[t] - env.p_dis_max[t])),
            ("soc_recursion", abs(recursion[t])),
            ("soc_corridor", max(env.s_min[t] - soc[t], soc[t] - env.s_max[t])),
        )
        out.extend(Violation(t, name, float(r)) for name, r in checks if r > tol)
    return out


@dataclass
class Disaggregation:
    """Per-session split of an aggregate schedule.

    ``gap[t]`` is the smallest total power mismatch (kW) at step ``t`` any
    split must leave; all zeros iff the schedule is decomposable.
    """

    decomposable: bool
    session_ids: list[str]
    p_ch: np.ndarray = field(repr=False)
    p_dis: np.ndarray = field(repr=False)
    soc: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)


def disaggregate(env: StationEnvelope, sch: StationSchedule, sessions: Sequence[EvSession],
                 tol: float = 1e-6, backend="highs") -> Disaggregation:
    """Split an aggregate station schedule over its vehicles.

    A first LP minimizes the total mismatch between the vehicles' summed power
    and the aggregate.  If it is zero, a second LP picks the split with the
    smallest sum of per-vehicle peak power (ties broken towards low throughput).
    """
    g = env.grid
    n, T = len(sessions), g.n_steps
    m = milp.MilpModel(f"disaggregate_{env.station_id}")
    ch = np.zeros((n, T), dtype=np.int64)
    dis = np.zeros((n, T), dtype=np.int64)
    soc = np.zeros((n, T), dtype=np.int64)
    for k, s in enumerate(sessions):
        d = presence(s, g)
        ch[k] = m.add_vars(f"ch{k}", T, 0.0, s.p_ch_max * d)
        dis[k] = m.add_vars(f"dis{k}", T, 0.0, s.p_dis_max * d)
        soc[k] = m.add_vars(f"soc{k}", T, s.soc_min * d, s.soc_max * d)
        fd = s.eta_ref / s.eta_dis
        for t in range(T):
            if not d[t]:
                m.fix(int(ch[k, t]), 0.0)
                m.fix(int(dis[k, t]), 0.0)
                m.fix(int(soc[k, t]), 0.0)
                continue
            terms = {int(soc[k, t]): 1.0, int(ch[k, t]): -s.eta_ch * g.dt, int(dis[k, t]): fd * g.dt}
            if t == s.t_arrive:
                m.add_constr(terms, "=", s.soc_arrive)
            else:
                terms[int(soc[k, t - 1])] = -1.0
                m.add_constr(terms, "=", 0.0)
        m.fix(int(soc[k, s.t_leave]), s.soc_leave)

    slack = m.add_vars("gap", 4 * T, 0.0, milp.INF).reshape(4, T)
    for t in range(T):
        m.add_constr({**{int(v): 1.0 for v in ch[:, t]}, int(slack[0, t]): 1.0, int(slack[1, t]): -1.0}, "=", float(sch.p_ch[t]))
        m.add_constr({**{int(v): 1.0 for v in dis[:, t]}, int(slack[2, t]): 1.0, int(slack[3, t]): -1.0}, "=", float(sch.p_dis[t]))

    ids = [s.id for s in sessions]
    m.add_objective({int(v): 1.0 for v in slack.ravel()})
    phase1 = milp.solve(m, backend)
    if not phase1.optimal:
        # only possible when a single session is infeasible on its own
        return Disaggregation(False, ids, np.zeros((n, T)), np.zeros((n, T)), np.zeros((n, T)), np.full(T, math.inf))
    gap = phase1.values(slack).sum(axis=0)
    if phase1.objective > tol * max(1.0, T):
        return Disaggregation(False, ids, phase1.values(ch), phase1.values(dis), phase1.values(soc), gap)

    m2 = m.copy(keep_objective=False)
    for v in slack.ravel():
        m2.fix(int(v), 0.0)
    peak = m2.add_vars("peak", n, 0.0, milp.INF)
    for k in range(n):
        for t in sessions[k].window:
            m2.add_constr({int(peak[k]): 1.0, int(ch[k, t]): -1.0, int(dis[k, t]): -1.0}, ">=", 0.0)
    m2.add_objective({int(v): 1.0 for v in peak})
    m2.add_objective({int(v): 1e-4 for v in np.concatenate([ch.ravel(), dis.ravel()])})
    phase2 = milp.solve(m2, backend)
    sol = phase2 if phase2.optimal else phase1
    return Disaggregation(True, ids, sol.values(ch), sol.values(dis), sol.values(soc), np.zeros(T))
