"""Single-EV grid-connection sessions and synthetic fleets.

A session is present on the grid for steps ``t_arrive..t_leave`` inclusive.
Its state of charge evolves as

    S[t] = S[t-1] + eta_ch * p_ch[t] * dt - eta_ref * p_dis[t] * dt / eta_dis

inside the window.  For aggregation the arrival and departure are rewritten as
fixed energy injections (``+soc_arrive`` on the arrival step, ``-soc_leave``
on the step after departure), which keeps the model linear and additive
across vehicles because the connection window is data rather than a decision.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .timegrid import Profile, TimeGrid, Unit, rng_for


class SessionError(ValueError):
    """Raised for sessions violating their invariants or power limits."""


class BoundsError(SessionError):
    """Raised when a session window does not fit on the grid."""


_TOL = 1e-9


@dataclass(frozen=True)
class EvSession:
    id: str
    station_id: str
    t_arrive: int
    t_leave: int
    soc_arrive: float
    soc_leave: float
    soc_min: float
    soc_max: float
    p_ch_max: float
    p_dis_max: float
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    eta_ref: float = 1.0

    def __post_init__(self):
        if self.t_arrive < 0 or self.t_leave < self.t_arrive:
            raise BoundsError(f"session {self.id}: bad window [{self.t_arrive}, {self.t_leave}]")
        if not self.soc_min - _TOL <= self.soc_arrive <= self.soc_max + _TOL:
            raise SessionError(f"session {self.id}: soc_arrive outside [soc_min, soc_max]")
        if not self.soc_min - _TOL <= self.soc_leave <= self.soc_max + _TOL:
            raise SessionError(f"session {self.id}: soc_leave outside [soc_min, soc_max]")
        if self.p_ch_max < 0 or self.p_dis_max < 0:
            raise SessionError(f"session {self.id}: negative power limit")
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dis <= 1 and self.eta_ref > 0):
            raise SessionError(f"session {self.id}: efficiencies out of range")

    @property
    def window(self) -> range:
        return range(self.t_arrive, self.t_leave + 1)

    @property
    def efficiencies(self) -> tuple[float, float, float]:
        return (self.eta_ch, self.eta_dis, self.eta_ref)

    def check_grid(self, grid: TimeGrid) -> None:
        if self.t_leave >= grid.n_steps:
            raise BoundsError(f"session {self.id}: window ends at step {self.t_leave} beyond a {grid.n_steps}-step grid")

    def refined(self, factor: int) -> "EvSession":
        """Same session on a grid ``factor`` times finer."""
        return replace(self, t_arrive=self.t_arrive * factor, t_leave=self.t_leave * factor + factor - 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvSession":
        return cls(**d)


def presence(s: EvSession, grid: TimeGrid) -> np.ndarray:
    """Connection indicator ``D[t]`` (1 inside the window, else 0)."""
    s.check_grid(grid)
    d = np.zeros(grid.n_steps, dtype=np.int8)
    d[s.t_arrive : s.t_leave + 1] = 1
    return d


def boundary_products(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``D[t](D[t]-D[t-1])`` and ``D[t-1](D[t-1]-D[t])`` with ``D[-1] = 0``.

    The first is 1 exactly on the arrival step, the second exactly on the step
    after departure.
    """
    d = np.asarray(d, dtype=np.int64)
    prev = np.concatenate([[0], d[:-1]])
    return d * (d - prev), prev * (prev - d)


def soc_step(s: EvSession, soc_prev: float, p_ch: float, p_dis: float, dt: float) -> float:
    if not -_TOL <= p_ch <= s.p_ch_max + _TOL:
        raise SessionError(f"charging power {p_ch} outside [0, {s.p_ch_max}]")
    if not -_TOL <= p_dis <= s.p_dis_max + _TOL:
        raise SessionError(f"discharging power {p_dis} outside [0, {s.p_dis_max}]")
    return soc_prev + s.eta_ch * p_ch * dt - s.eta_ref * p_dis * dt / s.eta_dis


def boundary_injections(s: EvSession, grid: TimeGrid) -> Profile:
    """Arrival/departure energy steps of one session (kWh per step)."""
    arrive, leave = boundary_products(presence(s, grid))
    return Profile(grid, s.soc_arrive * arrive - s.soc_leave * leave, Unit.KWH)


def max_reachable_soc(s: EvSession, dt: float) -> float:
    """SOC at departure when charging flat out from arrival (greedy oracle)."""
    n = s.t_leave - s.t_arrive + 1
    return min(s.soc_max, s.soc_arrive + n * s.eta_ch * s.p_ch_max * dt)


def greedy_schedule(s: EvSession, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Charge at full rate until ``soc_leave`` is reached, then idle.

    Returns ``(p_ch, soc)`` on the whole grid.  Witnesses that the session's
    constraint set is nonempty whenever ``soc_leave >= soc_arrive``.
    """
    p = np.zeros(grid.n_steps)
    soc = np.zeros(grid.n_steps)
    level = s.soc_arrive
    for t in s.window:
        need = max(0.0, s.soc_leave - level)
        p[t] = min(s.p_ch_max, need / (s.eta_ch * grid.dt)) if s.p_ch_max > 0 else 0.0
        level = level + s.eta_ch * p[t] * grid.dt
        soc[t] = level
    return p, soc


@dataclass(frozen=True)
class Cohort:
    """Normal arrival-time cluster (hours of day) with a relative weight."""

    mean_hour: float
    std_hour: float
    weight: float = 1.0


@dataclass(frozen=True)
class FleetSpec:
    n_evs: int
    seed: int = 0
    cohorts: tuple[Cohort, ...] = (Cohort(8.0, 1.5), Cohort(18.0, 1.5))
    stay_hours: tuple[float, float] = (6.0, 12.0)
    soc_arrive_frac: tuple[float, float] = (0.2, 0.5)
    soc_leave_frac: tuple[float, float] = (0.8, 0.95)
    soc_min_frac: float = 0.1
    capacity_kwh: tuple[float, float] = (40.0, 80.0)
    p_ch_max: float = 7.0
    p_dis_max: float = 7.0
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    eta_ref: float = 1.0

    def __post_init__(self):
        if self.n_evs < 0:
            raise ValueError("n_evs must be nonnegative")
        lo, hi = self.stay_hours
        if not 0 < lo <= hi:
            raise ValueError("stay_hours must be a positive interval")
        for name in ("soc_arrive_frac", "soc_leave_frac", "capacity_kwh"):
            a, b = getattr(self, name)
            if a > b or a < 0:
                raise ValueError(f"{name} must be an ordered nonnegative interval")
        if not 0 <= self.soc_min_frac <= self.soc_arrive_frac[0]:
            raise ValueError("soc_min_frac must not exceed the lowest arrival fraction")
        if self.soc_leave_frac[1] > 1:
            raise ValueError("soc_leave_frac must not exceed 1")
        if not self.cohorts:
            raise ValueError("at least one arrival cohort is required")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cohorts"] = [asdict(c) for c in self.cohorts]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FleetSpec":
        d = dict(d)
        if "cohorts" in d:
            d["cohorts"] = tuple(Cohort(**c) for c in d["cohorts"])
        for k in ("stay_hours", "soc_arrive_frac", "soc_leave_frac", "capacity_kwh"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def synthesize_fleet(spec: FleetSpec, grid: TimeGrid, station_id: str = "1") -> list[EvSession]:
    """Draw ``spec.n_evs`` sessions; deterministic in ``spec.seed``.

    Windows are clipped to the grid.  A departure target the vehicle cannot
    reach at full charging power is lowered to the reachable maximum, so the
    session count never depends on rejection.
    """
    rng = rng_for(spec.seed)
    weights = np.array([c.weight for c in spec.cohorts], dtype=float)
    weights /= weights.sum()
    horizon_h = grid.n_steps * grid.dt
    sessions = []
    for n in range(spec.n_evs):
        cohort = spec.cohorts[int(rng.choice(len(spec.cohorts), p=weights))]
        hour = float(np.clip(rng.normal(cohort.mean_hour, cohort.std_hour) - grid.start_hour, 0.0, horizon_h - grid.dt))
        t_arrive = min(int(hour / grid.dt), grid.n_steps - 1)
        stay = max(1, int(round(rng.uniform(*spec.stay_hours) / grid.dt)))
        t_leave = min(t_arrive + stay - 1, grid.n_steps - 1)
        cap = rng.uniform(*spec.capacity_kwh)
        soc_arrive = rng.uniform(*spec.soc_arrive_frac) * cap
        soc_leave = rng.uniform(*spec.soc_leave_frac) * cap
        s = EvSession(
            id=f"{station_id}-{n}",
            station_id=station_id,
            t_arrive=t_arrive,
            t_leave=t_leave,
            soc_arrive=soc_arrive,
            soc_leave=soc_leave,
            soc_min=spec.soc_min_frac * cap,
            soc_max=cap,
            p_ch_max=spec.p_ch_max,
            p_dis_max=spec.p_dis_max,
            eta_ch=spec.eta_ch,
            eta_dis=spec.eta_dis,
            eta_ref=spec.eta_ref,
        )
        reach = max_reachable_soc(s, grid.dt)
        if s.soc_leave > reach:
            s = replace(s, soc_leave=reach)
        sessions.append(s)
    return sessions


def sessions_to_json(sessions: Sequence[EvSession]) -> str:
    return json.dumps([s.to_dict() for s in sessions], indent=1)


def sessions_from_json(text: str) -> list[EvSession]:
    return [EvSession.from_dict(d) for d in json.loads(text)]
