"""Scenario configuration: every input of one experiment in a single JSON document.

Schema (``version`` 1)::

    {
      "version": 1,
      "name": str,
      "day_ahead_grid": {"start_hour", "step_minutes", "n_steps"},
      "intra_day_grid": {...},
      "loads": {"electric": [kW]*T, "heat": [kW_th]*T},
      "renewables": {"pv": {"n_units", "unit_forecast": [kW]*T, "sigma_fraction", "seed"}, "wt": {...}},
      "devices": {"grid": {...}, "gas_turbine": {...}, "battery": {...}, "heat": {...}},
      "stations": [{"station_id", "fleet": FleetSpec} | {"station_id", "sessions": [EvSession]}],
      "dr": DrParams,
      "eta_confidence": float in (0.5, 1),
      "prices": {"lambda_cur", "c_evc"},
      "penalty_rate": float,
      "rolling": RollingConfig
    }

All profiles live on the day-ahead grid.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .aggregation import StationEnvelope, aggregate
from .demand_response import DrParams
from .devices import (
    BatteryParams,
    GasTurbineParams,
    GridTieParams,
    HeatParams,
    RenewableParams,
    params_to_dict,
    price_profile,
)
from .ev_fleet import EvSession, FleetSpec, synthesize_fleet
from .timegrid import ForecastModel, Profile, TimeGrid

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario documents."""


@dataclass(frozen=True)
class PriceParams:
    lambda_cur: float = 0.05
    c_evc: float = 0.01

    def __post_init__(self):
        if self.lambda_cur < 0 or self.c_evc < 0:
            raise ConfigError("prices: lambda_cur and c_evc must be nonnegative")


@dataclass(frozen=True)
class RollingConfig:
    """Intra-day controller settings.

    Attributes:
        window_steps: Look-ahead steps per window.
        execute_steps: Steps executed before the window rolls.
        sigma_ess, sigma_gt, sigma_gird, c_evc, sigma_hs, sigma_hp: Adjustment
            cost coefficients (currency/kWh of deviation from the reference).
        intraday_sigma_fraction: Re-forecast error as a fraction of the realized value.
        tie_break: Tiny weight pulling renewable use towards the reference.
        emergency_penalty: Price of emergency slack when a window is infeasible.
    """

    window_steps: int = 16
    execute_steps: int = 1
    sigma_ess: float = 0.05
    sigma_gt: float = 0.08
    sigma_gird: float = 0.1
    c_evc: float = 0.03
    sigma_hs: float = 0.02
    sigma_hp: float = 0.04
    intraday_sigma_fraction: float = 0.03
    tie_break: float = 1e-4
    emergency_penalty: float = 10.0

    def __post_init__(self):
        if self.window_steps < 1 or not 1 <= self.execute_steps <= self.window_steps:
            raise ConfigError("rolling: need 1 <= execute_steps <= window_steps")
        coeffs = (self.sigma_ess, self.sigma_gt, self.sigma_gird, self.c_evc, self.sigma_hs, self.sigma_hp)
        if min(coeffs) < 0 or self.tie_break < 0 or self.intraday_sigma_fraction < 0:
            raise ConfigError("rolling: coefficients must be nonnegative")


@dataclass(frozen=True)
class StationConfig:
    station_id: str
    fleet: FleetSpec | None = None
    sessions: tuple[EvSession, ...] | None = None

    def __post_init__(self):
        if (self.fleet is None) == (self.sessions is None):
            raise ConfigError(f"station {self.station_id}: give exactly one of fleet or sessions")

    def build_sessions(self, grid: TimeGrid) -> list[EvSession]:
        if self.sessions is not None:
            for s in self.sessions:
                s.check_grid(grid)
            return list(self.sessions)
        return synthesize_fleet(self.fleet, grid, self.station_id)

    def to_dict(self) -> dict:
        if self.fleet is not None:
            return {"station_id": self.station_id, "fleet": self.fleet.to_dict()}
        return {"station_id": self.station_id, "sessions": [s.to_dict() for s in self.sessions]}

    @classmethod
    def from_dict(cls, d: dict) -> "StationConfig":
        if "fleet" in d:
            return cls(str(d["station_id"]), fleet=FleetSpec.from_dict(d["fleet"]))
        return cls(str(d["station_id"]), sessions=tuple(EvSession.from_dict(s) for s in d["sessions"]))


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    day_ahead_grid: TimeGrid
    intra_day_grid: TimeGrid
    grid_tie: GridTieParams
    gas_turbine: GasTurbineParams
    battery: BatteryParams
    heat: HeatParams
    stations: tuple[StationConfig, ...]
    load_e: Profile
    load_h: Profile
    pv: RenewableParams
    wt: RenewableParams
    dr: DrParams
    eta_confidence: float = 0.95
    prices: PriceParams = field(default_factory=PriceParams)
    penalty_rate: float = 0.8
    rolling: RollingConfig = field(default_factory=RollingConfig)
    name: str = "scenario"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        g = self.day_ahead_grid
        if not 0.5 < self.eta_confidence < 1:
            raise ConfigError(f"eta_confidence must lie in (0.5, 1), got {self.eta_confidence}")
        if not g.alignable(self.intra_day_grid) or g.span_minutes != self.intra_day_grid.span_minutes:
            raise ConfigError("day-ahead and intra-day grids must cover the same span with aligned steps")
        if self.intra_day_grid.step_minutes > g.step_minutes:
            raise ConfigError("the intra-day grid must not be coarser than the day-ahead grid")
        profiles = {
            "load_e": self.load_e,
            "load_h": self.load_h,
            "price_buy": self.grid_tie.price_buy,
            "price_sell": self.grid_tie.price_sell,
            "pv": self.pv.unit_profile.forecast,
            "wt": self.wt.unit_profile.forecast,
            "curtail_cap_e": self.dr.curtail_cap_e,
        }
        for k, p in profiles.items():
            if p.grid != g:
                raise ConfigError(f"profile {k} is not on the day-ahead grid")
        if np.any(self.load_e.values < 0) or np.any(self.load_h.values < 0):
            raise ConfigError("loads must be nonnegative")
        ids = [s.station_id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate station ids")
        if self.penalty_rate < 0:
            raise ConfigError("penalty_rate must be nonnegative")
        gt = self.gas_turbine
        if gt.p_min > min(gt.ramp_up, gt.ramp_down):
            raise ConfigError("gas turbine p_min exceeds its ramp limits, so it could never start")

    # -- derived inputs -------------------------------------------------------
    @property
    def refine_factor(self) -> int:
        return self.day_ahead_grid.ratio(self.intra_day_grid)

    @cached_property
    def sessions(self) -> dict[str, list[EvSession]]:
        """Sessions per station on the day-ahead grid."""
        return {s.station_id: s.build_sessions(self.day_ahead_grid) for s in self.stations}

    def sessions_on(self, grid: TimeGrid) -> dict[str, list[EvSession]]:
        if grid == self.day_ahead_grid:
            return self.sessions
        r = self.day_ahead_grid.ratio(grid)
        return {k: [s.refined(r) for s in v] for k, v in self.sessions.items()}

    def envelopes(self, grid: TimeGrid | None = None) -> list[StationEnvelope]:
        grid = grid or self.day_ahead_grid
        return [aggregate(ss, grid, sid) for sid, ss in self.sessions_on(grid).items()]

    def renewable_models(self) -> dict[str, ForecastModel]:
        return {"pv": self.pv.forecast_model(), "wt": self.wt.forecast_model()}

    def with_zero_error(self) -> "ScenarioConfig":
        """Same scenario with perfectly accurate renewable forecasts."""
        def exact(r: RenewableParams) -> RenewableParams:
            u = r.unit_profile
            return replace(r, unit_profile=ForecastModel(u.forecast, u.forecast.scaled(0.0), u.seed))

        return replace(self, pv=exact(self.pv), wt=exact(self.wt),
                       rolling=replace(self.rolling, intraday_sigma_fraction=0.0))

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        def renewable(r: RenewableParams) -> dict:
            u = r.unit_profile
            f = u.forecast.values
            frac = float(u.sigma.values[f > 0].max() / f[f > 0].max()) if np.any(f > 0) else 0.0
            return {"n_units": r.n_units, "unit_forecast": f.tolist(), "sigma": u.sigma.values.tolist(),
                    "sigma_fraction": frac, "seed": u.seed}

        return {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "day_ahead_grid": self.day_ahead_grid.to_dict(),
            "intra_day_grid": self.intra_day_grid.to_dict(),
            "loads": {"electric": self.load_e.values.tolist(), "heat": self.load_h.values.tolist()},
            "renewables": {"pv": renewable(self.pv), "wt": renewable(self.wt)},
            "devices": {
                "grid": params_to_dict(self.grid_tie),
                "gas_turbine": params_to_dict(self.gas_turbine),
                "battery": params_to_dict(self.battery),
                "heat": params_to_dict(self.heat),
            },
            "stations": [s.to_dict() for s in self.stations],
            "dr": self.dr.to_dict(),
            "eta_confidence": self.eta_confidence,
            "prices": asdict(self.prices),
            "penalty_rate": self.penalty_rate,
            "rolling": asdict(self.rolling),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            return cls._from_dict(d)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid scenario document: {type(exc).__name__}: {exc}") from exc

    @classmethod
    def _from_dict(cls, d: dict) -> "ScenarioConfig":
        version = d.get("version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported scenario version {version!r} (expected {SCHEMA_VERSION})")
        g = TimeGrid.from_dict(d["day_ahead_grid"])
        gi = TimeGrid.from_dict(d.get("intra_day_grid", TimeGrid.intra_day().to_dict()))
        dev = d["devices"]

        def renewable(r: dict) -> RenewableParams:
            f = Profile(g, r["unit_forecast"])
            sigma = Profile(g, r["sigma"]) if "sigma" in r else f.scaled(float(r.get("sigma_fraction", 0.1)))
            return RenewableParams(int(r["n_units"]), ForecastModel(f, sigma, int(r.get("seed", 0))))

        gd = dict(dev["grid"])
        grid_tie = GridTieParams(float(gd["p_min"]), float(gd["p_max"]), price_profile(g, gd["price_buy"]),
                                 price_profile(g, gd["price_sell"]), float(gd.get("sigma_gird", 0.0)))
        gt = dict(dev["gas_turbine"])
        gt["fuel_coeffs"] = tuple(float(c) for c in gt["fuel_coeffs"])
        for k in ("ramp_up", "ramp_down"):
            if gt.get(k) is None:
                gt[k] = np.inf
        return cls(
            day_ahead_grid=g,
            intra_day_grid=gi,
            grid_tie=grid_tie,
            gas_turbine=_build(GasTurbineParams, gt),
            battery=_build(BatteryParams, dev["battery"]),
            heat=_build(HeatParams, dev["heat"]),
            stations=tuple(StationConfig.from_dict(s) for s in d.get("stations", [])),
            load_e=Profile(g, d["loads"]["electric"]),
            load_h=Profile(g, d["loads"]["heat"]),
            pv=renewable(d["renewables"]["pv"]),
            wt=renewable(d["renewables"]["wt"]),
            dr=DrParams.from_dict(d["dr"], g),
            eta_confidence=float(d.get("eta_confidence", 0.95)),
            prices=_build(PriceParams, d.get("prices", {})),
            penalty_rate=float(d.get("penalty_rate", 0.8)),
            rolling=_build(RollingConfig, d.get("rolling", {})),
            name=str(d.get("name", "scenario")),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def _build(cls, d: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    return cls(**d)


def baseline_text() -> str:
    return resources.files("menet").joinpath("data/baseline.json").read_text()


def load_baseline() -> ScenarioConfig:
    """The documented synthetic baseline scenario shipped with the package."""
    return ScenarioConfig.from_json(baseline_text())
