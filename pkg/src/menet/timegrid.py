"""Time discretization, per-step profiles and the renewable forecast error model.

Every model in the package lives on a :class:`TimeGrid`.  Day-ahead work uses
an hourly 24-step grid; the rolling intra-day controller uses a 15-minute
96-step grid.  Profiles carry a unit so that resampling knows whether a series
is intensive (power, prices) or extensive (energy per step).
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri


class AlignmentError(ValueError):
    """Raised when two time grids cannot be mapped onto each other."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


class Unit(str, enum.Enum):
    KW = "kW"
    KWH = "kWh"
    PRICE = "currency/kWh"
    NONE = "dimensionless"

    @property
    def extensive(self) -> bool:
        # energy-per-step values split/sum under resampling; everything else is a rate
        return self is Unit.KWH


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discrete time axis.

    Attributes:
        start_hour: Hour of day of the first step's left edge.
        step_minutes: Step length in minutes.
        n_steps: Number of steps.
    """

    start_hour: float = 0.0
    step_minutes: int = 60
    n_steps: int = 24

    def __post_init__(self):
        if not 0 <= self.start_hour <= 24:
            raise ValueError(f"start_hour must lie in [0, 24], got {self.start_hour}")
        if int(self.step_minutes) != self.step_minutes or self.step_minutes <= 0:
            raise ValueError(f"step_minutes must be a positive integer, got {self.step_minutes}")
        if int(self.n_steps) != self.n_steps or self.n_steps <= 0:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @classmethod
    def day_ahead(cls) -> "TimeGrid":
        return cls(0.0, 60, 24)

    @classmethod
    def intra_day(cls) -> "TimeGrid":
        return cls(0.0, 15, 96)

    @property
    def dt(self) -> float:
        """Step length in hours."""
        return self.step_minutes / 60.0

    @property
    def span_minutes(self) -> int:
        return self.step_minutes * self.n_steps

    @property
    def hours(self) -> np.ndarray:
        """Left edge of every step, in hours of day."""
        return self.start_hour + np.arange(self.n_steps) * self.dt

    def alignable(self, other: "TimeGrid") -> bool:
        a, b = self.step_minutes, other.step_minutes
        return a % b == 0 or b % a == 0

    def ratio(self, other: "TimeGrid") -> int:
        """Number of ``other`` steps per step of this grid (this grid must be coarser)."""
        self._check_compatible(other)
        if self.step_minutes % other.step_minutes:
            raise AlignmentError(f"{self} is not a refinement parent of {other}")
        return self.step_minutes // other.step_minutes

    def _check_compatible(self, other: "TimeGrid") -> None:
        if not self.alignable(other):
            raise AlignmentError(
                f"step sizes {self.step_minutes} and {other.step_minutes} min are not integer multiples"
            )
        if self.start_hour != other.start_hour or self.span_minutes != other.span_minutes:
            raise AlignmentError(f"grids {self} and {other} do not cover the same horizon")

    def to_dict(self) -> dict:
        return {"start_hour": self.start_hour, "step_minutes": self.step_minutes, "n_steps": self.n_steps}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeGrid":
        return cls(float(d.get("start_hour", 0.0)), int(d["step_minutes"]), int(d["n_steps"]))


@dataclass(frozen=True, eq=False)
class Profile:
    """A per-step numeric series on a grid with a fixed unit."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    unit: Unit = Unit.KW

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape[0] != self.grid.n_steps:
            raise ValueError(f"profile has {vals.shape[0]} values for a {self.grid.n_steps}-step grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "unit", Unit(self.unit))

    @classmethod
    def constant(cls, grid: TimeGrid, value: float, unit: Unit = Unit.KW) -> "Profile":
        return cls(grid, np.full(grid.n_steps, float(value)), unit)

    @classmethod
    def zeros(cls, grid: TimeGrid, unit: Unit = Unit.KW) -> "Profile":
        return cls.constant(grid, 0.0, unit)

    def __len__(self) -> int:
        return self.grid.n_steps

    def __getitem__(self, t):
        return self.values[t]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Profile):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.unit == other.unit
            and np.array_equal(self.values, other.values)
        )

    def __add__(self, other: "Profile") -> "Profile":
        if self.grid != other.grid or self.unit != other.unit:
            raise ValueError("can only add profiles on the same grid with the same unit")
        return Profile(self.grid, self.values + other.values, self.unit)

    def scaled(self, factor: float) -> "Profile":
        return Profile(self.grid, self.values * factor, self.unit)

    def energy(self) -> float:
        """Total energy of the series (sum of value * dt for rates, plain sum for kWh)."""
        if self.unit.extensive:
            return float(self.values.sum())
        return float(self.values.sum() * self.grid.dt)


def resample(p: Profile, target: TimeGrid) -> Profile:
    """Map a profile onto another aligned grid.

    Refinement holds rates piecewise constant and splits per-step energies
    evenly; coarsening averages rates and sums energies.  Either way the total
    energy of the series is unchanged.
    """
    src = p.grid
    src._check_compatible(target)
    if src.step_minutes == target.step_minutes:
        return Profile(target, p.values, p.unit)
    if src.step_minutes > target.step_minutes:
        r = src.step_minutes // target.step_minutes
        vals = np.repeat(p.values, r)
        if p.unit.extensive:
            vals = vals / r
        return Profile(target, vals, p.unit)
    r = target.step_minutes // src.step_minutes
    blocks = p.values.reshape(target.n_steps, r)
    vals = blocks.sum(axis=1) if p.unit.extensive else blocks.mean(axis=1)
    return Profile(target, vals, p.unit)


@dataclass(frozen=True)
class ForecastModel:
    """Point forecast plus a per-step standard deviation of additive Gaussian error.

    ``sigma`` is treated as a standard deviation (not a variance).
    """

    forecast: Profile
    sigma: Profile
    seed: int = 0

    def __post_init__(self):
        if self.forecast.grid != self.sigma.grid:
            raise ValueError("forecast and sigma must share a grid")
        if np.any(self.sigma.values < 0):
            raise ValueError("sigma must be nonnegative")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be an unsigned integer")

    @classmethod
    def proportional(cls, forecast: Profile, fraction: float, seed: int = 0) -> "ForecastModel":
        return cls(forecast, forecast.scaled(fraction), seed)

    @property
    def grid(self) -> TimeGrid:
        return self.forecast.grid

    def on_grid(self, target: TimeGrid) -> "ForecastModel":
        return ForecastModel(resample(self.forecast, target), resample(self.sigma, target), self.seed)

    def with_seed(self, seed: int) -> "ForecastModel":
        return ForecastModel(self.forecast, self.sigma, seed)


def rng_for(*keys: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of unsigned integers.

    Uses numpy's PCG64 bit generator seeded through ``SeedSequence(keys)``, so
    the stream depends only on the key tuple.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in keys])))


def sample_realization(fm: ForecastModel, seed_offset: int = 0) -> Profile:
    """Draw one realization ``max(forecast + e, 0)`` with ``e ~ N(0, sigma^2)`` per step."""
    e = rng_for(fm.seed, seed_offset).standard_normal(fm.grid.n_steps) * fm.sigma.values
    return Profile(fm.grid, np.maximum(fm.forecast.values + e, 0.0), fm.forecast.unit)


def std_normal_quantile(eta: float) -> float:
    """Inverse CDF of the standard normal distribution."""
    if not 0.0 < eta < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {eta}")
    return float(ndtri(eta))


def table_csv(grid: TimeGrid, cols: dict[str, np.ndarray]) -> str:
    """RFC-4180 table, one row per step, fixed 6-decimal formatting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["step", "hour", *cols])
    arrs = [np.asarray(v, dtype=float) for v in cols.values()]
    for t, h in enumerate(grid.hours):
        w.writerow([t, f"{h:.2f}", *(_fmt(a[t]) for a in arrs)])
    return buf.getvalue()


def _fmt(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s
