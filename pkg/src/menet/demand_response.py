"""Flexible load: energy-neutral shifting of electric load and compensated curtailment.

Shifting is steered by time-of-use prices inside the optimizer and carries no
direct compensation.  Curtailment is paid ``lambda_e`` / ``lambda_h`` per kWh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .milp import MilpModel
from .timegrid import Profile, TimeGrid, resample

# hour-ending convention: step t covers hour t..t+1, so "1:00-9:00" is steps 0..8
DEFAULT_VALLEY_STEPS = tuple(range(0, 9)) + tuple(range(12, 17)) + tuple(range(21, 24))
DEFAULT_PEAK_STEPS = tuple(range(9, 12)) + tuple(range(17, 21))


class DrValidationError(ValueError):
    """Raised for decisions that break the demand-response invariants."""


@dataclass(frozen=True, eq=False)
class DrParams:
    shiftable_fraction_e: float
    curtail_cap_e: Profile
    curtail_cap_h: Profile
    lambda_e: float
    lambda_h: float
    peak_steps: tuple[int, ...] = DEFAULT_PEAK_STEPS
    valley_steps: tuple[int, ...] = DEFAULT_VALLEY_STEPS

    def __post_init__(self):
        if not 0 <= self.shiftable_fraction_e <= 1:
            raise ValueError("shiftable_fraction_e must lie in [0, 1]")
        if np.any(self.curtail_cap_e.values < 0) or np.any(self.curtail_cap_h.values < 0):
            raise ValueError("curtailment caps must be nonnegative")
        if set(self.peak_steps) & set(self.valley_steps):
            raise ValueError("peak and valley step sets overlap")
        object.__setattr__(self, "peak_steps", tuple(int(t) for t in self.peak_steps))
        object.__setattr__(self, "valley_steps", tuple(int(t) for t in self.valley_steps))

    @property
    def grid(self) -> TimeGrid:
        return self.curtail_cap_e.grid

    def masks(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.grid.n_steps
        peak = np.zeros(n, dtype=bool)
        valley = np.zeros(n, dtype=bool)
        peak[[t for t in self.peak_steps if t < n]] = True
        valley[[t for t in self.valley_steps if t < n]] = True
        return peak, valley

    def to_dict(self) -> dict:
        return {
            "shiftable_fraction_e": self.shiftable_fraction_e,
            "curtail_cap_e": self.curtail_cap_e.values.tolist(),
            "curtail_cap_h": self.curtail_cap_h.values.tolist(),
            "lambda_e": self.lambda_e,
            "lambda_h": self.lambda_h,
            "peak_steps": list(self.peak_steps),
            "valley_steps": list(self.valley_steps),
        }

    @classmethod
    def from_dict(cls, d: dict, grid: TimeGrid) -> "DrParams":
        return cls(
            float(d["shiftable_fraction_e"]),
            Profile(grid, d["curtail_cap_e"]),
            Profile(grid, d["curtail_cap_h"]),
            float(d["lambda_e"]),
            float(d["lambda_h"]),
            tuple(d.get("peak_steps", DEFAULT_PEAK_STEPS)),
            tuple(d.get("valley_steps", DEFAULT_VALLEY_STEPS)),
        )


@dataclass(frozen=True, eq=False)
class DrDecision:
    shift_in: Profile
    shift_out: Profile
    curtail_e: Profile
    curtail_h: Profile

    @classmethod
    def zero(cls, grid: TimeGrid) -> "DrDecision":
        z = Profile.zeros(grid)
        return cls(z, z, z, z)

    @property
    def grid(self) -> TimeGrid:
        return self.shift_in.grid

    def validate(self, p: DrParams | None = None, base_e: Profile | None = None, tol: float = 1e-6) -> None:
        dt = self.grid.dt
        for name in ("shift_in", "shift_out", "curtail_e", "curtail_h"):
            if np.any(getattr(self, name).values < -tol):
                raise DrValidationError(f"{name} has negative entries")
        moved = (self.shift_in.values.sum() - self.shift_out.values.sum()) * dt
        if abs(moved) > tol:
            raise DrValidationError(f"shifting is not energy neutral (net {moved:.6g} kWh)")
        if p is not None:
            if np.any(self.curtail_e.values > p.curtail_cap_e.values + tol):
                raise DrValidationError("electric curtailment above cap")
            if np.any(self.curtail_h.values > p.curtail_cap_h.values + tol):
                raise DrValidationError("heat curtailment above cap")
            if base_e is not None:
                cap = p.shiftable_fraction_e * base_e.values
                if np.any(self.shift_out.values > cap + tol) or np.any(self.shift_in.values > cap + tol):
                    raise DrValidationError("shifted power above the shiftable fraction of load")

    def resampled(self, target: TimeGrid) -> "DrDecision":
        return DrDecision(*(resample(getattr(self, k), target) for k in ("shift_in", "shift_out", "curtail_e", "curtail_h")))


def effective_loads(base_e: Profile, base_h: Profile, d: DrDecision, tol: float = 1e-9) -> tuple[Profile, Profile]:
    """Loads after shifting and curtailment.

    Raises:
        DrValidationError: if the decision is not energy neutral or a load turns negative.
    """
    d.validate()
    le = base_e.values - d.shift_out.values + d.shift_in.values - d.curtail_e.values
    lh = base_h.values - d.curtail_h.values
    if np.any(le < -tol) or np.any(lh < -tol):
        raise DrValidationError("demand response drives a load negative")
    return Profile(base_e.grid, np.maximum(le, 0.0)), Profile(base_h.grid, np.maximum(lh, 0.0))


def dr_cost(d: DrDecision, p: DrParams) -> float:
    dt = d.grid.dt
    return float(p.lambda_e * d.curtail_e.values.sum() * dt + p.lambda_h * d.curtail_h.values.sum() * dt)


@dataclass
class DrVars:
    shift_in: np.ndarray
    shift_out: np.ndarray
    curtail_e: np.ndarray
    curtail_h: np.ndarray


def add_dr(m: MilpModel, p: DrParams, base_e: Profile, base_h: Profile, enabled: bool = True) -> DrVars | None:
    """Add demand-response variables; returns ``None`` when disabled.

    Shift-out is only available in peak steps and shift-in only in valley
    steps, each capped at the shiftable fraction of the base load.
    """
    if not enabled:
        return None
    n = base_e.grid.n_steps
    peak, valley = p.masks()
    cap = p.shiftable_fraction_e * base_e.values
    v_in = m.add_vars("dr_in", n, 0.0, np.where(valley, cap, 0.0))
    v_out = m.add_vars("dr_out", n, 0.0, np.where(peak, cap, 0.0))
    cut_e = m.add_vars("dr_cut_e", n, 0.0, p.curtail_cap_e.values)
    cut_h = m.add_vars("dr_cut_h", n, 0.0, np.minimum(p.curtail_cap_h.values, base_h.values))
    m.add_constr({**{int(v): 1.0 for v in v_in}, **{int(v): -1.0 for v in v_out}}, "=", 0.0, "dr_shift_balance")
    for t in range(n):
        m.add_constr({int(v_out[t]): 1.0, int(cut_e[t]): 1.0, int(v_in[t]): -1.0}, "<=", float(base_e.values[t]),
                     f"dr_load_nonneg[{t}]")
    return DrVars(v_in, v_out, cut_e, cut_h)
