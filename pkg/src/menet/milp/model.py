"""Solver-neutral mixed-integer linear program representation."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

INF = math.inf


class ModelingError(ValueError):
    """Raised for malformed models or misuse of a linearization helper."""


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class ResourceLimitError(RuntimeError):
    """Raised when a solver exhausts its node/time budget.

    ``incumbent`` holds the best integer-feasible :class:`Solution` found so
    far, or ``None``.
    """

    def __init__(self, message: str, incumbent: "Solution | None" = None):
        super().__init__(message)
        self.incumbent = incumbent


SENSES = ("<=", "=", ">=")


@dataclass
class Constraint:
    idx: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float
    name: str


class MilpModel:
    """Variables with bounds and integrality, linear constraints, a linear objective.

    Variables are referred to by integer index.  The objective is always
    minimized.

    Example:
        >>> m = MilpModel("toy")
        >>> x = m.add_var("x", lb=0, ub=10)
        >>> m.add_constr({x: 1.0}, ">=", 3)
        >>> m.add_objective({x: 1.0})
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.binary: list[bool] = []
        self.constraints: list[Constraint] = []
        self._obj_idx: list[np.ndarray] = []
        self._obj_coef: list[np.ndarray] = []
        self.obj_constant = 0.0

    def copy(self, keep_objective: bool = True) -> "MilpModel":
        """Independent copy; constraint arrays are shared since they are never mutated."""
        m = MilpModel(self.name)
        m.var_names, m.lb, m.ub, m.binary = list(self.var_names), list(self.lb), list(self.ub), list(self.binary)
        m.constraints = list(self.constraints)
        if keep_objective:
            m._obj_idx, m._obj_coef = list(self._obj_idx), list(self._obj_coef)
            m.obj_constant = self.obj_constant
        return m

    # -- variables ---------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> int:
        lb, ub = float(lb), float(ub)
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ModelingError(f"variable {name}: lower bound {lb} exceeds upper bound {ub}")
        self.var_names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.binary.append(bool(binary))
        return len(self.var_names) - 1

    def add_vars(self, name: str, n: int, lb=0.0, ub=INF, binary: bool = False) -> np.ndarray:
        lbs = np.broadcast_to(np.asarray(lb, dtype=float), (n,))
        ubs = np.broadcast_to(np.asarray(ub, dtype=float), (n,))
        return np.array(
            [self.add_var(f"{name}[{t}]", lbs[t], ubs[t], binary) for t in range(n)], dtype=np.int64
        )

    def set_bounds(self, var: int, lb: float | None = None, ub: float | None = None) -> None:
        if lb is not None:
            self.lb[var] = float(lb)
        if ub is not None:
            self.ub[var] = float(ub)
        if self.lb[var] > self.ub[var]:
            raise ModelingError(f"variable {self.var_names[var]}: empty bound interval")

    def fix(self, var: int, value: float) -> None:
        self.lb[var] = self.ub[var] = float(value)

    def bounds_of(self, var: int) -> tuple[float, float]:
        return self.lb[var], self.ub[var]

    # -- constraints -------------------------------------------------------
    def add_constr(self, terms: Mapping[int, float] | Iterable[tuple[int, float]], sense: str,
                   rhs: float, name: str | None = None) -> int:
        """Add ``sum(coef * x[var]) <sense> rhs``.  Repeated variables are merged."""
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[int, float] = {}
        for v, c in items:
            merged[int(v)] = merged.get(int(v), 0.0) + float(c)
        idx = np.fromiter(merged.keys(), dtype=np.int64, count=len(merged))
        coef = np.fromiter(merged.values(), dtype=float, count=len(merged))
        return self._append(idx, coef, sense, rhs, name)

    def _append(self, idx, coef, sense, rhs, name) -> int:
        if sense not in SENSES:
            raise ModelingError(f"unknown constraint sense {sense!r}")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_vars):
            raise ModelingError(f"constraint {name} references an undeclared variable")
        if not math.isfinite(rhs):
            raise ModelingError(f"constraint {name} has non-finite rhs {rhs}")
        k = len(self.constraints)
        self.constraints.append(Constraint(idx, coef, sense, float(rhs), name or f"c{k}"))
        return k

    # -- objective ---------------------------------------------------------
    def add_objective(self, terms: Mapping[int, float] | Iterable[tuple[int, float]], constant: float = 0.0):
        items = list(terms.items() if isinstance(terms, Mapping) else terms)
        if items:
            self._obj_idx.append(np.array([int(v) for v, _ in items], dtype=np.int64))
            self._obj_coef.append(np.array([float(c) for _, c in items]))
        self.obj_constant += float(constant)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for idx, coef in zip(self._obj_idx, self._obj_coef):
            np.add.at(c, idx, coef)
        return c

    # -- export ------------------------------------------------------------
    def to_arrays(self):
        """Return ``(c, A, lo, hi, lb, ub, integrality)`` with row bounds ``lo <= A x <= hi``."""
        n, m = self.n_vars, self.n_constraints
        rows, cols, vals = [], [], []
        lo = np.full(m, -INF)
        hi = np.full(m, INF)
        for i, con in enumerate(self.constraints):
            rows.append(np.full(con.idx.size, i))
            cols.append(con.idx)
            vals.append(con.coef)
            if con.sense in ("<=", "="):
                hi[i] = con.rhs
            if con.sense in (">=", "="):
                lo[i] = con.rhs
        if m:
            A = sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, n)
            )
        else:
            A = sparse.csr_matrix((0, n))
        return (
            self.objective_vector(),
            A,
            lo,
            hi,
            np.array(self.lb, dtype=float),
            np.array(self.ub, dtype=float),
            np.array(self.binary, dtype=bool),
        )

    def residuals(self, x: np.ndarray) -> dict[str, float]:
        """Largest bound, row and integrality violations of a point ``x``."""
        x = np.asarray(x, dtype=float)
        _, A, lo, hi, lb, ub, integ = self.to_arrays()
        ax = A @ x if self.n_constraints else np.zeros(0)
        row = np.maximum(lo - ax, ax - hi)
        bnd = np.maximum(lb - x, x - ub)
        frac = np.abs(x[integ] - np.round(x[integ]))
        return {
            "row": float(row.max(initial=0.0)),
            "bound": float(bnd.max(initial=0.0)),
            "integrality": float(frac.max(initial=0.0)),
        }

    def max_violation(self, x: np.ndarray) -> float:
        return max(self.residuals(x).values())

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ np.asarray(x, dtype=float) + self.obj_constant)

    def to_lp(self) -> str:
        """Serialize in CPLEX LP text format (objective constant given as a comment)."""
        names = _lp_names(self.var_names)
        c = self.objective_vector()
        out = [f"\\ model {self.name}", f"\\ objective constant {self.obj_constant!r}", "Minimize"]
        out.append(" obj: " + (_lp_expr(np.nonzero(c)[0], c[np.nonzero(c)[0]], names) or "0 " + names[0]))
        out.append("Subject To")
        cnames = _lp_names([con.name for con in self.constraints], prefix="r")
        for cn, con in zip(cnames, self.constraints):
            expr = _lp_expr(con.idx, con.coef, names) or f"0 {names[0]}"
            out.append(f" {cn}: {expr} {con.sense} {con.rhs!r}")
        out.append("Bounds")
        for j, nm in enumerate(names):
            lb, ub = self.lb[j], self.ub[j]
            lbs = "-inf" if lb == -INF else repr(lb)
            ubs = "+inf" if ub == INF else repr(ub)
            if lb == ub:
                out.append(f" {nm} = {lb!r}")
            else:
                out.append(f" {lbs} <= {nm} <= {ubs}")
        bins = [names[j] for j in range(self.n_vars) if self.binary[j]]
        if bins:
            out.append("Binaries")
            out.extend(f" {nm}" for nm in bins)
        out.append("End")
        return "\n".join(out) + "\n"


_LP_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _lp_names(raw: list[str], prefix: str = "x") -> list[str]:
    seen: set[str] = set()
    out = []
    for i, nm in enumerate(raw):
        s = _LP_BAD.sub("_", nm)
        if not s or s[0].isdigit() or s[0] == "." or s.lower().startswith(("e", "inf")):
            s = f"{prefix}_{s}"
        if s in seen:
            s = f"{s}_{i}"
        seen.add(s)
        out.append(s)
    return out


def _lp_expr(idx, coef, names) -> str:
    parts = []
    for j, a in zip(idx, coef):
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {abs(a)!r} {names[j]}")
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


@dataclass
class Solution:
    status: Status
    objective: float = math.nan
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nodes: int = 0
    backend: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, var: int) -> float:
        return float(self.x[var])

    def values(self, vars_) -> np.ndarray:
        return self.x[np.asarray(vars_, dtype=np.int64)]
