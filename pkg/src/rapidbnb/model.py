"""Problem data: immutable integer programs and mutable bound boxes.

Everything downstream works on one normal form: minimize c.x subject to
rows `sum(coefs * x[cols]) <= rhs`, variable bounds `l <= x <= u`, and a
set of integer variables.  Equality and >= constraints are rewritten into
this form at construction time.
"""

from __future__ import annotations

import enum
import math
from typing import Iterable, Sequence

import numpy as np

FEAS_TOL = 1e-6
INT_TOL = 1e-6
INF = math.inf


def fmt_g(x: float) -> str:
    """Stable short float rendering for logs and reports."""
    return "%.12g" % float(x)


class ModelError(ValueError):
    """Ill-formed problem data."""


class EmptyBoxError(ModelError):
    """A bound tightening crossed the opposite bound."""

    def __init__(self, var: int, side: "Side", value: float):
        super().__init__(f"tightening makes variable {var} empty "
                         f"({side.name.lower()} -> {value})")
        self.var = var
        self.side = side
        self.value = value


class Side(enum.IntEnum):
    LOWER = 0
    UPPER = 1


class RowKind(enum.Enum):
    LINEAR = "linear"
    KNAPSACK = "knapsack"
    SETCOVER = "setcover"


class ProblemClass(enum.Enum):
    LP = "LP"
    IP = "IP"
    BP = "BP"
    MIP = "MIP"


class Row:
    """One constraint `sum(coefs[k] * x[cols[k]]) <= rhs`.

    `kind` is assigned by structural classification against the global
    bounds; knapsack rows additionally carry their integer weights sorted
    heaviest first, which the knapsack propagator relies on.
    """

    __slots__ = ("cols", "coefs", "rhs", "name", "kind", "weight_order")

    def __init__(self, cols: Sequence[int], coefs: Sequence[float], rhs: float,
                 name: str = ""):
        if len(cols) != len(coefs):
            raise ModelError("row column/coefficient length mismatch")
        if len(set(cols)) != len(cols):
            raise ModelError(f"row {name or '<unnamed>'} repeats a column")
        # zero terms carry no information and would break propagation
        kept = [(int(j), float(a)) for j, a in zip(cols, coefs) if a != 0.0]
        self.cols = tuple(j for j, _ in kept)
        self.coefs = tuple(a for _, a in kept)
        self.rhs = float(rhs)
        self.name = name
        self.kind = RowKind.LINEAR
        self.weight_order: tuple[int, ...] = ()

    def activity(self, x: np.ndarray) -> float:
        return sum(a * x[j] for j, a in zip(self.cols, self.coefs))

    def __repr__(self) -> str:
        terms = " + ".join(f"{a:g}*x{j}" for j, a in zip(self.cols, self.coefs))
        return f"Row({terms} <= {self.rhs:g})"


def _is_binary(j: int, lower: np.ndarray, upper: np.ndarray,
               int_mask: np.ndarray) -> bool:
    return bool(int_mask[j]) and lower[j] == 0.0 and upper[j] == 1.0


def classify_row(row: Row, lower: np.ndarray, upper: np.ndarray,
                 int_mask: np.ndarray) -> RowKind:
    """Structural row classification against the global box.

    knapsack: all binary columns, positive integer coefficients.
    setcover: all binary columns, every coefficient -1, rhs -1
              (the <= normal form of `sum x >= 1`).
    """
    if not row.cols:
        return RowKind.LINEAR
    if not all(_is_binary(j, lower, upper, int_mask) for j in row.cols):
        return RowKind.LINEAR
    if all(a == -1.0 for a in row.coefs) and row.rhs == -1.0:
        return RowKind.SETCOVER
    if all(a > 0 and abs(a - round(a)) <= INT_TOL for a in row.coefs):
        return RowKind.KNAPSACK
    return RowKind.LINEAR


class Instance:
    """Minimization problem over the normal form, immutable once built.

    Integer variables must come with finite bounds; they are rounded
    inward to integers here so every later bound value on them stays
    integral.  Continuous variables may be unbounded.
    """

    def __init__(self, objective: Sequence[float], rows: Iterable[Row],
                 lower: Sequence[float], upper: Sequence[float],
                 integer_set: Iterable[int],
                 names: Sequence[str] | None = None, name: str = ""):
        self.c = np.asarray(objective, dtype=float).copy()
        n = self.c.shape[0]
        self.lower = np.asarray(lower, dtype=float).copy()
        self.upper = np.asarray(upper, dtype=float).copy()
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ModelError("objective/bound dimension mismatch")
        self.integer_mask = np.zeros(n, dtype=bool)
        for j in integer_set:
            if not 0 <= j < n:
                raise ModelError(f"integer index {j} out of range")
            self.integer_mask[j] = True
        self.name = name
        if names is None:
            names = tuple(f"x{j}" for j in range(n))
        if len(names) != n:
            raise ModelError("variable name count mismatch")
        self.var_names = tuple(names)

        for j in range(n):
            if self.integer_mask[j]:
                if not (math.isfinite(self.lower[j]) and math.isfinite(self.upper[j])):
                    raise ModelError(
                        f"integer variable {self.var_names[j]} needs finite bounds")
                self.lower[j] = math.ceil(self.lower[j] - INT_TOL)
                self.upper[j] = math.floor(self.upper[j] + INT_TOL)
            if self.lower[j] > self.upper[j] + FEAS_TOL:
                raise ModelError(
                    f"variable {self.var_names[j]} has empty domain "
                    f"[{self.lower[j]:g}, {self.upper[j]:g}]")

        self.rows = tuple(rows)
        for row in self.rows:
            for j in row.cols:
                if not 0 <= j < n:
                    raise ModelError(f"row {row.name!r} references column {j}")
            row.kind = classify_row(row, self.lower, self.upper, self.integer_mask)
            if row.kind is RowKind.KNAPSACK:
                weights = [int(round(a)) for a in row.coefs]
                order = sorted(range(len(weights)), key=lambda k: -weights[k])
                row.weight_order = tuple(order)

        for arr in (self.c, self.lower, self.upper, self.integer_mask):
            arr.flags.writeable = False
        self._dense: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def integer_indices(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.integer_mask))

    def root_box(self) -> "BoundBox":
        return BoundBox(self.lower, self.upper)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows as a dense (A, b) pair, cached."""
        if self._dense is None:
            A = np.zeros((self.num_rows, self.num_vars))
            b = np.zeros(self.num_rows)
            for i, row in enumerate(self.rows):
                for j, a in zip(row.cols, row.coefs):
                    A[i, j] = a
                b[i] = row.rhs
            A.flags.writeable = False
            b.flags.writeable = False
            self._dense = (A, b)
        return self._dense

    def check_point(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        """Feasibility of a point: rows, global bounds, integrality."""
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        for row in self.rows:
            if row.activity(x) > row.rhs + tol:
                return False
        ints = x[self.integer_mask]
        return bool(np.all(np.abs(ints - np.round(ints)) <= INT_TOL))

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def __repr__(self) -> str:
        return (f"Instance({self.name or '<unnamed>'}: {self.num_vars} vars, "
                f"{self.num_rows} rows, {int(self.integer_mask.sum())} integer)")


_SENSES = ("<=", ">=", "==")


def from_inequalities(objective: Sequence[float],
                      constraints: Iterable[tuple[Sequence[int], Sequence[float], str, float]],
                      lower: Sequence[float], upper: Sequence[float],
                      integer_set: Iterable[int],
                      names: Sequence[str] | None = None,
                      name: str = "") -> Instance:
    """Build an Instance from rows with explicit senses.

    `>=` rows are negated into `<=` form; `==` rows become two opposing
    `<=` rows.  Row order is preserved, with equality halves adjacent.
    """
    rows: list[Row] = []
    for cols, coefs, sense, rhs in constraints:
        if sense not in _SENSES:
            raise ModelError(f"unknown row sense {sense!r}")
        if sense in ("<=", "=="):
            rows.append(Row(cols, coefs, rhs))
        if sense in (">=", "=="):
            rows.append(Row(cols, [-a for a in coefs], -rhs))
    return Instance(objective, rows, lower, upper, integer_set, names, name)


def classify(instance: Instance) -> ProblemClass:
    """Most specific problem class.

    All-integer problems are IP, or BP when every domain is {0,1}; no
    integers means LP; anything else is MIP.  The degenerate zero-variable
    problem classifies as LP (no integrality present).
    """
    n = instance.num_vars
    n_int = int(instance.integer_mask.sum())
    if n_int == 0:
        return ProblemClass.LP
    if n_int == n:
        if all(_is_binary(j, instance.lower, instance.upper, instance.integer_mask)
               for j in range(n)):
            return ProblemClass.BP
        return ProblemClass.IP
    return ProblemClass.MIP


class BoundBox:
    """Mutable working bounds for one search, plus a change counter.

    `generation` increases on every accepted tightening, so callers can
    cheaply detect whether anything moved between two points in time.
    """

    __slots__ = ("lower", "upper", "generation")

    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        self.lower = np.array(lower, dtype=float)
        self.upper = np.array(upper, dtype=float)
        self.generation = 0

    def copy(self) -> "BoundBox":
        box = BoundBox(self.lower, self.upper)
        box.generation = self.generation
        return box

    @property
    def num_vars(self) -> int:
        return self.lower.shape[0]

    def is_empty(self, tol: float = FEAS_TOL) -> bool:
        return bool(np.any(self.lower > self.upper + tol))

    def is_fixed(self, j: int, tol: float = INT_TOL) -> bool:
        return self.upper[j] - self.lower[j] <= tol

    def width(self, j: int) -> float:
        return self.upper[j] - self.lower[j]

    def get(self, j: int, side: Side) -> float:
        return float(self.lower[j] if side is Side.LOWER else self.upper[j])

    def tighten(self, var: int, side: Side, value: float) -> bool:
        """Apply a bound if strictly tighter; reject a crossing one.

        Improvements within the feasibility tolerance are dropped so
        propagation on continuous variables cannot creep forever.  Values
        inside the tolerance band beyond the opposite bound are clamped
        onto it instead of raising.
        """
        value = float(value)
        if side is Side.LOWER:
            if value <= self.lower[var] + FEAS_TOL:
                return False
            if value > self.upper[var]:
                if value > self.upper[var] + FEAS_TOL:
                    raise EmptyBoxError(var, side, value)
                value = float(self.upper[var])
                if value <= self.lower[var] + FEAS_TOL:
                    return False
            self.lower[var] = value
        else:
            if value >= self.upper[var] - FEAS_TOL:
                return False
            if value < self.lower[var]:
                if value < self.lower[var] - FEAS_TOL:
                    raise EmptyBoxError(var, side, value)
                value = float(self.lower[var])
                if value >= self.upper[var] - FEAS_TOL:
                    return False
            self.upper[var] = value
        self.generation += 1
        return True

    def set_raw(self, var: int, side: Side, value: float) -> None:
        """Unchecked write, for undo stacks only."""
        if side is Side.LOWER:
            self.lower[var] = value
        else:
            self.upper[var] = value

    def __repr__(self) -> str:
        pairs = ", ".join(f"[{l:g},{u:g}]" for l, u in zip(self.lower, self.upper))
        return f"BoundBox({pairs})"
