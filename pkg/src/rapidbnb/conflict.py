"""Conflict graphs over bound changes and no-good learning.

A search records every accepted bound change on a trail.  Deductions
point back at the bound changes their propagator actually read, plus the
constraint that fired; branching decisions have no antecedents.  When a
failure is recorded, resolving backwards from its antecedents until a
single bound change of the deepest level remains yields the first unique
implication point cut; negating the cut gives a bound disjunction that
every feasible point of the searched problem satisfies.

Two bookkeeping details matter for soundness:

* Level-0 bound changes hold unconditionally in the searched scope,
  so their literals are dropped from cuts (standard strengthening).
* Each inference step used by the proof names a constraint id.  If any
  of those ids is conditionally valid (an objective-cutoff pseudo-reason
  or a constraint derived from one), the resulting cut only holds for
  improving solutions; callers get a `tainted` flag and must keep such
  cuts out of stores that promise validity for all feasible points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import BoundBox, Row, Side

BRANCH_REASON = -1
CUTOFF_REASON = -2


@dataclass
class BoundChange:
    var: int
    side: Side
    value: float
    level: int
    reason: int                      # constraint id, BRANCH_REASON, or CUTOFF_REASON
    antecedents: tuple[int, ...]     # trail positions this deduction read
    position: int
    old_value: float                 # bound before the change, for undo
    shadowed: int | None             # previous trail position on (var, side)


@dataclass
class Failure:
    reason: int
    antecedents: tuple[int, ...]
    level: int


class ConflictGraph:
    """Trail of bound changes plus the implication structure over them."""

    def __init__(self) -> None:
        self.changes: list[BoundChange] = []
        self.failure: Failure | None = None
        self._last: dict[tuple[int, Side], int] = {}

    def __len__(self) -> int:
        return len(self.changes)

    def position_of(self, var: int, side: Side) -> int | None:
        """Latest trail position for a bound, None if still at its start value."""
        return self._last.get((var, side))

    def resolve(self, bounds: Iterable[tuple[int, Side]]) -> tuple[int, ...]:
        out = []
        for var, side in bounds:
            pos = self._last.get((var, side))
            if pos is not None:
                out.append(pos)
        return tuple(sorted(set(out)))

    def record(self, var: int, side: Side, value: float, level: int,
               reason: int, antecedents: tuple[int, ...],
               old_value: float) -> int:
        pos = len(self.changes)
        key = (var, side)
        self.changes.append(BoundChange(var, side, float(value), level, reason,
                                        antecedents, pos, float(old_value),
                                        self._last.get(key)))
        self._last[key] = pos
        return pos

    def record_failure(self, reason: int, antecedents: tuple[int, ...],
                       level: int) -> None:
        self.failure = Failure(reason, antecedents, level)

    def rewind_to(self, length: int, box: BoundBox | None = None) -> None:
        """Pop trail entries beyond `length`, optionally undoing the box."""
        while len(self.changes) > length:
            ch = self.changes.pop()
            key = (ch.var, ch.side)
            if ch.shadowed is None:
                del self._last[key]
            else:
                self._last[key] = ch.shadowed
            if box is not None:
                box.set_raw(ch.var, ch.side, ch.old_value)
        self.failure = None


class TrailRecorder:
    """Couples a BoundBox with a ConflictGraph for one search.

    Propagators talk to this object: `apply` tightens the box and, when
    the bound actually moved, records the deduction with its reason.
    """

    def __init__(self, box: BoundBox, graph: ConflictGraph | None = None):
        self.box = box
        self.graph = graph if graph is not None else ConflictGraph()
        self.level = 0

    def mark(self) -> int:
        return len(self.graph)

    def branch(self, var: int, side: Side, value: float, level: int) -> bool:
        self.level = level
        old = self.box.get(var, side)
        if not self.box.tighten(var, side, value):
            return False
        self.graph.record(var, side, value, level, BRANCH_REASON, (), old)
        return True

    def apply(self, var: int, side: Side, value: float, reason: int,
              reason_bounds: Iterable[tuple[int, Side]]) -> bool:
        old = self.box.get(var, side)
        if not self.box.tighten(var, side, value):
            return False
        ants = self.graph.resolve(reason_bounds)
        self.graph.record(var, side, value, self.level, reason, ants, old)
        return True

    def fail(self, reason: int, reason_bounds: Iterable[tuple[int, Side]]) -> None:
        self.graph.record_failure(reason, self.graph.resolve(reason_bounds),
                                  self.level)

    def rewind_to_mark(self, mark: int) -> None:
        self.graph.rewind_to(mark, self.box)


@dataclass(frozen=True)
class BoundDisjunction:
    """`or` over bound literals: x_i >= lam for (i, lam) in lower_lits,
    x_i <= mu for (i, mu) in upper_lits.  Index sets are disjoint and the
    literal values are integral.  Empty means unsatisfiable everywhere,
    which callers use as an infeasibility proof, never as a constraint.
    """

    lower_lits: tuple[tuple[int, float], ...]
    upper_lits: tuple[tuple[int, float], ...]

    @property
    def size(self) -> int:
        return len(self.lower_lits) + len(self.upper_lits)

    def variables(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.lower_lits) + \
            tuple(v for v, _ in self.upper_lits)

    def literals(self) -> tuple[tuple[int, Side, float], ...]:
        lows = tuple((v, Side.LOWER, val) for v, val in self.lower_lits)
        ups = tuple((v, Side.UPPER, val) for v, val in self.upper_lits)
        return lows + ups

    def __str__(self) -> str:
        parts = [f"x{v} >= {val:g}" for v, val in self.lower_lits]
        parts += [f"x{v} <= {val:g}" for v, val in self.upper_lits]
        return " or ".join(parts) if parts else "<empty>"


def check_disjunction(d: BoundDisjunction, point: Sequence[float],
                      tol: float = 1e-6) -> bool:
    """True when the point satisfies at least one literal."""
    for v, val in d.lower_lits:
        if point[v] >= val - tol:
            return True
    for v, val in d.upper_lits:
        if point[v] <= val + tol:
            return True
    return False


@dataclass
class LearnedConstraint:
    """A stored conflict: always the disjunction, plus an equivalent
    single linear row when the literal values allow one."""

    disjunction: BoundDisjunction
    linear: Row | None = None
    tainted: bool = False

    @property
    def length(self) -> int:
        return self.disjunction.size

    @property
    def form(self) -> str:
        return "linear" if self.linear is not None else "disjunction"


@dataclass
class ConflictAudit:
    """Creation-time snapshot used by validity and structure checks."""

    literals: tuple[tuple[int, Side, float, int], ...]  # (+ source level)
    deepest_level: int
    node_bounds: dict[int, tuple[float, float]]
    tainted: bool
    origin: str


@dataclass
class LearnedRecord:
    """One constraint the solver kept, with the box its scope covered.

    `scope` is "global" or "local"; the bounds are copies taken at attach
    time, so a validity audit can replay exactly what the constraint was
    claimed to hold over.
    """

    scope: str
    constraint: "LearnedConstraint"
    box_lower: np.ndarray
    box_upper: np.ndarray


@dataclass
class AnalysisOutcome:
    disjunction: BoundDisjunction | None
    tainted: bool
    used_reasons: frozenset[int]
    root_failure: bool = False
    aborted_continuous: bool = False
    trivial: bool = False
    audit: ConflictAudit | None = None


def analyze_1uip(graph: ConflictGraph, current_level: int,
                 int_mask: np.ndarray,
                 tainted_ids: frozenset[int] | set[int] = frozenset(),
                 box: BoundBox | None = None) -> AnalysisOutcome:
    """First-UIP cut for the recorded failure.

    `current_level` is only a hint; resolution happens at the deepest
    level actually present among the failure's antecedents, so stale
    failures coming out of replayed trails analyze correctly too.
    """
    fail = graph.failure
    if fail is None:
        raise ValueError("no failure recorded")
    used: set[int] = {fail.reason}
    tainted = fail.reason == CUTOFF_REASON or fail.reason in tainted_ids

    conflict: set[int] = set(fail.antecedents)
    # literals implied at level 0 hold everywhere in the scope
    conflict = {p for p in conflict if graph.changes[p].level > 0}
    if not conflict:
        return AnalysisOutcome(None, tainted, frozenset(used), root_failure=True)

    deepest = max(graph.changes[p].level for p in conflict)
    while True:
        at_deepest = [p for p in conflict if graph.changes[p].level == deepest]
        if len(at_deepest) <= 1:
            break
        # the branching is the oldest entry of its level, so a propagation
        # is always available while two entries remain
        expandable = [q for q in at_deepest
                      if graph.changes[q].reason != BRANCH_REASON]
        if not expandable:
            break
        p = max(expandable)
        ch = graph.changes[p]
        conflict.discard(p)
        used.add(ch.reason)
        if ch.reason == CUTOFF_REASON or ch.reason in tainted_ids:
            tainted = True
        for q in ch.antecedents:
            if graph.changes[q].level > 0:
                conflict.add(q)

    # negate the cut; merge per (var, side) keeping the weakest literal
    lower: dict[int, tuple[float, int]] = {}
    upper: dict[int, tuple[float, int]] = {}
    for p in sorted(conflict):
        ch = graph.changes[p]
        if not int_mask[ch.var]:
            return AnalysisOutcome(None, tainted, frozenset(used),
                                   aborted_continuous=True)
        if ch.side is Side.UPPER:
            lam = ch.value + 1.0  # not(x <= v)  ==  x >= v + 1
            cur = lower.get(ch.var)
            lower[ch.var] = ((lam, ch.level) if cur is None else
                             (min(cur[0], lam), max(cur[1], ch.level)))
        else:
            mu = ch.value - 1.0  # not(x >= v)  ==  x <= v - 1
            cur = upper.get(ch.var)
            upper[ch.var] = ((mu, ch.level) if cur is None else
                             (max(cur[0], mu), max(cur[1], ch.level)))

    if set(lower) & set(upper):
        return AnalysisOutcome(None, tainted, frozenset(used), trivial=True)

    disj = BoundDisjunction(
        tuple((v, val) for v, (val, _) in sorted(lower.items())),
        tuple((v, val) for v, (val, _) in sorted(upper.items())))
    audit = None
    if box is not None:
        audit_lits = tuple(
            [(v, Side.LOWER, val, lvl) for v, (val, lvl) in sorted(lower.items())] +
            [(v, Side.UPPER, val, lvl) for v, (val, lvl) in sorted(upper.items())])
        watched = {v: (float(box.lower[v]), float(box.upper[v]))
                   for v in disj.variables()}
        audit = ConflictAudit(audit_lits, deepest, watched, tainted,
                              origin="")
    return AnalysisOutcome(disj, tainted, frozenset(used), audit=audit)


def to_knapsack(d: BoundDisjunction, lower: np.ndarray,
                upper: np.ndarray) -> Row | None:
    """Equivalent linear row, when one exists.

    The disjunction fails exactly on the box points with x_i = u_i for
    every upper-set index and x_i = l_i for every lower-set index; that
    happens precisely when each upper literal sits at u_i - 1 and each
    lower literal at l_i + 1 against the reference box.  Then
    `sum_{upper set} x_i - sum_{lower set} x_i <= sum u_i - sum l_i - 1`
    excludes the same single corner and nothing else.
    """
    if d.size == 0:
        return None
    cols: list[int] = []
    coefs: list[float] = []
    rhs = -1.0
    for v, lam in d.lower_lits:
        if lam != lower[v] + 1.0:
            return None
        cols.append(v)
        coefs.append(-1.0)
        rhs -= lower[v]
    for v, mu in d.upper_lits:
        if mu != upper[v] - 1.0:
            return None
        cols.append(v)
        coefs.append(1.0)
        rhs += upper[v]
    return Row(cols, coefs, rhs, name="conflict")


def upgrade_singleton(d: BoundDisjunction, box: BoundBox) -> bool:
    """Apply a one-literal disjunction as a plain bound tightening.

    Raises EmptyBoxError when the bound crosses, which callers treat as
    an infeasibility proof for the box's scope.
    """
    if d.size != 1:
        raise ValueError("only single-literal disjunctions upgrade to bounds")
    if d.lower_lits:
        v, val = d.lower_lits[0]
        return box.tighten(v, Side.LOWER, val)
    v, val = d.upper_lits[0]
    return box.tighten(v, Side.UPPER, val)
