"""Propagation-only depth-first search over pure integer scopes.

This is the fast companion search: no LP anywhere, just propagation to a
fixpoint per node, bounding against the box optimum of the objective,
conflict analysis on every pruned node, and inference-guided branching
that dives toward the pseudo solution.  It returns whatever it learned:
short conflicts, scope-valid bound tightenings, possibly a solution, and
its inference statistics.

Conflicts whose proof leans on the objective cutoff hold only for
improving solutions.  They still propagate inside this search (that is
sound while optimizing) but they are never returned to the caller and
never tighten the scope box; see the `tainted` tracking in `conflict`.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .conflict import (CUTOFF_REASON, ConflictAudit, ConflictGraph,
                       LearnedConstraint, TrailRecorder, analyze_1uip,
                       to_knapsack)
from .model import FEAS_TOL, BoundBox, EmptyBoxError, Instance, Side
from .propagation import Outcome, Propagator


class AllFixedError(Exception):
    """Branching was asked for but every integer variable is fixed."""


class CpStatus(Enum):
    NODE_LIMIT = "node-limit-reached"
    OPTIMAL = "solved-optimal"
    INFEASIBLE = "solved-infeasible"


@dataclass
class CpConfig:
    node_limit: int
    max_conflict_frac: float = 0.05
    seed: int = 0
    incumbent_bound: float = math.inf


class InferenceStats:
    """Deductions triggered per (variable, value, direction) branching.

    `base` is an optional read-only baseline (a caller's accumulated
    statistics); scores read through it, while `counts` holds only what
    this object accumulated itself, so merging back never double counts.
    """

    DOWN = 0
    UP = 1

    def __init__(self, base: "InferenceStats | None" = None):
        self.counts: dict[tuple[int, int, int], int] = {}
        self.totals: dict[int, int] = {}
        self.base = base

    def add(self, var: int, value: int, direction: int, amount: int = 1) -> None:
        if amount == 0:
            return
        key = (var, value, direction)
        self.counts[key] = self.counts.get(key, 0) + amount
        self.totals[var] = self.totals.get(var, 0) + amount

    def total(self, var: int) -> int:
        own = self.totals.get(var, 0)
        return own + (self.base.total(var) if self.base is not None else 0)

    def merge(self, other: "InferenceStats") -> None:
        """Fold the other object's own counts into this one."""
        for (var, value, direction), k in other.counts.items():
            self.add(var, value, direction, k)


@dataclass
class CpOutcome:
    status: CpStatus
    conflicts: list[LearnedConstraint]
    box: BoundBox
    solution: np.ndarray | None
    solution_value: float
    inference: InferenceStats
    nodes: int
    audits: list[ConflictAudit] = field(default_factory=list)


def node_limit_from_iters(iter_lp: int) -> int:
    """Probe budget coupled to how hard the LP side has worked so far."""
    return min(5000, max(500, int(iter_lp)))


def pseudo_solution(box: BoundBox, c: np.ndarray) -> np.ndarray:
    """Box optimum of the objective: upper bound under negative cost,
    lower bound otherwise (zero cost rests at the lower bound)."""
    return np.where(c < 0, box.upper, box.lower).astype(float)


def select_inference_branching(box: BoundBox, int_mask: np.ndarray,
                               stats: InferenceStats, pseudo: np.ndarray,
                               rng: random.Random) -> tuple[int, int]:
    """Unfixed integer variable with the best inference record.

    Ties fall to the rng so repeated probes explore differently under
    different seeds but identically under the same seed.  The returned
    value v is the pseudo-solution value clamped into [l, u-1], so the
    child containing the pseudo solution is always well defined.
    """
    cands = [j for j in range(len(pseudo))
             if int_mask[j] and box.upper[j] - box.lower[j] > 0.5]
    if not cands:
        raise AllFixedError
    best = max(stats.total(j) for j in cands)
    ties = [j for j in cands if stats.total(j) == best]
    var = ties[0] if len(ties) == 1 else rng.choice(ties)
    v = int(min(max(pseudo[var], box.lower[var]), box.upper[var] - 1))
    return var, v


def _rows_satisfied(instance: Instance, x: np.ndarray) -> bool:
    return all(row.activity(x) <= row.rhs + FEAS_TOL for row in instance.rows)


def cp_search(instance: Instance, scope_box: BoundBox, config: CpConfig,
              extra_constraints: tuple[tuple[int, LearnedConstraint], ...] = (),
              seed_inference: InferenceStats | None = None) -> CpOutcome:
    """Run the probe on `instance` restricted to `scope_box`.

    `extra_constraints` are (id, constraint) pairs already known valid
    for the scope (for example the caller's globally learned ones).  Two
    runs with equal inputs and seeds produce identical outcomes.
    """
    n = instance.num_vars
    int_mask = instance.integer_mask
    if not bool(int_mask.all()):
        raise ValueError("the probe search handles pure integer scopes only")
    c = instance.c

    box = scope_box.copy()
    graph = ConflictGraph()
    rec = TrailRecorder(box, graph)
    prop = Propagator(instance)
    next_cid = instance.num_rows
    for cid, con in extra_constraints:
        prop.add_constraint(cid, con)
        next_cid = max(next_cid, cid + 1)

    rng = random.Random(config.seed)
    stats = InferenceStats(base=seed_inference)
    cap = math.ceil(config.max_conflict_frac * n)
    conflicts: list[LearnedConstraint] = []
    audits: list[ConflictAudit] = []
    tainted_ids: set[int] = set()
    global_fix: dict[tuple[int, Side], float] = {}
    cbar = float(config.incumbent_bound)
    best: np.ndarray | None = None
    scope_infeasible = False
    nodes = 0
    # stack entries: (trail mark of the parent, level, branch or None)
    # branch = (var, side, bound value, branch value, direction)
    stack: list[tuple[int, int, tuple | None]] = [(0, 0, None)]

    def apply_global_fix() -> bool:
        for (v, s), val in global_fix.items():
            try:
                box.tighten(v, s, val)
            except EmptyBoxError:
                return False
        return True

    def handle_failure() -> bool:
        """Analyze the recorded failure; False stops the whole search."""
        nonlocal next_cid, scope_infeasible
        out = analyze_1uip(graph, rec.level, int_mask, tainted_ids, box=box)
        if out.root_failure:
            # nothing (left) in the scope, or nothing improving if tainted
            if not out.tainted:
                scope_infeasible = True
            return False
        d = out.disjunction
        if d is None:
            return True
        out.audit.origin = "cp"
        audits.append(out.audit)
        if d.size > cap:
            return True
        cid = next_cid
        next_cid += 1
        lc = LearnedConstraint(d, to_knapsack(d, scope_box.lower, scope_box.upper),
                               tainted=out.tainted)
        prop.add_constraint(cid, lc)
        if out.tainted:
            tainted_ids.add(cid)
            return True
        conflicts.append(lc)
        if d.size == 1:
            (v, s, val), = d.literals()
            if (s is Side.LOWER and val > scope_box.upper[v] + FEAS_TOL) or \
               (s is Side.UPPER and val < scope_box.lower[v] - FEAS_TOL):
                scope_infeasible = True
                return False
            key = (v, s)
            cur = global_fix.get(key)
            if cur is None or (val > cur if s is Side.LOWER else val < cur):
                global_fix[key] = val
        return True

    while stack and nodes < config.node_limit:
        mark, level, branch = stack.pop()
        nodes += 1
        rec.rewind_to_mark(mark)
        rec.level = level
        if not apply_global_fix():
            continue
        if branch is not None:
            var, side, bound_value, bval, direction = branch
            try:
                if not rec.branch(var, side, bound_value, level):
                    continue
            except EmptyBoxError:
                continue  # incompatible with bounds learned meanwhile
        res = prop.to_fixpoint(box, rec)
        if branch is not None:
            stats.add(var, bval, direction, len(res.deductions))
        if res.outcome is Outcome.INFEASIBLE:
            if not handle_failure():
                stack.clear()
            continue

        xbar = pseudo_solution(box, c)
        obj = float(c @ xbar)
        if obj >= cbar - FEAS_TOL:  # cannot improve here, ties included
            reasons = [(j, Side.LOWER if c[j] > 0 else Side.UPPER)
                       for j in range(n) if c[j] != 0.0]
            rec.fail(CUTOFF_REASON, reasons)
            if not handle_failure():
                stack.clear()
            continue
        if _rows_satisfied(instance, xbar):
            best = xbar.copy()
            cbar = obj
            continue

        try:
            var, v = select_inference_branching(box, int_mask, stats, xbar, rng)
        except AllFixedError:
            continue  # fixed point violates a row only within tolerance
        mark2 = rec.mark()
        down = (mark2, level + 1, (var, Side.UPPER, float(v), v, InferenceStats.DOWN))
        up = (mark2, level + 1, (var, Side.LOWER, float(v + 1), v, InferenceStats.UP))
        if xbar[var] <= v:
            stack.extend((up, down))   # dive into the half holding x-bar
        else:
            stack.extend((down, up))

    if stack and nodes >= config.node_limit:
        status = CpStatus.NODE_LIMIT
    elif scope_infeasible:
        status = CpStatus.INFEASIBLE
    elif best is not None:
        status = CpStatus.OPTIMAL
    else:
        status = CpStatus.INFEASIBLE

    final = scope_box.copy()
    if not scope_infeasible:
        try:
            for ch in graph.changes:
                if ch.level != 0:
                    break
                final.tighten(ch.var, ch.side, ch.value)
            for (v, s), val in global_fix.items():
                final.tighten(v, s, val)
        except EmptyBoxError:
            # two individually valid facts that cross: the scope is empty
            scope_infeasible = True
            if best is None:
                status = CpStatus.INFEASIBLE

    return CpOutcome(status=status, conflicts=conflicts, box=final,
                     solution=best,
                     solution_value=cbar if best is not None else math.inf,
                     inference=stats, nodes=nodes, audits=audits)
