"""Bounded-variable primal simplex and LP-based probing helpers.

Dense two-phase implementation over columns [structural | slack] with
Dantzig pricing, falling back to Bland's rule after a run of
non-improving pivots so termination is guaranteed.  Basic values are
recomputed from the basis factorization every iteration; at the problem
sizes this solver targets that is cheaper than being clever and it keeps
accumulated error out of the picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .model import FEAS_TOL, INT_TOL, BoundBox, Instance

PIVOT_TOL = 1e-9
DEGEN_TOL = 1e-6


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


class BasisStatus(IntEnum):
    BASIC = 0
    AT_LOWER = 1
    AT_UPPER = 2


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    basis_status: np.ndarray | None = None   # length n + m, BasisStatus values
    reduced_costs: np.ndarray | None = None  # length n + m, zero on basics
    iterations: int = 0
    fixed_mask: np.ndarray | None = None     # structural vars fixed at solve time


@dataclass
class DegeneracyInfo:
    degenerate_share: float
    face_ratio: float


def default_iteration_cap(n: int, m: int) -> int:
    return 10 * (n + m) + 1000


class _Simplex:
    def __init__(self, instance: Instance, box: BoundBox,
                 warm_basis: np.ndarray | None, cap: int):
        A, b = instance.dense()
        self.n = instance.num_vars
        self.m = instance.num_rows
        self.N = self.n + self.m
        self.T = np.hstack([A, np.eye(self.m)]) if self.m else np.zeros((0, self.N))
        self.b = b
        self.cost = np.concatenate([instance.c, np.zeros(self.m)])
        self.lo = np.concatenate([box.lower, np.zeros(self.m)])
        self.hi = np.concatenate([box.upper, np.full(self.m, math.inf)])
        self.cap = cap
        self.iterations = 0
        self.bland = False
        self.no_improve = 0
        self.bland_after = 3 * self.N
        self.status = np.full(self.N, BasisStatus.AT_LOWER, dtype=np.int8)
        self.basis: list[int] = []
        self._install_start(warm_basis)

    # ---- setup -----------------------------------------------------

    def _nb_start_value(self, j: int) -> float:
        if self.status[j] == BasisStatus.AT_UPPER:
            if math.isfinite(self.hi[j]):
                return self.hi[j]
            self.status[j] = BasisStatus.AT_LOWER
        if math.isfinite(self.lo[j]):
            return self.lo[j]
        if math.isfinite(self.hi[j]):
            self.status[j] = BasisStatus.AT_UPPER
            return self.hi[j]
        return 0.0

    def _install_start(self, warm: np.ndarray | None) -> None:
        used_warm = False
        if warm is not None and warm.shape == (self.N,):
            cand = [j for j in range(self.N) if warm[j] == BasisStatus.BASIC]
            if len(cand) == self.m:
                B = self.T[:, cand] if self.m else np.zeros((0, 0))
                if self.m == 0 or abs(np.linalg.slogdet(B)[0]) == 1:
                    self.basis = list(cand)
                    self.status = warm.astype(np.int8).copy()
                    used_warm = True
        if not used_warm:
            self.basis = list(range(self.n, self.N))
            self.status = np.full(self.N, BasisStatus.AT_LOWER, dtype=np.int8)
        for j in self.basis:
            self.status[j] = BasisStatus.BASIC

    # ---- core linear algebra ----------------------------------------

    def _recompute(self) -> np.ndarray:
        """Full value vector consistent with the current basis."""
        x = np.zeros(self.N)
        for j in range(self.N):
            if self.status[j] != BasisStatus.BASIC:
                x[j] = self._nb_start_value(j)
        if self.m:
            B = self.T[:, self.basis]
            rhs = self.b - self.T @ x + B @ x[self.basis]
            x[self.basis] = np.linalg.solve(B, rhs)
        return x

    def _duals(self, cost: np.ndarray) -> np.ndarray:
        if not self.m:
            return np.zeros(0)
        B = self.T[:, self.basis]
        return np.linalg.solve(B.T, cost[self.basis])

    def _direction(self, j: int) -> np.ndarray:
        if not self.m:
            return np.zeros(0)
        B = self.T[:, self.basis]
        return np.linalg.solve(B, self.T[:, j])

    # ---- pivoting ----------------------------------------------------

    def _entering(self, red: np.ndarray) -> tuple[int, int] | None:
        """Pick a nonbasic column and a movement sign, or None at optimum."""
        best = None
        best_score = PIVOT_TOL
        for j in range(self.N):
            st = self.status[j]
            if st == BasisStatus.BASIC:
                continue
            if self.hi[j] - self.lo[j] <= INT_TOL:
                continue  # fixed columns never move
            d = red[j]
            sgn = 0
            if st == BasisStatus.AT_LOWER:
                if d < -PIVOT_TOL:
                    sgn = 1
                elif d > PIVOT_TOL and not math.isfinite(self.lo[j]):
                    sgn = -1  # started free at zero, may go down
            else:
                if d > PIVOT_TOL:
                    sgn = -1
                elif d < -PIVOT_TOL and not math.isfinite(self.hi[j]):
                    sgn = 1
            if sgn == 0:
                continue
            if self.bland:
                return j, sgn
            if abs(d) > best_score:
                best_score = abs(d)
                best = (j, sgn)
        return best

    def _ratio_test(self, j: int, sgn: int, x: np.ndarray,
                    phase1: bool) -> tuple[float, int | None, int]:
        """Largest step t for entering column j moving with sign sgn.

        Returns (t, leaving_position_in_basis | None, leaving_bound_side).
        leaving None means the entering column hits its own other bound.
        """
        w = self._direction(j)
        t_best = math.inf
        leave_pos = None
        leave_side = BasisStatus.AT_LOWER
        for pos, i in enumerate(self.basis):
            rate = -sgn * w[pos]
            if abs(rate) <= PIVOT_TOL:
                continue
            xi = x[i]
            below = phase1 and xi < self.lo[i] - FEAS_TOL
            above = phase1 and xi > self.hi[i] + FEAS_TOL
            if rate > 0:  # value increases
                if below:
                    target = self.lo[i]
                elif above:
                    continue  # moving further out never blocks
                else:
                    target = self.hi[i]
                if not math.isfinite(target):
                    continue
                t = (target - xi) / rate
                side = BasisStatus.AT_LOWER if below else BasisStatus.AT_UPPER
            else:  # value decreases
                if above:
                    target = self.hi[i]
                elif below:
                    continue
                else:
                    target = self.lo[i]
                if not math.isfinite(target):
                    continue
                t = (target - xi) / rate
                side = BasisStatus.AT_UPPER if above else BasisStatus.AT_LOWER
            t = max(t, 0.0)
            if t < t_best - PIVOT_TOL or (t < t_best + PIVOT_TOL and
                                          (leave_pos is None or i < self.basis[leave_pos])):
                t_best = t
                leave_pos = pos
                leave_side = side
        own_range = self.hi[j] - self.lo[j]
        if math.isfinite(own_range) and own_range < t_best - PIVOT_TOL:
            return own_range, None, BasisStatus.AT_LOWER
        return t_best, leave_pos, leave_side

    def _pivot(self, j: int, sgn: int, t: float, leave_pos: int | None,
               leave_side: int) -> None:
        if leave_pos is None:
            # bound flip, basis unchanged
            self.status[j] = (BasisStatus.AT_UPPER
                              if self.status[j] == BasisStatus.AT_LOWER
                              else BasisStatus.AT_LOWER)
            return
        i = self.basis[leave_pos]
        self.basis[leave_pos] = j
        self.status[j] = BasisStatus.BASIC
        self.status[i] = leave_side

    # ---- phases ------------------------------------------------------

    def _violation(self, x: np.ndarray) -> float:
        v = 0.0
        for i in self.basis:
            v += max(0.0, self.lo[i] - x[i]) + max(0.0, x[i] - self.hi[i])
        return v

    def _phase1_cost(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.N)
        for i in self.basis:
            if x[i] < self.lo[i] - FEAS_TOL:
                g[i] = -1.0
            elif x[i] > self.hi[i] + FEAS_TOL:
                g[i] = 1.0
        return g

    def run(self) -> LpStatus:
        phase1 = True
        prev = math.inf
        while True:
            if self.iterations >= self.cap:
                return LpStatus.ITERATION_LIMIT
            x = self._recompute()
            if phase1:
                viol = self._violation(x)
                if viol <= FEAS_TOL:
                    phase1 = False
                    prev = math.inf
                    self.no_improve = 0
                    continue
                cost = self._phase1_cost(x)
                objective = viol
            else:
                cost = self.cost
                objective = float(cost @ x)

            if objective > prev - PIVOT_TOL:
                self.no_improve += 1
                if self.no_improve >= self.bland_after:
                    self.bland = True
            else:
                self.no_improve = 0
            prev = objective

            y = self._duals(cost)
            red = cost - (self.T.T @ y if self.m else 0.0)
            choice = self._entering(red)
            if choice is None:
                if phase1:
                    return LpStatus.INFEASIBLE
                return LpStatus.OPTIMAL
            j, sgn = choice
            t, leave_pos, leave_side = self._ratio_test(j, sgn, x, phase1)
            if not math.isfinite(t):
                if phase1:
                    raise ArithmeticError("phase-1 ray; numerical trouble")
                return LpStatus.UNBOUNDED
            self._pivot(j, sgn, t, leave_pos, leave_side)
            self.iterations += 1

    # ---- extraction ----------------------------------------------------

    def result(self, status: LpStatus, box: BoundBox) -> LpResult:
        fixed = (box.upper - box.lower) <= INT_TOL
        if status is not LpStatus.OPTIMAL:
            return LpResult(status, iterations=self.iterations,
                            basis_status=self.status.copy(),
                            fixed_mask=fixed)
        x = self._recompute()
        y = self._duals(self.cost)
        red = self.cost - (self.T.T @ y if self.m else 0.0)
        red[self.basis] = 0.0  # exactly zero on the basis
        xs = x[:self.n].copy()
        np.clip(xs, box.lower, box.upper, out=xs)
        return LpResult(LpStatus.OPTIMAL, x=xs,
                        objective=float(self.cost[:self.n] @ xs),
                        basis_status=self.status.copy(),
                        reduced_costs=red,
                        iterations=self.iterations,
                        fixed_mask=fixed)


def solve_lp(instance: Instance, box: BoundBox,
             warm_basis: np.ndarray | None = None,
             iteration_cap: int | None = None) -> LpResult:
    """Solve the LP relaxation over `box`.

    Deterministic for identical inputs.  `warm_basis` takes a previous
    result's basis_status; an unusable one is silently ignored.
    """
    if box.is_empty():
        return LpResult(LpStatus.INFEASIBLE)
    cap = iteration_cap if iteration_cap is not None else \
        default_iteration_cap(instance.num_vars, instance.num_rows)
    try:
        sx = _Simplex(instance, box, warm_basis, cap)
        status = sx.run()
    except np.linalg.LinAlgError:
        if warm_basis is not None:
            return solve_lp(instance, box, None, iteration_cap)
        raise
    return sx.result(status, box)


def measure_degeneracy(result: LpResult, num_rows: int) -> DegeneracyInfo:
    """Dual-degeneracy share and optimal-face size ratio.

    Counts structural unfixed columns only: a fixed variable cannot move
    off its bound, so its reduced cost says nothing about alternative
    optima.  share = degenerate nonbasic / nonbasic; face_ratio =
    (basic + degenerate nonbasic) / max(1, num_rows).  Both are NaN-free.
    """
    if result.basis_status is None or result.reduced_costs is None:
        raise ValueError("degeneracy needs an optimal LP result")
    n = len(result.fixed_mask) if result.fixed_mask is not None else 0
    st = result.basis_status[:n]
    red = result.reduced_costs[:n]
    unfixed = ~result.fixed_mask
    nonbasic = (st != BasisStatus.BASIC) & unfixed
    degen = nonbasic & (np.abs(red) <= DEGEN_TOL)
    n_nonbasic = int(nonbasic.sum())
    n_degen = int(degen.sum())
    n_basic = int((st == BasisStatus.BASIC).sum())
    # no nonbasic columns left: vacuously every one of them is degenerate
    share = 1.0 if n_nonbasic == 0 else n_degen / n_nonbasic
    ratio = (n_basic + n_degen) / max(1, num_rows)
    return DegeneracyInfo(degenerate_share=share, face_ratio=ratio)


def strong_branch(instance: Instance, box: BoundBox, var: int,
                  parent: LpResult, stats=None,
                  ) -> tuple[float | None, float | None, int]:
    """Probe both children of branching on `var` at the parent LP value.

    Returns (down objective, up objective, simplex iterations); None
    stands for an infeasible child.  When `stats` is given, its
    sb_no_improvement / sb_objective_changed counters are bumped per
    child: equal objective within 1e-6, or infeasibility, counts as no
    improvement.
    """
    assert parent.x is not None and parent.objective is not None
    frac = float(parent.x[var])
    iters = 0
    objs: list[float | None] = []
    for child_hi in (True, False):
        child = box.copy()
        if child_hi:
            child.upper[var] = math.floor(frac + INT_TOL)
        else:
            child.lower[var] = math.ceil(frac - INT_TOL)
        if child.is_empty():
            objs.append(None)
            continue
        res = solve_lp(instance, child, warm_basis=parent.basis_status)
        iters += res.iterations
        objs.append(res.objective if res.status is LpStatus.OPTIMAL else None)
    if stats is not None:
        for obj in objs:
            if obj is None or abs(obj - parent.objective) <= 1e-6:
                stats.sb_no_improvement += 1
            else:
                stats.sb_objective_changed += 1
    return objs[0], objs[1], iters
