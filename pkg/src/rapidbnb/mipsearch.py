"""LP-based branch and bound with conflict learning and the probe hook.

Node selection is best bound with depth-first plunging.  Node state is
not stored as boxes: every node keeps its branching path and replaying
it (one propagation round per level) rebuilds the box, which also gives
conflict analysis correct decision levels for free.

Learned scopes: conflicts derived from purely global reasoning are kept
globally; anything whose derivation touched a node-local constraint is
discarded (the node is being pruned anyway, and re-scoping buys nothing
at this scale).
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .conflict import (ConflictAudit, ConflictGraph, LearnedConstraint,
                       LearnedRecord, TrailRecorder, analyze_1uip,
                       to_knapsack, upgrade_singleton)
from .cpsearch import CpStatus, InferenceStats
from .lp import LpStatus, solve_lp, strong_branch
from .model import (INF, INT_TOL, BoundBox, EmptyBoxError, Instance, Side,
                    fmt_g)
from .propagation import Outcome, Propagator
from .rapid import CRITERION_NAMES, RapidConfig, maybe_run

GAP_TOL = 1e-6
PLUNGE_CAP = 10
SB_DEPTH_CAP = 4
SB_CANDIDATES = 5
PC_FLOOR = 1e-6
# (pseudo-cost, inference, conflict) weights; the second set takes over
# when infeasible leaves outnumber cutoff leaves more than tenfold
WEIGHTS_DEFAULT = (1.0, 0.1, 0.1)
WEIGHTS_CONFLICT_HEAVY = (0.1, 0.5, 1.0)
LEAF_RATIO_SHIFT = 10.0


class ConfigError(ValueError):
    """Rejected solver configuration."""


class SolveError(RuntimeError):
    """The solve cannot continue (unbounded relaxation and friends)."""


class VsidsTable:
    """Conflict-participation activity per bound literal side."""

    def __init__(self):
        self.activity: dict[tuple[int, Side], float] = {}
        self.conflicts_seen = 0

    def score(self, var: int) -> float:
        return self.activity.get((var, Side.LOWER), 0.0) + \
            self.activity.get((var, Side.UPPER), 0.0)


def vsids_bump_and_decay(table: VsidsTable,
                         literals) -> VsidsTable:
    """+1 per literal of a fresh conflict; every 100 conflicts the whole
    table shrinks by 0.95 (argmax-preserving)."""
    for var, side, _val in literals:
        key = (var, side)
        table.activity[key] = table.activity.get(key, 0.0) + 1.0
    table.conflicts_seen += 1
    if table.conflicts_seen % 100 == 0:
        for key in table.activity:
            table.activity[key] *= 0.95
    return table


@dataclass
class SearchStats:
    dual_bound: float = -INF
    root_dual_bound: float = -INF
    incumbent: np.ndarray | None = None
    incumbent_value: float = INF
    n_solutions: int = 0
    leaves_infeasible: int = 0
    leaves_cutoff: int = 0
    sb_no_improvement: int = 0
    sb_objective_changed: int = 0
    pc_sum: dict[tuple[int, int], float] = field(default_factory=dict)
    pc_count: dict[tuple[int, int], int] = field(default_factory=dict)
    inference_counts: InferenceStats = field(default_factory=InferenceStats)
    vsids: VsidsTable = field(default_factory=VsidsTable)
    iter_lp: int = 0
    switching_time: float = 0.0
    rl_calls: int = 0
    criterion_fires: dict[str, int] = field(
        default_factory=lambda: {name: 0 for name in CRITERION_NAMES})
    audits: list[ConflictAudit] = field(default_factory=list)
    learned: list[LearnedRecord] = field(default_factory=list)

    def update_pseudo_cost(self, var: int, direction: int, gain: float) -> None:
        key = (var, direction)
        self.pc_sum[key] = self.pc_sum.get(key, 0.0) + gain
        self.pc_count[key] = self.pc_count.get(key, 0) + 1

    def pseudo_cost(self, var: int, direction: int) -> float:
        k = self.pc_count.get((var, direction), 0)
        return self.pc_sum[(var, direction)] / k if k else 0.0


def record_leaf(kind: str, stats: SearchStats,
                point: np.ndarray | None = None,
                value: float | None = None) -> None:
    if kind == "infeasible":
        stats.leaves_infeasible += 1
    elif kind == "cutoff":
        stats.leaves_cutoff += 1
    elif kind == "improving":
        stats.n_solutions += 1
        stats.incumbent = np.array(point, dtype=float)
        stats.incumbent_value = float(value)
    else:
        raise ValueError(f"unknown leaf kind {kind!r}")


def hybrid_branching_score(var: int, stats: SearchStats) -> float:
    w_pc, w_inf, w_vsids = WEIGHTS_DEFAULT
    if stats.leaves_infeasible > LEAF_RATIO_SHIFT * max(1, stats.leaves_cutoff):
        w_pc, w_inf, w_vsids = WEIGHTS_CONFLICT_HEAVY
    product = max(stats.pseudo_cost(var, 0), PC_FLOOR) * \
        max(stats.pseudo_cost(var, 1), PC_FLOOR)
    return (w_pc * product
            + w_inf * stats.inference_counts.total(var)
            + w_vsids * stats.vsids.score(var))


def select_branching(fractional: list[int], stats: SearchStats) -> int:
    best, best_score = fractional[0], -INF
    for j in fractional:
        s = hybrid_branching_score(j, stats)
        if s > best_score:
            best, best_score = j, s
    return best


@dataclass
class Node:
    id: int
    parent: "Node | None"
    depth: int
    lower_bound: float
    # bound deltas against the parent: the branching bounds of this node
    delta: tuple[tuple[int, Side, float], ...]
    locals_own: list[tuple[int, LearnedConstraint]] = field(default_factory=list)
    basis: np.ndarray | None = None
    branch_var: int = -1
    branch_dir: int = -1
    branch_frac: float = 0.0
    parent_obj: float = math.nan

    def path(self) -> list["Node"]:
        """Ancestors from depth 1 down to this node, root excluded."""
        chain: list[Node] = []
        nd: Node | None = self
        while nd is not None and nd.depth > 0:
            chain.append(nd)
            nd = nd.parent
        chain.reverse()
        return chain


@dataclass
class MipConfig:
    node_limit: int | None = None
    time_limit: float = 3600.0
    seed: int = 0
    rapid_mode: str = "off"          # off | root | local
    rapid: RapidConfig = field(default_factory=RapidConfig)

    def validate(self) -> None:
        if self.node_limit is not None and self.node_limit < 0:
            raise ConfigError("node limit must be nonnegative")
        if not self.time_limit > 0:
            raise ConfigError("time limit must be positive")
        if self.rapid_mode not in ("off", "root", "local"):
            raise ConfigError(f"unknown rapid mode {self.rapid_mode!r}")
        r = self.rapid
        if r.f < 1:
            raise ConfigError("frequency offset f must be >= 1")
        if not r.beta > 1:
            raise ConfigError("frequency base beta must be > 1")
        if r.max_transferred_conflicts < 0:
            raise ConfigError("max transferred conflicts must be >= 0")
        bad = set(r.criteria) - set(CRITERION_NAMES)
        if bad:
            raise ConfigError(f"unknown criteria: {sorted(bad)}")


@dataclass
class SolveResult:
    status: str
    objective: float | None
    dual_bound: float
    nodes: int
    rl_calls: int
    criterion_counts: dict[str, int]
    wall_seconds: float
    seed: int
    solution: np.ndarray | None
    stats: SearchStats
    events: list[str]


class _Solve:
    def __init__(self, instance: Instance, config: MipConfig):
        config.validate()
        self.inst = instance
        self.cfg = config
        self.stats = SearchStats()
        self.events: list[str] = []
        self.global_box = instance.root_box()
        self.global_constraints: list[tuple[int, LearnedConstraint]] = []
        self.next_cid = instance.num_rows
        self.heap: list[tuple[float, int, Node]] = []
        self.next_node: Node | None = None
        self.plunge = 0
        self.nodes_processed = 0
        self.next_id = 1
        self.exhausted = False
        self.t0 = time.monotonic()

    # -- plumbing ----------------------------------------------------

    def log(self, line: str) -> None:
        self.events.append(line)

    def _alloc_cid(self) -> int:
        cid = self.next_cid
        self.next_cid += 1
        return cid

    def _new_id(self) -> int:
        self.next_id += 1
        return self.next_id

    def _propagator(self) -> Propagator:
        prop = Propagator(self.inst)
        for cid, lc in self.global_constraints:
            prop.add_constraint(cid, lc)
        return prop

    def _push(self, node: Node) -> None:
        heapq.heappush(self.heap, (node.lower_bound, node.id, node))

    def _dual_now(self) -> float:
        vals = [entry[0] for entry in self.heap]
        if self.next_node is not None:
            vals.append(self.next_node.lower_bound)
        if not vals:
            return self.stats.incumbent_value
        return min(vals)

    def _leaf(self, node: Node, action: str, kind: str | None = None) -> None:
        if kind is not None:
            record_leaf(kind, self.stats)
        dual = self._dual_now()
        self.stats.dual_bound = dual
        self.log(f"node {node.id} depth {node.depth} action {action} "
                 f"bound {fmt_g(node.lower_bound)} dual {fmt_g(dual)}")

    def _fractional(self, box: BoundBox, x: np.ndarray) -> list[int]:
        return [j for j in self.inst.integer_indices
                if abs(x[j] - round(x[j])) > INT_TOL]

    # -- conflict handling -------------------------------------------

    def _on_propagation_conflict(self, node: Node, rec: TrailRecorder,
                                 local_ids: set[int]) -> None:
        out = analyze_1uip(rec.graph, rec.level, self.inst.integer_mask,
                           local_ids, box=rec.box)
        if out.root_failure:
            # the proof used nothing below the root: globally infeasible
            if not out.tainted:
                self.exhausted = True
            return
        d = out.disjunction
        if d is None:
            return
        out.audit.origin = "mip"
        self.stats.audits.append(out.audit)
        if out.tainted:
            # derivation leaned on a node-local constraint; not globally valid
            self.log(f"conflict node {node.id} size {d.size} scope discarded")
            return
        vsids_bump_and_decay(self.stats.vsids, d.literals())
        self.log(f"conflict node {node.id} size {d.size} scope global")
        if d.size == 1:
            try:
                upgrade_singleton(d, self.global_box)
            except EmptyBoxError:
                self.exhausted = True
            return
        lc = LearnedConstraint(
            d, to_knapsack(d, self.global_box.lower, self.global_box.upper))
        self.global_constraints.append((self._alloc_cid(), lc))
        self.stats.learned.append(LearnedRecord(
            "global", lc, self.global_box.lower.copy(),
            self.global_box.upper.copy()))

    # -- node processing ---------------------------------------------

    def _replay(self, node: Node, box: BoundBox, rec: TrailRecorder,
                prop: Propagator, local_ids: set[int],
                ) -> tuple[bool, list[tuple[int, LearnedConstraint]]]:
        """Rebuild node state; False means the node died on the way."""
        active_locals: list[tuple[int, LearnedConstraint]] = []
        res = prop.to_fixpoint(box, rec)
        if res.outcome is Outcome.INFEASIBLE:
            self._on_propagation_conflict(node, rec, local_ids)
            return False, active_locals
        for nd in node.path():
            rec.level = nd.depth
            for var, side, val in nd.delta:
                try:
                    rec.branch(var, side, val, nd.depth)
                except EmptyBoxError:
                    return False, active_locals
            for cid, lc in nd.locals_own:
                prop.add_constraint(cid, lc)
                local_ids.add(cid)
                active_locals.append((cid, lc))
                self.log(f"lattach {cid} node {node.id}")
            res = prop.to_fixpoint(box, rec)
            if res.outcome is Outcome.INFEASIBLE:
                self._on_propagation_conflict(node, rec, local_ids)
                return False, active_locals
        return True, active_locals

    def _process(self, node: Node) -> None:
        inst, stats = self.inst, self.stats
        t_switch = time.perf_counter()
        box = self.global_box.copy()
        rec = TrailRecorder(box, ConflictGraph())
        prop = self._propagator()
        local_ids: set[int] = set()
        ok, active_locals = self._replay(node, box, rec, prop, local_ids)
        stats.switching_time += time.perf_counter() - t_switch
        if not ok:
            self._leaf(node, "infeasible", kind="infeasible")
            return

        lp = solve_lp(inst, box, warm_basis=node.basis)
        stats.iter_lp += lp.iterations
        if lp.status is LpStatus.UNBOUNDED:
            raise SolveError("LP relaxation is unbounded; finite bounds required")
        if lp.status is LpStatus.INFEASIBLE:
            self._leaf(node, "infeasible", kind="infeasible")
            return
        if lp.status is LpStatus.ITERATION_LIMIT:
            self._branch_fallback(node, box, lp)
            return

        obj = float(lp.objective)
        node.lower_bound = max(node.lower_bound, obj)
        if node.branch_var >= 0 and math.isfinite(node.parent_obj):
            gain = max(obj - node.parent_obj, 0.0)
            stats.update_pseudo_cost(node.branch_var, node.branch_dir,
                                     gain / max(node.branch_frac, PC_FLOOR))
        if node.lower_bound >= stats.incumbent_value - GAP_TOL:
            self._leaf(node, "cutoff", kind="cutoff")
            return
        x = np.clip(lp.x, box.lower, box.upper)
        fractional = self._fractional(box, x)
        if not fractional:
            self._finish_integral(node, box, x)
            return

        if self.cfg.rapid_mode != "off":
            at_root = node.depth == 0
            if at_root or self.cfg.rapid_mode == "local":
                extras = tuple(self.global_constraints) + tuple(active_locals)
                summary = maybe_run(
                    node, stats, inst, self.cfg.rapid, at_root,
                    lp_result=lp, box=box, extra_constraints=extras,
                    alloc_cid=self._alloc_cid, events=self.events,
                    global_box=self.global_box if at_root else None,
                    global_sink=self.global_constraints if at_root else None)
                if summary is not None:
                    if summary.finalized:
                        if summary.status is CpStatus.INFEASIBLE or \
                                summary.scope_emptied:
                            self._leaf(node, "rl-infeasible", kind="infeasible")
                        else:
                            self._leaf(node, "rl-optimal")
                        return
                    if node.lower_bound >= stats.incumbent_value - GAP_TOL:
                        self._leaf(node, "cutoff", kind="cutoff")
                        return
                    x = np.clip(x, box.lower, box.upper)
                    fractional = self._fractional(box, x)
                    if not fractional:
                        self._finish_integral(node, box, x)
                        return

        if node.depth <= SB_DEPTH_CAP:
            self._strong_branch_round(node, box, lp, obj, x, fractional)
        var = select_branching(fractional, stats)
        self._branch(node, box, lp.basis_status, obj, x, var)

    def _finish_integral(self, node: Node, box: BoundBox, x: np.ndarray) -> None:
        inst, stats = self.inst, self.stats
        ints = inst.integer_mask
        xr = np.clip(x, box.lower, box.upper)
        xr[ints] = np.round(xr[ints])
        if not inst.check_point(xr):
            # integral LP point that fails exact verification: knife-edge
            self._leaf(node, "integral-rejected", kind="infeasible")
            return
        val = inst.objective_value(xr)
        if val < stats.incumbent_value - GAP_TOL:
            record_leaf("improving", stats, xr, val)
            self.log(f"incumbent {fmt_g(val)} node {node.id}")
            self._leaf(node, "integral")
        else:
            self._leaf(node, "cutoff", kind="cutoff")

    def _strong_branch_round(self, node: Node, box: BoundBox, lp, obj: float,
                             x: np.ndarray, fractional: list[int]) -> None:
        stats = self.stats
        ranked = sorted(fractional,
                        key=lambda j: (-hybrid_branching_score(j, stats), j))
        for j in ranked[:SB_CANDIDATES]:
            dn, up, iters = strong_branch(self.inst, box, j, lp, stats)
            stats.iter_lp += iters
            f_dn = x[j] - math.floor(x[j])
            if dn is not None and stats.pc_count.get((j, 0), 0) == 0:
                stats.update_pseudo_cost(j, 0, max(dn - obj, 0.0)
                                         / max(f_dn, PC_FLOOR))
            if up is not None and stats.pc_count.get((j, 1), 0) == 0:
                stats.update_pseudo_cost(j, 1, max(up - obj, 0.0)
                                         / max(1.0 - f_dn, PC_FLOOR))

    def _branch(self, node: Node, box: BoundBox, basis, obj: float,
                x: np.ndarray, var: int, capped: bool = False) -> None:
        v = int(math.floor(x[var]))
        v = int(min(max(v, box.lower[var]), box.upper[var] - 1))
        dist_dn = max(float(x[var]) - v, PC_FLOOR)
        dist_up = max(v + 1.0 - float(x[var]), PC_FLOOR)
        down = Node(id=self._new_id(), parent=node, depth=node.depth + 1,
                    lower_bound=node.lower_bound,
                    delta=((var, Side.UPPER, float(v)),), basis=basis,
                    branch_var=var, branch_dir=0, branch_frac=dist_dn,
                    parent_obj=obj)
        up = Node(id=self._new_id(), parent=node, depth=node.depth + 1,
                  lower_bound=node.lower_bound,
                  delta=((var, Side.LOWER, float(v + 1)),), basis=basis,
                  branch_var=var, branch_dir=1, branch_frac=dist_up,
                  parent_obj=obj)
        self.log(f"branch node {node.id} depth {node.depth} var {var} "
                 f"point {v} frac {fmt_g(x[var] - v)} "
                 f"down {down.id} up {up.id}")
        preferred, other = (down, up) if x[var] - v <= 0.5 else (up, down)
        if not capped and self.plunge < PLUNGE_CAP:
            self.plunge += 1
            self.next_node = preferred
            self._push(other)
        else:
            self._push(down)
            self._push(up)
        action = "branched-capped" if capped else "branched"
        dual = self._dual_now()
        self.stats.dual_bound = dual
        self.log(f"node {node.id} depth {node.depth} action {action} "
                 f"bound {fmt_g(node.lower_bound)} dual {fmt_g(dual)}")

    def _branch_fallback(self, node: Node, box: BoundBox, lp) -> None:
        # iteration-capped LP: no proven bound, keep the parent's and split
        x = np.clip(lp.x, box.lower, box.upper) if lp.x is not None \
            else box.lower.copy()
        fractional = self._fractional(box, x)
        if fractional:
            var = fractional[0]
        else:
            unfixed = [j for j in self.inst.integer_indices
                       if box.upper[j] - box.lower[j] > 0.5]
            if not unfixed:
                raise SolveError("simplex iteration cap on a fully fixed node")
            var = unfixed[0]
            x = x.copy()
            x[var] = math.floor((box.lower[var] + box.upper[var]) / 2.0)
        self._branch(node, box, None, math.nan, x, var, capped=True)

    # -- main loop ---------------------------------------------------

    def run(self) -> SolveResult:
        inst, stats = self.inst, self.stats
        # root propagation is globally valid: fold it into the global box
        res = self._propagator().to_fixpoint(self.global_box)
        if res.outcome is Outcome.INFEASIBLE:
            return self._finish("infeasible")
        root_lp = solve_lp(inst, self.global_box)
        stats.iter_lp += root_lp.iterations
        if root_lp.status is LpStatus.INFEASIBLE:
            return self._finish("infeasible")
        if root_lp.status is LpStatus.UNBOUNDED:
            raise SolveError("LP relaxation is unbounded; finite bounds required")
        root_dual = float(root_lp.objective) \
            if root_lp.status is LpStatus.OPTIMAL else -INF
        stats.root_dual_bound = root_dual
        stats.dual_bound = root_dual
        root = Node(id=1, parent=None, depth=0, lower_bound=root_dual,
                    delta=(), basis=root_lp.basis_status)
        self._push(root)

        limit = INF if self.cfg.node_limit is None else self.cfg.node_limit
        status: str | None = None
        while True:
            node = self.next_node
            self.next_node = None
            if node is None:
                if not self.heap:
                    break
                lb, _, node = heapq.heappop(self.heap)
                self.plunge = 0
                if stats.incumbent is not None and \
                        lb >= stats.incumbent_value - GAP_TOL:
                    self.heap.clear()   # best open bound is already cut off
                    break
            if self.nodes_processed >= limit:
                self._push(node)
                status = "nodelimit"
                break
            if time.monotonic() - self.t0 > self.cfg.time_limit:
                self._push(node)
                status = "timelimit"
                break
            self.nodes_processed += 1
            self._process(node)
            if self.exhausted:
                break
        return self._finish(status)

    def _finish(self, status: str | None) -> SolveResult:
        stats = self.stats
        if status is None:
            status = "optimal" if stats.incumbent is not None else "infeasible"
        if status == "optimal":
            stats.dual_bound = stats.incumbent_value
        elif status == "infeasible":
            stats.dual_bound = INF
        else:
            stats.dual_bound = self._dual_now()
        objective = stats.incumbent_value if stats.incumbent is not None else None
        wall = time.monotonic() - self.t0
        self.log(f"done status {status} nodes {self.nodes_processed} "
                 f"dual {fmt_g(stats.dual_bound)} "
                 f"primal {fmt_g(objective) if objective is not None else '-'}")
        return SolveResult(status=status, objective=objective,
                           dual_bound=stats.dual_bound,
                           nodes=self.nodes_processed,
                           rl_calls=stats.rl_calls,
                           criterion_counts=dict(stats.criterion_fires),
                           wall_seconds=wall, seed=self.cfg.seed,
                           solution=stats.incumbent, stats=stats,
                           events=self.events)


def solve(instance: Instance, config: MipConfig | None = None) -> SolveResult:
    """Solve to proven optimality (statuses: optimal, infeasible,
    nodelimit, timelimit).  Deterministic per (instance, config, seed)."""
    return _Solve(instance, config if config is not None else MipConfig()).run()
