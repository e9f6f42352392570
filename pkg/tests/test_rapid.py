"""Probe scheduling and transfer: depth walk, trigger thresholds, and
what the host search keeps from a finished probe."""

import itertools
import math

import numpy as np
import pytest

import oracles
from rapidbnb.conflict import BoundDisjunction, LearnedConstraint
from rapidbnb.cpsearch import (CpConfig, CpOutcome, CpStatus, InferenceStats,
                               cp_search)
from rapidbnb.lp import DegeneracyInfo, solve_lp
from rapidbnb.mipsearch import Node, SearchStats
from rapidbnb.model import INF, Side, from_inequalities
from rapidbnb.rapid import (CRITERION_NAMES, ROOT_CRITERIA, RapidConfig,
                            evaluate_criteria, is_rl_depth, maybe_run,
                            transfer)


def coverage_instance(n=16, integer_set=None):
    """min sum x over n binaries subject to x0 + x1 >= 1."""
    rows = [((0, 1), (1.0, 1.0), ">=", 1.0)]
    if integer_set is None:
        integer_set = range(n)
    return from_inequalities([1.0] * n, rows, [0.0] * n, [1.0] * n,
                             integer_set)


def fresh_node(node_id=0, depth=0):
    return Node(id=node_id, parent=None, depth=depth, lower_bound=0.0,
                delta=())


def disj(lower=(), upper=()):
    return BoundDisjunction(lower_lits=tuple(lower), upper_lits=tuple(upper))


class TestDepthSchedule:
    def test_frozen_depth_set(self):
        hits = {d for d in range(1001) if is_rl_depth(d, 5, 4.0)}
        assert hits == {0, 5, 20, 80, 320}

    def test_fractional_ratio_walks_exactly(self):
        # 4, 6, 9, 13.5, 20.25: the non-integer steps never match a depth
        hits = {d for d in range(21) if is_rl_depth(d, 4, 1.5)}
        assert hits == {0, 4, 6, 9}

    def test_ratio_must_exceed_one(self):
        with pytest.raises(ValueError):
            is_rl_depth(3, 5, 1.0)
        with pytest.raises(ValueError):
            is_rl_depth(3, 5, 0.5)


def report_for(stats, share=0.0, face=1.0, config=None, instance=None,
               box=None):
    info = DegeneracyInfo(degenerate_share=share, face_ratio=face)
    return evaluate_criteria(None, stats, info, config or RapidConfig(),
                             instance=instance, box=box)


class TestTriggerBoundaries:
    """Every threshold comparison is strict; sit on both sides of each."""

    def test_degenerate_share_edge(self):
        st = SearchStats()
        assert not report_for(st, share=0.80).fired["degeneracy"]
        assert report_for(st, share=0.8001).fired["degeneracy"]

    def test_face_ratio_edge(self):
        st = SearchStats()
        assert not report_for(st, face=2.0).fired["degeneracy"]
        assert report_for(st, face=2.0001).fired["degeneracy"]

    def test_degeneracy_is_a_disjunction_of_the_two(self):
        st = SearchStats()
        assert report_for(st, share=0.85, face=1.0).fired["degeneracy"]
        assert report_for(st, share=0.5, face=2.5).fired["degeneracy"]
        assert not report_for(st, share=0.5, face=1.0).fired["degeneracy"]

    def test_leaf_ratio_edge(self):
        st = SearchStats(leaves_infeasible=20, leaves_cutoff=2)
        assert not report_for(st).fired["leaves"]
        st.leaves_infeasible = 21
        rep = report_for(st)
        assert rep.fired["leaves"]
        assert rep.measured["leaves"] == pytest.approx(10.5)

    def test_leaf_ratio_zero_denominator(self):
        quiet = SearchStats(leaves_infeasible=0, leaves_cutoff=0)
        rep = report_for(quiet)
        assert not rep.fired["leaves"] and rep.measured["leaves"] == 0.0
        lone = SearchStats(leaves_infeasible=1, leaves_cutoff=0)
        rep = report_for(lone)
        assert rep.fired["leaves"] and rep.measured["leaves"] == INF

    def test_leaf_example_values(self):
        st = SearchStats(leaves_infeasible=100, leaves_cutoff=5)
        rep = report_for(st)
        assert rep.fired["leaves"]
        assert rep.measured["leaves"] == pytest.approx(20.0)

    def test_stalled_dual_bound(self):
        st = SearchStats(dual_bound=3.5, root_dual_bound=3.5)
        rep = report_for(st)
        assert rep.fired["dualbound"] and rep.measured["dualbound"] == 0.0
        st.dual_bound = 3.6
        assert not report_for(st).fired["dualbound"]

    def test_solution_count(self):
        assert report_for(SearchStats(n_solutions=0)).fired["nsols"]
        assert not report_for(SearchStats(n_solutions=1)).fired["nsols"]

    def test_strong_branching_waste(self):
        st = SearchStats(sb_no_improvement=0, sb_objective_changed=0)
        rep = report_for(st)
        assert not rep.fired["sblps"] and rep.measured["sblps"] == 0.0
        st.sb_no_improvement = 1
        rep = report_for(st)
        assert rep.fired["sblps"] and rep.measured["sblps"] == INF
        st.sb_no_improvement, st.sb_objective_changed = 20, 2
        assert not report_for(st).fired["sblps"]
        st.sb_no_improvement = 21
        assert report_for(st).fired["sblps"]

    def test_objective_support(self):
        inst = coverage_instance(n=3)
        box = inst.root_box()
        st = SearchStats()
        rep = report_for(st, instance=inst, box=box)
        assert not rep.fired["obj"] and rep.measured["obj"] == 3.0
        box.tighten(0, Side.UPPER, 0.0)
        box.tighten(1, Side.LOWER, 1.0)
        box.tighten(2, Side.UPPER, 0.0)
        rep = report_for(st, instance=inst, box=box)
        assert rep.fired["obj"] and rep.measured["obj"] == 0.0

    def test_objective_support_needs_the_box(self):
        rep = report_for(SearchStats())
        assert not rep.fired["obj"] and rep.measured["obj"] == INF

    def test_report_covers_all_names(self):
        rep = report_for(SearchStats())
        assert set(rep.fired) == set(CRITERION_NAMES)
        assert set(rep.measured) == set(CRITERION_NAMES) | {"face_ratio"}


class TestScheduleGating:
    def run_maybe(self, inst, node, stats, criteria, at_root, events=None,
                  base_seed=0):
        box = inst.root_box()
        lp = solve_lp(inst, box)
        cfg = RapidConfig(criteria=frozenset(criteria), base_seed=base_seed)
        ids = itertools.count()
        sink = []
        summary = maybe_run(node, stats, inst, cfg, at_root,
                            lp_result=lp, box=box, extra_constraints=(),
                            alloc_cid=lambda: next(ids),
                            events=events if events is not None else [],
                            global_box=box, global_sink=sink)
        return summary, sink

    def test_off_schedule_depth_is_silent(self):
        inst = coverage_instance(n=6)
        events = []
        summary, _ = self.run_maybe(inst, fresh_node(7, depth=3),
                                    SearchStats(), {"degeneracy"},
                                    at_root=False, events=events)
        assert summary is None and events == []

    def test_tree_criteria_masked_at_root(self):
        # only evidence that exists before branching may fire at depth 0
        inst = coverage_instance(n=6)
        for name in set(CRITERION_NAMES) - ROOT_CRITERIA:
            st = SearchStats(dual_bound=1.0, root_dual_bound=1.0,
                             leaves_infeasible=500, leaves_cutoff=0,
                             sb_no_improvement=500, n_solutions=1)
            events = []
            summary, _ = self.run_maybe(inst, fresh_node(0, depth=0), st,
                                        {name}, at_root=True, events=events)
            assert summary is None
            assert events[-1].endswith("fired -")
            assert st.rl_calls == 0

    def test_same_criteria_fire_below_root(self):
        inst = coverage_instance(n=6)
        st = SearchStats(leaves_infeasible=500, leaves_cutoff=0,
                         n_solutions=1)
        summary, _ = self.run_maybe(inst, fresh_node(4, depth=5), st,
                                    {"leaves"}, at_root=False)
        assert summary is not None
        assert summary.criteria_fired == ("leaves",)
        assert st.rl_calls == 1 and st.criterion_fires["leaves"] == 1

    def test_root_probe_on_zero_progress_solution_count(self):
        inst = coverage_instance(n=6)
        st = SearchStats(n_solutions=0)
        summary, sink = self.run_maybe(inst, fresh_node(0, depth=0), st,
                                       {"nsols"}, at_root=True)
        assert summary is not None and summary.status is CpStatus.OPTIMAL
        # a finished probe at the root settles the whole instance
        assert summary.finalized and summary.solution_installed
        assert st.incumbent_value == pytest.approx(1.0)

    def test_mixed_integer_scope_never_probes(self):
        inst = coverage_instance(n=6, integer_set=range(1, 6))
        st = SearchStats(n_solutions=0)
        summary, _ = self.run_maybe(inst, fresh_node(0, depth=0), st,
                                    {"nsols"}, at_root=True)
        assert summary is None and st.rl_calls == 0

    def test_probe_seed_mixes_node_id(self):
        # one run through the scheduler, one direct probe with the xor seed
        inst = coverage_instance(n=6)
        st = SearchStats(leaves_infeasible=500, n_solutions=1, iter_lp=0)
        summary, _ = self.run_maybe(inst, fresh_node(9, depth=5), st,
                                    {"leaves"}, at_root=False, base_seed=12)
        direct = cp_search(inst, inst.root_box(),
                           CpConfig(node_limit=500, seed=12 ^ 9,
                                    incumbent_bound=INF),
                           seed_inference=InferenceStats())
        assert summary.status is direct.status
        assert summary.cp_nodes == direct.nodes
        assert summary.conflicts_attached == min(10, len(direct.conflicts))

    def test_identical_reruns(self):
        inst = coverage_instance(n=6)
        outs = []
        for _ in range(2):
            st = SearchStats(n_solutions=0)
            events = []
            summary, _ = self.run_maybe(inst, fresh_node(0, depth=0), st,
                                        {"nsols"}, at_root=True,
                                        events=events, base_seed=3)
            outs.append((summary, events))
        assert outs[0] == outs[1]


def crafted_outcome(box, status=CpStatus.OPTIMAL, conflicts=(),
                    solution=None, value=INF, inference=None, nodes=4):
    return CpOutcome(status=status, conflicts=list(conflicts), box=box,
                     solution=solution, solution_value=value,
                     inference=inference or InferenceStats(), nodes=nodes,
                     audits=[])


class TestTransferRules:
    """Drive transfer() with hand-built probe outcomes."""

    def setup_method(self):
        self.inst = coverage_instance(n=16)
        self.box = self.inst.root_box()
        self.stats = SearchStats()
        self.events = []
        self.ids = itertools.count()
        self.sink = []

    def run_transfer(self, outcome, node=None, at_root=True):
        node = node or fresh_node(0, depth=0)
        return transfer(outcome, node, self.stats, config=RapidConfig(),
                        instance=self.inst, box=self.box, at_root=at_root,
                        alloc_cid=lambda: next(self.ids), events=self.events,
                        global_box=self.box, global_sink=self.sink), node

    def test_conflict_cap_and_ordering(self):
        # 3 linear-form, 12 disjunction-only: cap 10 keeps all linear
        # first, then the shortest disjunctions
        mixed = []
        for length in (3, 1, 2):
            d = disj(lower=tuple((j, 1.0) for j in range(length)))
            # only the form tag matters to the ranking, not the row itself
            mixed.append(LearnedConstraint(d, linear=object()))
        for length in range(12, 0, -1):
            d = disj(lower=tuple((j, 1.0) for j in range(length)))
            mixed.append(LearnedConstraint(d))
        summary, _ = self.run_transfer(
            crafted_outcome(self.box.copy(), conflicts=mixed))
        assert summary.conflicts_attached == 10
        kept = [lc for _, lc in self.sink]
        assert [lc.form for lc in kept] == ["linear"] * 3 + ["disjunction"] * 7
        assert [lc.length for lc in kept] == [1, 2, 3, 1, 2, 3, 4, 5, 6, 7]
        assert all(rec.scope == "global" for rec in self.stats.learned)

    def test_local_attachment_below_root(self):
        lc = LearnedConstraint(disj(lower=((0, 1.0), (2, 1.0))))
        summary, node = self.run_transfer(
            crafted_outcome(self.box.copy(), conflicts=[lc]),
            node=fresh_node(5, depth=5), at_root=False)
        assert summary.conflicts_attached == 1
        assert self.sink == []
        assert [c for _, c in node.locals_own] == [lc]
        assert self.stats.learned[0].scope == "local"

    def test_bound_transfer_only_on_exhausted_probe(self):
        tighter = self.box.copy()
        tighter.tighten(0, Side.LOWER, 1.0)
        tighter.tighten(3, Side.UPPER, 0.0)
        # a solved probe's final box is not a valid tightening claim
        summary, _ = self.run_transfer(
            crafted_outcome(tighter, status=CpStatus.OPTIMAL))
        assert summary.bounds_applied == 0
        assert self.box.lower[0] == 0.0

    def test_bound_transfer_at_root_updates_both_boxes(self):
        tighter = self.box.copy()
        tighter.tighten(0, Side.LOWER, 1.0)
        tighter.tighten(3, Side.UPPER, 0.0)
        summary, _ = self.run_transfer(
            crafted_outcome(tighter, status=CpStatus.NODE_LIMIT))
        assert summary.bounds_applied == 2
        assert not summary.finalized
        assert self.box.lower[0] == 1.0 and self.box.upper[3] == 0.0
        # at the root nothing becomes a local constraint
        assert self.stats.learned == []

    def test_bound_transfer_below_root_leaves_replay_crumbs(self):
        tighter = self.box.copy()
        tighter.tighten(2, Side.UPPER, 0.0)
        summary, node = self.run_transfer(
            crafted_outcome(tighter, status=CpStatus.NODE_LIMIT),
            node=fresh_node(8, depth=5), at_root=False)
        assert summary.bounds_applied == 1
        assert len(node.locals_own) == 1
        _, lc1 = node.locals_own[0]
        assert lc1.disjunction.upper_lits == ((2, 0.0),)
        # the validity snapshot is the box before the delta was applied
        rec = self.stats.learned[0]
        assert rec.scope == "local" and rec.box_upper[2] == 1.0
        assert self.box.upper[2] == 0.0

    def test_contradictory_deltas_empty_the_scope(self):
        crossed = self.box.copy()
        crossed.lower[0] = 1.0
        crossed.upper[0] = 0.0
        summary, _ = self.run_transfer(
            crafted_outcome(crossed, status=CpStatus.NODE_LIMIT))
        assert summary.scope_emptied and summary.finalized

    def test_solution_installed_and_logged(self):
        xs = np.zeros(16)
        xs[0] = 1.0
        summary, _ = self.run_transfer(
            crafted_outcome(self.box.copy(), solution=xs, value=1.0))
        assert summary.solution_installed and not summary.solution_rejected
        assert self.stats.incumbent_value == pytest.approx(1.0)
        assert self.stats.n_solutions == 1
        assert any(e.startswith("incumbent 1 ") and e.endswith("origin rl")
                   for e in self.events)

    def test_infeasible_claim_is_rejected(self):
        xs = np.zeros(16)     # violates x0 + x1 >= 1
        summary, _ = self.run_transfer(
            crafted_outcome(self.box.copy(), solution=xs, value=0.0))
        assert summary.solution_rejected and not summary.solution_installed
        assert self.stats.incumbent is None
        assert any(e.startswith("rl-solution-rejected") for e in self.events)

    def test_non_improving_solution_quietly_dropped(self):
        self.stats.incumbent_value = 1.0
        xs = np.zeros(16)
        xs[1] = 1.0
        summary, _ = self.run_transfer(
            crafted_outcome(self.box.copy(), solution=xs, value=1.0))
        assert not summary.solution_installed
        assert not summary.solution_rejected
        assert self.stats.n_solutions == 0

    def test_inference_statistics_fold_back(self):
        inf_probe = InferenceStats()
        inf_probe.add(2, 1, InferenceStats.UP, 3)
        inf_probe.add(2, 0, InferenceStats.DOWN, 1)
        self.stats.inference_counts.add(2, 1, InferenceStats.UP, 5)
        self.run_transfer(
            crafted_outcome(self.box.copy(), inference=inf_probe))
        assert self.stats.inference_counts.total(2) == 9

    def test_finalized_tracks_probe_status(self):
        for status, done in ((CpStatus.OPTIMAL, True),
                             (CpStatus.INFEASIBLE, True),
                             (CpStatus.NODE_LIMIT, False)):
            summary, _ = self.run_transfer(
                crafted_outcome(self.box.copy(), status=status))
            assert summary.finalized is done
