"""
Bound propagation and the learning probe search
===============================================

"""

import numpy as np

from rapidbnb import from_inequalities
from rapidbnb.cpsearch import CpConfig, cp_search
from rapidbnb.propagation import Propagator

# Propagation alone already deduces a lot.  In 5a + 4b + 2c <= 6 over
# binaries, fixing a = 1 leaves only one unit of slack, which rules out
# b and then c.
knap = from_inequalities([0.0, 0.0, 0.0],
                         [((0, 1, 2), (5.0, 4.0, 2.0), "<=", 6.0)],
                         [1.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0, 1, 2])
box = knap.root_box()
res = Propagator(knap).to_fixpoint(box)
print("knapsack with a fixed to 1:", res.outcome.value)
for var, side, value in res.deductions:
    print("   deduced x%d %s %g" % (var, side.name.lower(), value))

# A conflict-prone clause system: enough three-literal covering rows to
# force backtracking.  The probe is a propagation-only depth-first dive
# that analyzes every dead end it hits.
rng = np.random.default_rng(10)
n, m = 24, 101
rows = []
for _ in range(m):
    vs = rng.choice(n, size=3, replace=False)
    neg = rng.random(3) < 0.5
    rows.append((tuple(int(v) for v in vs),
                 tuple(-1.0 if s else 1.0 for s in neg),
                 ">=", 1.0 - float(neg.sum())))
clauses = from_inequalities(np.zeros(n), rows, [0.0] * n, [1.0] * n,
                            range(n))

out = cp_search(clauses, clauses.root_box(), CpConfig(node_limit=500, seed=0))
print("\nprobe over %d clauses on %d binaries:" % (m, n))
print("   status   ", out.status.value)
print("   nodes    ", out.nodes)
print("   dead ends analyzed", len(out.audits))
print("   conflicts kept    ", len(out.conflicts),
      "(short ones only; the length cap is 5% of the variables)")
if out.solution is not None:
    print("   witness  ", out.solution.astype(int))

# Each audit records the no-good as literals plus the node state it was
# derived in; exactly one literal comes from the deepest level.
if out.audits:
    a = out.audits[0]
    print("   first no-good:", ["x%d %s %g (level %d)"
                                % (v, s.name.lower(), val, lvl)
                                for v, s, val, lvl in a.literals])
