"""Brute-force reference answers the test suite checks the solver against.

Everything here is deliberately slow and simple: exhaustive integer
enumeration for IP optima, vertex enumeration for LP optima, and a
seeded instance generator sized so enumeration stays instant.  Expected
values frozen into tests come from these functions, never from the code
under test.
"""

import itertools

import numpy as np

from rapidbnb import Instance, from_inequalities

FEAS_TOL = 1e-6

# generator envelope: n <= 8, m <= 6, integer bounds inside [0, 3],
# coefficients inside [-4, 4]
GEN_MAX_VARS = 8
GEN_MAX_ROWS = 6
GEN_BOUND_HI = 3
GEN_COEF_LO = -4
GEN_COEF_HI = 4


def integer_grid(lower, upper) -> np.ndarray:
    """All integer points of the box as an (N, n) array."""
    lower = np.asarray(lower, dtype=int)
    upper = np.asarray(upper, dtype=int)
    axes = [np.arange(lo, hi + 1) for lo, hi in zip(lower, upper)]
    if not axes:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1).astype(float)


def row_system(instance: Instance):
    """Dense (A, b) of the <= normal form."""
    n = instance.num_vars
    m = instance.num_rows
    a = np.zeros((m, n))
    b = np.zeros(m)
    for i, row in enumerate(instance.rows):
        for j, coef in zip(row.cols, row.coefs):
            a[i, j] = coef
        b[i] = row.rhs
    return a, b


def feasible_points(instance: Instance, lower=None, upper=None) -> np.ndarray:
    """Integer-feasible points inside the given box (default: root box)."""
    lo = instance.lower if lower is None else np.asarray(lower, dtype=float)
    hi = instance.upper if upper is None else np.asarray(upper, dtype=float)
    if np.any(lo > hi):
        return np.zeros((0, instance.num_vars))
    pts = integer_grid(np.ceil(lo - FEAS_TOL), np.floor(hi + FEAS_TOL))
    if pts.shape[0] == 0:
        return pts
    a, b = row_system(instance)
    if instance.num_rows:
        ok = np.all(pts @ a.T <= b[None, :] + FEAS_TOL, axis=1)
        pts = pts[ok]
    return pts


def enumerate_optimum(instance: Instance, lower=None, upper=None):
    """(status, value, best point) by exhaustive integer enumeration.

    status is "optimal" or "infeasible"; the point is lexicographically
    smallest among the optima so ties break deterministically.
    """
    pts = feasible_points(instance, lower, upper)
    if pts.shape[0] == 0:
        return "infeasible", None, None
    vals = pts @ instance.c
    best = np.min(vals)
    where = np.flatnonzero(vals <= best + 1e-9)
    order = np.lexsort(pts[where].T[::-1])
    return "optimal", float(best), pts[where[order[0]]]


def lp_vertex_optimum(instance: Instance, lower=None, upper=None):
    """(status, value, point) for the LP relaxation by vertex enumeration.

    Stacks rows and bound constraints into G x <= h and inspects every
    nonsingular n x n subsystem.  Valid only for finite boxes, which is
    all the generator below produces.
    """
    n = instance.num_vars
    lo = instance.lower if lower is None else np.asarray(lower, dtype=float)
    hi = instance.upper if upper is None else np.asarray(upper, dtype=float)
    if np.any(lo > hi + FEAS_TOL):
        return "infeasible", None, None
    a, b = row_system(instance)
    eye = np.eye(n)
    g = np.vstack([a, eye, -eye])
    h = np.concatenate([b, hi, -lo])
    best_val = None
    best_pt = None
    for subset in itertools.combinations(range(g.shape[0]), n):
        gs = g[list(subset)]
        if abs(np.linalg.det(gs)) < 1e-9:
            continue
        x = np.linalg.solve(gs, h[list(subset)])
        if np.any(g @ x > h + 1e-8):
            continue
        val = float(instance.c @ x)
        if best_val is None or val < best_val - 1e-12:
            best_val = val
            best_pt = x
    if best_val is None:
        return "infeasible", None, None
    return "optimal", best_val, best_pt


def random_instance(rng: np.random.Generator, feasible_bias: float = 0.7,
                    allow_zero_objective: bool = False) -> Instance:
    """One random pure IP inside the generator envelope.

    rhs values are anchored to the row activity at a planted point so a
    `feasible_bias` share of instances keeps at least that point; the
    rest drift tight enough to be infeasible now and then.
    """
    n = int(rng.integers(2, GEN_MAX_VARS + 1))
    m = int(rng.integers(1, GEN_MAX_ROWS + 1))
    lower = rng.integers(0, GEN_BOUND_HI + 1, size=n)
    upper = np.array([int(rng.integers(lo, GEN_BOUND_HI + 1)) for lo in lower])
    if allow_zero_objective and rng.random() < 0.5:
        c = np.zeros(n)
    else:
        c = rng.integers(GEN_COEF_LO, GEN_COEF_HI + 1, size=n).astype(float)
    planted = np.array([int(rng.integers(lo, up + 1))
                        for lo, up in zip(lower, upper)])
    rows = []
    for _ in range(m):
        width = int(rng.integers(2, n + 1))
        cols = tuple(sorted(rng.choice(n, size=width, replace=False).tolist()))
        coefs = rng.integers(GEN_COEF_LO, GEN_COEF_HI + 1, size=width)
        while not np.any(coefs):
            coefs = rng.integers(GEN_COEF_LO, GEN_COEF_HI + 1, size=width)
        act = int(sum(a * planted[j] for j, a in zip(cols, coefs)))
        if rng.random() < feasible_bias:
            slack = int(rng.integers(0, 4))       # keeps the planted point
        else:
            slack = -int(rng.integers(1, 4))      # may cut everything off
        sense = "<=" if rng.random() < 0.5 else ">="
        rhs = act + slack if sense == "<=" else act - slack
        rows.append((cols, tuple(float(a) for a in coefs), sense, float(rhs)))
    return from_inequalities(c, rows, lower, upper, integer_set=range(n))


def random_sat_instance(rng: np.random.Generator, n: int = 10,
                        m: int = 42, clause: int = 3) -> Instance:
    """Random clause system over binaries with a zero objective.

    Clauses with negated literals become `sum_P x - sum_N x >= 1 - |N|`.
    Around m/n = 4.2 these sit near the satisfiability threshold, which
    makes depth-first search on them conflict-rich either way.
    """
    rows = []
    for _ in range(m):
        cols = sorted(rng.choice(n, size=clause, replace=False).tolist())
        negate = rng.random(clause) < 0.5
        coefs = tuple(-1.0 if neg else 1.0 for neg in negate)
        rhs = 1.0 - float(negate.sum())
        rows.append((tuple(cols), coefs, ">=", rhs))
    return from_inequalities(np.zeros(n), rows, [0] * n, [1] * n,
                             integer_set=range(n))


def random_lp(rng: np.random.Generator) -> Instance:
    """One random bounded LP with n <= 5, m <= 4 for the vertex oracle."""
    n = int(rng.integers(1, 6))
    m = int(rng.integers(1, 5))
    lower = rng.integers(-3, 1, size=n).astype(float)
    upper = lower + rng.integers(1, 5, size=n)
    c = rng.integers(-4, 5, size=n).astype(float)
    mid = (lower + upper) / 2.0
    rows = []
    for _ in range(m):
        width = int(rng.integers(1, n + 1))
        cols = tuple(sorted(rng.choice(n, size=width, replace=False).tolist()))
        coefs = rng.integers(-4, 5, size=width)
        while not np.any(coefs):
            coefs = rng.integers(-4, 5, size=width)
        act = float(sum(a * mid[j] for j, a in zip(cols, coefs)))
        rhs = act + float(rng.integers(0, 5))
        rows.append((cols, tuple(float(a) for a in coefs), "<=", rhs))
    return from_inequalities(c, rows, lower, upper, integer_set=())
