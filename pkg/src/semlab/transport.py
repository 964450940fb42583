"""Exact Wasserstein-1 and bounded-Lipschitz distances on finite spaces.

Both distances are solved as linear programs over vertex potentials

    W1  : maximize <mu0 - mu1, f>  over  |f(x) - f(y)| <= d(x, y)
    BL* : same with the extra box  |f(x)| <= 1

which directly produces the Kantorovich potential.  Each solve is paired
with an independent primal program (a transportation problem for W1, a
flow-with-creation problem for BL*) so every certificate carries a
machine-checked duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .spaces import AtomicMeasure, MetricMeasureSpace

__all__ = ["TransportCertificate", "UnequalMassError", "w1", "bl_star"]

_MASS_TOL = 1e-9


class UnequalMassError(ValueError):
    """W1 between nonnegative measures of different total mass is refused."""


@dataclass(frozen=True, eq=False)
class TransportCertificate:
    """Optimal value with dual potential, primal plan, and duality gap."""

    value: float
    potential: np.ndarray
    plan: np.ndarray | None
    duality_gap: float


def _pair_constraints(space: MetricMeasureSpace):
    """Sparse rows f(x) - f(y) <= d(x, y) over all ordered pairs."""
    n = space.n
    xs, ys = np.nonzero(~np.eye(n, dtype=bool))
    rows = np.arange(len(xs))
    data = np.concatenate([np.ones(len(xs)), -np.ones(len(xs))])
    rr = np.concatenate([rows, rows])
    cc = np.concatenate([xs, ys])
    a_ub = sparse.coo_matrix((data, (rr, cc)), shape=(len(xs), n)).tocsr()
    return a_ub, space.d[xs, ys], xs, ys


def _solve(problem_name, **kwargs):
    res = linprog(method="highs", **kwargs)
    if res.status != 0:
        raise ArithmeticError(f"{problem_name} LP failed: {res.message}")
    return res


def _lexicographic_refine(c_obj, a_ub, b_ub, a_eq, b_eq, bounds, optimum):
    """Lexicographically smallest optimal solution, coordinate by coordinate.

    ``optimum`` is the minimal value of c . f; optimality is pinned as the
    extra inequality c . f <= optimum + slack before minimizing f(0), then
    f(1) with f(0) fixed, and so on.
    """
    n = a_ub.shape[1]
    slack = 1e-9 * (1.0 + abs(optimum))
    a_all = sparse.vstack(
        [a_ub, sparse.csr_matrix(np.asarray(c_obj, dtype=float)[None, :])]
    ).tocsr()
    b_rows = np.concatenate([b_ub, [optimum + slack]])
    fixed: list[float] = []
    for i in range(n):
        target = np.zeros(n)
        target[i] = 1.0
        if fixed:
            rows = sparse.coo_matrix(
                (np.ones(len(fixed)), (np.arange(len(fixed)), np.arange(len(fixed)))),
                shape=(len(fixed), n),
            ).tocsr()
            eq_a = rows if a_eq is None else sparse.vstack([a_eq, rows]).tocsr()
            eq_b = np.array(fixed) if b_eq is None else np.concatenate([b_eq, fixed])
        else:
            eq_a, eq_b = a_eq, b_eq
        res = _solve("lexicographic refinement", c=target, A_ub=a_all, b_ub=b_rows,
                     A_eq=eq_a, b_eq=eq_b, bounds=bounds)
        fixed.append(float(res.x[i]))
    return np.array(fixed)


def _primal_transport(space: MetricMeasureSpace, a: np.ndarray, b: np.ndarray):
    """Transportation LP between point-mass vectors of equal total mass."""
    src = np.nonzero(a > 0.0)[0]
    dst = np.nonzero(b > 0.0)[0]
    n = space.n
    if len(src) == 0 or len(dst) == 0:
        return 0.0, np.zeros((n, n))
    cost = space.d[np.ix_(src, dst)].ravel()
    ns, nd = len(src), len(dst)
    nv = ns * nd
    rows, cols, data = [], [], []
    for i in range(ns):
        rows.extend([i] * nd)
        cols.extend(range(i * nd, (i + 1) * nd))
        data.extend([1.0] * nd)
    for j in range(nd):
        rows.extend([ns + j] * ns)
        cols.extend(range(j, nv, nd))
        data.extend([1.0] * ns)
    a_eq = sparse.coo_matrix((data, (rows, cols)), shape=(ns + nd, nv)).tocsr()
    b_eq = np.concatenate([a[src], b[dst]])
    res = _solve("primal transport", c=cost, A_eq=a_eq, b_eq=b_eq, bounds=(0.0, None))
    plan = np.zeros((n, n))
    plan[np.ix_(src, dst)] = res.x.reshape(ns, nd)
    return float(res.fun), plan


def w1(space: MetricMeasureSpace, mu0: AtomicMeasure, mu1: AtomicMeasure,
       *, canonical: bool = False) -> TransportCertificate:
    """Wasserstein-1 distance between equal-mass nonnegative atomic measures.

    The dual potential LP is the primary solver; a transportation LP on the
    measure supports provides the primal plan and the duality gap.  With
    ``canonical=True`` the returned potential is refined to the
    lexicographically smallest optimal solution (n extra LP solves) under
    the gauge f(0) = 0.

    Raises
    ------
    UnequalMassError
        If total masses differ (the distance would be infinite).
    ValueError
        If either measure carries a negative atom.
    """
    if not mu0.is_nonnegative or not mu1.is_nonnegative:
        raise ValueError("Wasserstein-1 needs nonnegative measures")
    a = mu0.as_point_masses(space.n)
    b = mu1.as_point_masses(space.n)
    if abs(a.sum() - b.sum()) > _MASS_TOL * (1.0 + a.sum() + b.sum()):
        raise UnequalMassError(
            f"total masses differ: {a.sum():.12g} vs {b.sum():.12g}"
        )
    delta = a - b
    if np.all(delta == 0.0):
        return TransportCertificate(0.0, np.zeros(space.n), np.diag(a), 0.0)

    a_ub, b_ub, _, _ = _pair_constraints(space)
    gauge = sparse.coo_matrix(([1.0], ([0], [0])), shape=(1, space.n)).tocsr()
    res = _solve("Wasserstein-1 dual", c=-delta, A_ub=a_ub, b_ub=b_ub,
                 A_eq=gauge, b_eq=np.zeros(1), bounds=(None, None))
    value = -float(res.fun)
    potential = res.x
    if canonical:
        potential = _lexicographic_refine(-delta, a_ub, b_ub, gauge, np.zeros(1),
                                          (None, None), float(res.fun))
    primal_value, plan = _primal_transport(space, a, b)
    return TransportCertificate(value, potential, plan, abs(primal_value - value))


def _primal_bounded_lipschitz(space: MetricMeasureSpace, delta: np.ndarray):
    """Flow LP with unit-cost mass creation/destruction, dual to the BL* LP."""
    n = space.n
    _, d_pairs, xs, ys = _pair_constraints(space)
    npairs = len(xs)
    nv = npairs + 2 * n
    rows, cols, data = [], [], []
    for k in range(npairs):
        rows.extend([xs[k], ys[k]])
        cols.extend([k, k])
        data.extend([1.0, -1.0])
    for x in range(n):
        rows.extend([x, x])
        cols.extend([npairs + x, npairs + n + x])
        data.extend([1.0, -1.0])
    a_eq = sparse.coo_matrix((data, (rows, cols)), shape=(n, nv)).tocsr()
    cost = np.concatenate([d_pairs, np.ones(2 * n)])
    res = _solve("bounded-Lipschitz primal", c=cost, A_eq=a_eq, b_eq=delta,
                 bounds=(0.0, None))
    return float(res.fun)


def bl_star(space: MetricMeasureSpace, mu0: AtomicMeasure, mu1: AtomicMeasure,
            *, canonical: bool = False) -> TransportCertificate:
    """Bounded-Lipschitz dual distance; finite for arbitrary signed measures.

    Same potential LP as :func:`w1` with the extra constraint |f| <= 1, so
    the value never exceeds the Wasserstein-1 distance nor the total
    variation of the difference measure.  No transport plan is returned:
    the primal oracle is a flow problem with mass creation/destruction, not
    a coupling.
    """
    delta = mu0.as_point_masses(space.n) - mu1.as_point_masses(space.n)
    if np.allclose(delta, 0.0, atol=0.0):
        return TransportCertificate(0.0, np.zeros(space.n), None, 0.0)
    a_ub, b_ub, _, _ = _pair_constraints(space)
    res = _solve("bounded-Lipschitz dual", c=-delta, A_ub=a_ub, b_ub=b_ub,
                 bounds=(-1.0, 1.0))
    value = -float(res.fun)
    potential = res.x
    if canonical:
        potential = _lexicographic_refine(-delta, a_ub, b_ub, None, None,
                                          (-1.0, 1.0), float(res.fun))
    primal_value = _primal_bounded_lipschitz(space, delta)
    return TransportCertificate(value, potential, None, abs(primal_value - value))
