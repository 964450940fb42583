"""Finite metric-measure spaces, atomic measures, and space generators.

A space is a point set {0, ..., n-1} with a metric matrix ``d`` and strictly
positive point masses ``m``.  Functions are plain float vectors of length n;
all Lebesgue norms are taken against ``m``.  Measures are atomic (every
finite measure on a finite space is), stored as (point, coefficient) pairs.

The metric and the Dirichlet energy are independent inputs: generators first
build a graph with edge lengths, take the shortest-path metric, then rescale
it once (:func:`calibrate_metric`) so that the pointwise square gradient of
any function is dominated by its Lipschitz constant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.sparse.csgraph import shortest_path

if TYPE_CHECKING:
    from .dirichlet import DirichletStructure

__all__ = [
    "MetricMeasureSpace",
    "SubsetIndicator",
    "AtomicMeasure",
    "Violation",
    "validate_space",
    "generate_space",
    "calibrate_metric",
    "parse_family",
    "space_to_dict",
    "space_from_dict",
    "load_space",
    "save_space",
    "split_signs",
]

_FAMILIES = (
    "two_point",
    "path",
    "cycle",
    "grid",
    "star",
    "random_geometric",
    "complete",
)


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Finite metric space with a fully supported weight measure.

    Attributes
    ----------
    d : ndarray, shape (n, n)
        Symmetric metric matrix with zero diagonal.
    m : ndarray, shape (n,)
        Strictly positive point masses.
    """

    d: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("metric matrix must be square")
        if m.shape != (d.shape[0],):
            raise ValueError("mass vector length must match metric size")
        if d.shape[0] < 2:
            raise ValueError("a metric-measure space needs at least 2 points")
        d.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.m.sum())

    @property
    def diameter(self) -> float:
        return float(self.d.max())

    @property
    def min_distance(self) -> float:
        """Smallest distance between distinct points."""
        off = self.d + np.diag(np.full(self.n, np.inf))
        return float(off.min())

    def integral(self, f) -> float:
        return float(np.dot(np.asarray(f, dtype=float), self.m))

    def inner(self, f, g) -> float:
        return float(np.dot(np.asarray(f, dtype=float) * self.m, np.asarray(g, dtype=float)))

    def norm1(self, f) -> float:
        return float(np.dot(np.abs(np.asarray(f, dtype=float)), self.m))

    def norm2(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(np.sqrt(np.dot(f * f, self.m)))

    def norm_inf(self, f) -> float:
        return float(np.max(np.abs(np.asarray(f, dtype=float))))


def split_signs(f):
    """Positive and negative parts: f = fp - fn with fp * fn = 0."""
    f = np.asarray(f, dtype=float)
    return np.maximum(f, 0.0), np.maximum(-f, 0.0)


@dataclass(frozen=True, eq=False)
class SubsetIndicator:
    """Boolean mask of a point subset."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_indices(cls, indices, n: int) -> "SubsetIndicator":
        mask = np.zeros(n, dtype=bool)
        mask[list(indices)] = True
        return cls(mask)

    @classmethod
    def from_bitmask(cls, bits: int, n: int) -> "SubsetIndicator":
        return cls(np.array([(bits >> i) & 1 for i in range(n)], dtype=bool))

    def indicator(self) -> np.ndarray:
        return self.mask.astype(float)

    def mass(self, space: MetricMeasureSpace) -> float:
        return float(space.m[self.mask].sum())

    def complement(self) -> "SubsetIndicator":
        return SubsetIndicator(~self.mask)

    @property
    def bitmask(self) -> int:
        return int(sum(1 << i for i in np.nonzero(self.mask)[0]))

    @property
    def size(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Signed atomic measure, canonicalized to one atom per point.

    Coefficients are the atom masses themselves (they already include any
    reference-measure factor), so the total variation is just the sum of
    their absolute values.
    """

    points: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=int)
        cs = np.asarray(self.coeffs, dtype=float)
        if pts.shape != cs.shape or pts.ndim != 1:
            raise ValueError("points and coefficients must be 1-d of equal length")
        # aggregate duplicates, sort by point index
        order = np.argsort(pts, kind="stable")
        pts, cs = pts[order], cs[order]
        uniq, inverse = np.unique(pts, return_inverse=True)
        agg = np.zeros(len(uniq))
        np.add.at(agg, inverse, cs)
        uniq.setflags(write=False)
        agg.setflags(write=False)
        object.__setattr__(self, "points", uniq)
        object.__setattr__(self, "coeffs", agg)

    @classmethod
    def delta(cls, x: int) -> "AtomicMeasure":
        return cls(np.array([x]), np.array([1.0]))

    @classmethod
    def from_density(cls, space: MetricMeasureSpace, f) -> "AtomicMeasure":
        """The measure f*m: atom (x, f(x) m(x)) at every point."""
        f = np.asarray(f, dtype=float)
        return cls(np.arange(space.n), f * space.m)

    @classmethod
    def from_point_masses(cls, masses) -> "AtomicMeasure":
        masses = np.asarray(masses, dtype=float)
        return cls(np.arange(len(masses)), masses)

    def as_point_masses(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.points] = self.coeffs
        return out

    @property
    def total_mass(self) -> float:
        return float(self.coeffs.sum())

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.coeffs).sum())

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.coeffs >= 0.0))

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return AtomicMeasure(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.coeffs, -other.coeffs]),
        )

    def scaled(self, alpha: float) -> "AtomicMeasure":
        return AtomicMeasure(self.points, self.coeffs * alpha)


@dataclass(frozen=True)
class Violation:
    """One failed space axiom with the witnessing indices."""

    axiom: str
    where: tuple
    detail: str = ""

    def __str__(self):
        loc = f" at {self.where}" if self.where else ""
        return f"{self.axiom}{loc}: {self.detail}" if self.detail else f"{self.axiom}{loc}"


def validate_space(space: MetricMeasureSpace, rel_tol: float = 1e-12) -> list[Violation]:
    """Check every metric-measure axiom; returns [] iff the space is valid.

    Validation never raises: every broken axiom becomes a
    :class:`Violation` naming the axiom and the witnessing indices.
    """
    out: list[Violation] = []
    d, m, n = space.d, space.m, space.n
    scale = max(1.0, float(np.max(np.abs(d))))

    asym = np.abs(d - d.T)
    if asym.max() > rel_tol * scale:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        out.append(Violation("symmetry", (int(i), int(j)), f"|d(x,y)-d(y,x)| = {asym[i, j]:.3e}"))
    diag = np.abs(np.diag(d))
    if diag.max() > 0.0:
        i = int(np.argmax(diag))
        out.append(Violation("zero-diagonal", (i,), f"d(x,x) = {diag[i]:.3e}"))
    off = d + np.diag(np.full(n, np.inf))
    if off.min() <= 0.0:
        i, j = np.unravel_index(np.argmin(off), off.shape)
        out.append(Violation("positivity", (int(i), int(j)), f"d(x,y) = {off[i, j]:.3e} for x != y"))
    # triangle inequality, vectorized over the middle point
    worst = 0.0
    witness = None
    for k in range(n):
        via = d[:, k][:, None] + d[k, :][None, :]
        gap = d - via
        g = gap.max()
        if g > worst:
            worst = g
            i, j = np.unravel_index(np.argmax(gap), gap.shape)
            witness = (int(i), int(k), int(j))
    if worst > rel_tol * scale and witness is not None:
        out.append(
            Violation("triangle", witness, f"d(x,z) exceeds d(x,y)+d(y,z) by {worst:.3e}")
        )
    nonpos = np.nonzero(m <= 0.0)[0]
    for i in nonpos:
        out.append(Violation("full-support", (int(i),), f"m(x) = {m[i]:.3e} must be > 0"))
    total = m.sum()
    if not np.isfinite(total) or total <= 0.0:
        out.append(Violation("finite-mass", (), f"total mass = {total}"))
    if not np.all(np.isfinite(d)):
        i, j = np.unravel_index(int(np.argmax(~np.isfinite(d))), d.shape)
        out.append(Violation("finite-metric", (int(i), int(j)), "non-finite distance"))
    return out


def calibrate_metric(space: MetricMeasureSpace, dirichlet: "DirichletStructure") -> MetricMeasureSpace:
    """Rescale the metric so the square gradient respects Lipschitz bounds.

    Divides ``d`` by sqrt(Q_max) where Q(x) = (1/(2 m(x))) sum_y w_xy d(x,y)^2.
    Afterwards Q(x) <= 1 everywhere with equality at some point, which makes
    sqrt(Gamma(f)) <= Lip(f) hold for every function f.  The metric only
    shrinks (Q_max >= 1 leaves contraction; Q_max <= 1 expands -- both are a
    single similarity, so all metric axioms survive).
    """
    w = dirichlet.w
    if w.shape != space.d.shape:
        raise ValueError("space and Dirichlet structure have different sizes")
    on_edge = w > 0.0
    if np.any(on_edge & (space.d <= 0.0) & ~np.eye(space.n, dtype=bool)):
        raise ValueError("an edge with positive conductance has zero distance")
    q = (w * space.d**2).sum(axis=1) / (2.0 * space.m)
    q_max = float(q.max())
    if q_max <= 0.0:
        raise ValueError("Dirichlet structure has no edges")
    return MetricMeasureSpace(space.d / np.sqrt(q_max), space.m)


def _grid_index(i, j, n2):
    return i * n2 + j


def _family_edges(family: str, params: dict, rng_seed_shift: int = 0):
    """Vertex count and (i, j, length) edge list for one generator family."""
    if family == "two_point":
        return 2, [(0, 1, 1.0)]
    if family == "path":
        n = int(params["n"])
        if n < 2:
            raise ValueError("path needs n >= 2")
        return n, [(i, i + 1, 1.0) for i in range(n - 1)]
    if family == "cycle":
        n = int(params["n"])
        if n < 3:
            raise ValueError("cycle needs n >= 3")
        return n, [(i, (i + 1) % n, 1.0) for i in range(n)]
    if family == "star":
        n = int(params["n"])
        if n < 2:
            raise ValueError("star needs n >= 2")
        return n, [(0, i, 1.0) for i in range(1, n)]
    if family == "complete":
        n = int(params["n"])
        if n < 2:
            raise ValueError("complete needs n >= 2")
        return n, [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)]
    if family == "grid":
        n1, n2 = int(params["n1"]), int(params["n2"])
        torus = bool(params.get("torus", False))
        if n1 * n2 < 2:
            raise ValueError("grid needs at least 2 points")
        edges = []
        for i in range(n1):
            for j in range(n2):
                a = _grid_index(i, j, n2)
                if i + 1 < n1:
                    edges.append((a, _grid_index(i + 1, j, n2), 1.0))
                elif torus and n1 > 2:
                    edges.append((a, _grid_index(0, j, n2), 1.0))
                if j + 1 < n2:
                    edges.append((a, _grid_index(i, j + 1, n2), 1.0))
                elif torus and n2 > 2:
                    edges.append((a, _grid_index(i, 0, n2), 1.0))
        return n1 * n2, edges
    if family == "random_geometric":
        n = int(params["n"])
        radius = float(params["radius"])
        seed = int(params.get("seed", 0)) + rng_seed_shift
        if n < 2:
            raise ValueError("random_geometric needs n >= 2")
        rng = np.random.default_rng(seed)
        pts = rng.random((n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        edges = [
            (i, j, float(dist[i, j]))
            for i in range(n)
            for j in range(i + 1, n)
            if dist[i, j] <= radius and dist[i, j] > 0.0
        ]
        return n, edges
    raise ValueError(f"unknown family '{family}' (known: {', '.join(_FAMILIES)})")


def parse_family(descriptor: str) -> tuple[str, dict]:
    """Parse 'family' or 'family:key=value,key=value' descriptors."""
    if ":" in descriptor:
        family, _, rest = descriptor.partition(":")
        params = {}
        for piece in rest.split(","):
            if not piece:
                continue
            if "=" not in piece:
                raise ValueError(f"malformed parameter '{piece}' in '{descriptor}'")
            key, _, value = piece.partition("=")
            try:
                params[key] = int(value)
            except ValueError:
                try:
                    params[key] = float(value)
                except ValueError:
                    params[key] = value
        return family, params
    return descriptor, {}


def generate_space(spec, params: dict | None = None, *, masses=None, weights=None,
                   calibrate: bool = True):
    """Build a connected test space from a family descriptor.

    Parameters
    ----------
    spec : str
        Family name or 'family:key=value' descriptor (two_point, path, cycle,
        grid, star, random_geometric, complete).
    params : dict, optional
        Family parameters; merged over any parsed from ``spec``.
    masses : array_like, optional
        Per-point mass overrides (default all ones).
    weights : dict or ndarray, optional
        Conductance overrides: either {(i, j): w} for existing edges or a
        full symmetric matrix supported on the family's edge set.
    calibrate : bool
        Rescale the shortest-path metric via :func:`calibrate_metric`.

    Returns
    -------
    (MetricMeasureSpace, DirichletStructure)
    """
    from .dirichlet import DirichletStructure

    if isinstance(spec, str):
        family, parsed = parse_family(spec)
    else:
        family, parsed = spec, {}
    if params:
        parsed.update(params)

    attempts = 100 if family == "random_geometric" else 1
    n = None
    lengths = None
    for shift in range(attempts):
        n, edges = _family_edges(family, parsed, rng_seed_shift=shift)
        lengths = np.zeros((n, n))
        for i, j, ell in edges:
            lengths[i, j] = ell
            lengths[j, i] = ell
        d = shortest_path(lengths, method="D", directed=False)
        if np.all(np.isfinite(d)):
            break
    else:
        raise ValueError(f"no connected draw for '{family}' after {attempts} attempts")

    adj = lengths > 0.0
    w = adj.astype(float)
    if weights is not None:
        if isinstance(weights, dict):
            for (i, j), val in weights.items():
                if not adj[i, j]:
                    raise ValueError(f"weight override on non-edge ({i}, {j})")
                w[i, j] = w[j, i] = float(val)
        else:
            weights = np.asarray(weights, dtype=float)
            if np.any((weights > 0) & ~adj):
                raise ValueError("weight override introduces edges outside the family graph")
            w = np.where(adj, weights, 0.0)
    if np.any(w[adj] <= 0.0):
        raise ValueError("edge conductances must stay positive")

    m = np.ones(n) if masses is None else np.asarray(masses, dtype=float).copy()
    if m.shape != (n,) or np.any(m <= 0.0):
        raise ValueError("mass override must be a positive vector of length n")

    space = MetricMeasureSpace(d, m)
    dirichlet = DirichletStructure(w, m)
    if calibrate:
        space = calibrate_metric(space, dirichlet)
    return space, dirichlet


def space_to_dict(space: MetricMeasureSpace, dirichlet: "DirichletStructure") -> dict:
    return {
        "n": space.n,
        "d": [float(v) for v in space.d.ravel()],
        "m": [float(v) for v in space.m],
        "w": [float(v) for v in dirichlet.w.ravel()],
    }


def space_from_dict(data: dict):
    from .dirichlet import DirichletStructure

    n = int(data["n"])
    d = np.asarray(data["d"], dtype=float).reshape(n, n)
    m = np.asarray(data["m"], dtype=float)
    w = np.asarray(data["w"], dtype=float).reshape(n, n)
    return MetricMeasureSpace(d, m), DirichletStructure(w, m)


def save_space(path, space, dirichlet):
    with open(path, "w") as fh:
        json.dump(space_to_dict(space, dirichlet), fh, indent=1)
        fh.write("\n")


def load_space(path):
    with open(path) as fh:
        return space_from_dict(json.load(fh))
