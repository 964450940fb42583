"""Spectral gaps, eigenfunction access, and exact Cheeger constants.

The half-mass Cheeger constant

    h1 = min { Per(A) / m(A) : 0 < m(A) <= m(X) / 2 }

is computed exactly by vectorized enumeration of all subsets (feasible up
to n = 22, about four million masks), with a spectral sweep cut as the
scalable upper bound.  On a connected space of finite total mass the
all-subsets constant h0 is zero (the full set has empty boundary); the
enumerated minimum over proper subsets remains available as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirichlet import DirichletStructure, perimeter
from .heat import HeatOperator
from .spaces import MetricMeasureSpace, SubsetIndicator, split_signs

__all__ = [
    "SpectralSummary",
    "CheegerResult",
    "EnumerationLimitError",
    "spectrum",
    "h1_exact",
    "h1_sweep",
    "h0_value",
    "h0_proper_diagnostic",
    "norm_cheeg_upper",
    "DEFAULT_ENUMERATION_LIMIT",
]

DEFAULT_ENUMERATION_LIMIT = 22


class EnumerationLimitError(ValueError):
    """Raised when exact subset enumeration would be too large."""


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """Sorted spectrum of -Delta with m-orthonormal eigenfunctions."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    multiplicity: np.ndarray  # multiplicity of the eigenvalue group of each index

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[1])

    def eigenfunction(self, i: int) -> np.ndarray:
        return self.eigenvectors[:, i].copy()


def spectrum(heat: HeatOperator) -> SpectralSummary:
    """Spectral summary with zero-mean checks on the nonconstant modes."""
    vals = heat.eigenvalues
    vecs = heat.eigenvectors
    space = heat.space
    if abs(vals[0]) > 1e-10:
        raise ArithmeticError(f"lowest eigenvalue {vals[0]:.3e} is not zero")
    if heat.n >= 2 and vals[1] <= 0.0:
        raise ArithmeticError("spectral gap vanished on a connected space")
    scale = max(1.0, float(np.abs(vecs).max()) * space.total_mass)
    for i in range(1, heat.n):
        f = vecs[:, i]
        mean = space.integral(f)
        if abs(mean) > 1e-10 * scale:
            raise ArithmeticError(f"eigenfunction {i} has nonzero mean {mean:.3e}")
        fp, fn = split_signs(f)
        if abs(space.integral(fp) - space.integral(fn)) > 1e-10 * scale:
            raise ArithmeticError(f"eigenfunction {i} has unbalanced sign parts")
    tol = 1e-8 * (1.0 + float(vals[-1]))
    groups = np.zeros(heat.n, dtype=int)
    start = 0
    for i in range(1, heat.n + 1):
        if i == heat.n or vals[i] - vals[start] > tol:
            groups[start:i] = i - start
            start = i
    return SpectralSummary(vals.copy(), vecs.copy(), groups)


@dataclass(frozen=True, eq=False)
class CheegerResult:
    """Isoperimetric quotient with its witnessing subset."""

    value: float
    witness: SubsetIndicator
    exact: bool


def _cut_weights(dirichlet: DirichletStructure, bits: np.ndarray) -> np.ndarray:
    """Per-vertex boundary conductance for a batch of subsets.

    ``bits`` has shape (n, batch) with 0/1 entries; returns (n, batch) with
    cut[x] = sum of w(x, y) over neighbors y on the other side, computed as
    deg * b + w @ b - 2 b (w @ b) so the whole batch is a single matmul.
    """
    b = bits.astype(float)
    wb = dirichlet.w @ b
    cut = dirichlet.degree[:, None] * b + wb - 2.0 * b * wb
    return np.maximum(cut, 0.0)  # guard round-off before the square root


def _perimeters_from_bits(dirichlet: DirichletStructure, bits: np.ndarray) -> np.ndarray:
    cut = _cut_weights(dirichlet, bits)
    return np.sqrt(dirichlet.m / 2.0) @ np.sqrt(cut)


def _enumerate_best(space: MetricMeasureSpace, dirichlet: DirichletStructure,
                    half_mass: bool, limit: int, chunk: int = 1 << 16):
    n = space.n
    if n > limit:
        raise EnumerationLimitError(
            f"exact enumeration needs n <= {limit} (got n = {n}); use h1_sweep instead"
        )
    total_mass = space.total_mass
    cap = total_mass / 2.0 if half_mass else np.inf
    total = 1 << n
    chunk = min(chunk, total)
    # preallocated per-chunk buffers; the cut is deg*b + (1 - 2b)(w @ b)
    shifts = np.arange(n, dtype=np.int32)[:, None]
    b = np.empty((n, chunk))
    wb = np.empty((n, chunk))
    cut = np.empty((n, chunk))
    sqrt_mh = np.sqrt(dirichlet.m / 2.0)
    w, deg, m = dirichlet.w, dirichlet.degree, space.m

    best_q = np.inf
    best_mask = None
    for start in range(0, total, chunk):
        size = min(chunk, total - start)
        view = (slice(None), slice(0, size))
        masks = np.arange(start, start + size, dtype=np.int32)
        np.copyto(b[view], (masks[None, :] >> shifts) & 1, casting="unsafe")
        np.matmul(w, b[view], out=wb[view])
        np.multiply(b[view], -2.0, out=cut[view])
        cut[view] += 1.0
        cut[view] *= wb[view]
        cut[view] += deg[:, None] * b[view]
        np.maximum(cut[view], 0.0, out=cut[view])  # guard round-off before sqrt
        np.sqrt(cut[view], out=cut[view])
        per = sqrt_mh @ cut[view]
        mass = m @ b[view]
        feasible = mass > 0.0
        if half_mass:
            feasible &= mass <= cap
        else:
            feasible &= mass < total_mass  # proper subsets only
        quotients = np.where(feasible, per / np.where(mass > 0.0, mass, 1.0), np.inf)
        idx = int(np.argmin(quotients))
        if quotients[idx] < best_q:
            best_q = float(quotients[idx])
            best_mask = start + idx
    if best_mask is None:
        raise ArithmeticError("no feasible subset found")
    return best_q, SubsetIndicator.from_bitmask(int(best_mask), n)


def h1_exact(space: MetricMeasureSpace, dirichlet: DirichletStructure,
             limit: int = DEFAULT_ENUMERATION_LIMIT) -> CheegerResult:
    """Exact half-mass Cheeger constant by enumeration of all subsets.

    Deterministic tie-break: the witness with the smallest bitmask wins.
    Raises :class:`EnumerationLimitError` above the exactness frontier.
    """
    value, witness = _enumerate_best(space, dirichlet, half_mass=True, limit=limit)
    return CheegerResult(value, witness, exact=True)


def h1_sweep(space: MetricMeasureSpace, dirichlet: DirichletStructure,
             heat: HeatOperator) -> CheegerResult:
    """Upper bound on h1 from the threshold cuts of the spectral-gap mode.

    Vertices are ordered by the first nonconstant eigenfunction; each of the
    n - 1 prefixes (or its complement, whichever respects the half-mass
    constraint) is a feasible quotient, so the best one bounds h1 above.
    """
    phi1 = heat.eigenvectors[:, 1]
    order = np.lexsort((np.arange(space.n), -phi1))
    total = space.total_mass
    best_q = np.inf
    best_mask = None
    mask = np.zeros(space.n, dtype=bool)
    for k in range(space.n - 1):
        mask[order[k]] = True
        side = mask if space.m[mask].sum() <= total / 2.0 else ~mask
        mass = float(space.m[side].sum())
        if mass <= 0.0 or mass > total / 2.0:
            continue
        q = perimeter(dirichlet, side) / mass
        if q < best_q:
            best_q = float(q)
            best_mask = side.copy()
    if best_mask is None:
        raise ArithmeticError("sweep produced no feasible cut")
    return CheegerResult(best_q, SubsetIndicator(best_mask), exact=False)


def h0_value(space: MetricMeasureSpace, dirichlet: DirichletStructure) -> CheegerResult:
    """All-subsets Cheeger constant: zero whenever the total mass is finite.

    The full space is feasible (0 < m(X) < infinity) and has empty boundary,
    so the infimum is attained there.  See :func:`h0_proper_diagnostic` for
    the minimum restricted to proper subsets.
    """
    return CheegerResult(0.0, SubsetIndicator(np.ones(space.n, dtype=bool)), exact=True)


def h0_proper_diagnostic(space: MetricMeasureSpace, dirichlet: DirichletStructure,
                         limit: int = DEFAULT_ENUMERATION_LIMIT) -> CheegerResult:
    """Minimum of Per(A)/m(A) over proper nonempty subsets, by enumeration."""
    value, witness = _enumerate_best(space, dirichlet, half_mass=False, limit=limit)
    return CheegerResult(value, witness, exact=True)


def norm_cheeg_upper(space: MetricMeasureSpace, dirichlet: DirichletStructure, f) -> float:
    """The zero-mean upper bound 2 Per({f > 0}) ||f||_inf / ||f||_1 for h1."""
    f = np.asarray(f, dtype=float)
    norm1 = space.norm1(f)
    if norm1 == 0.0:
        raise ValueError("needs a nonzero function")
    scale = space.norm_inf(f) * space.total_mass
    if abs(space.integral(f)) > 1e-10 * max(1.0, scale):
        raise ValueError("needs a zero-mean function")
    positive = SubsetIndicator(f > 0.0)
    return 2.0 * perimeter(dirichlet, positive) * space.norm_inf(f) / norm1
