"""Upper envelopes for the smoothing constant and their primitives.

A control is a positive function c(t) dominating the measured smoothing
constant on its horizon.  Supported shapes:

* ``PowerControl``       c(t) = M / t^b on (0, 1], or on (0, inf) if strong;
* ``PowerLogControl``    c(t) = M (1 + |log t|)^a / t^b on (0, 1];
* ``TabulatedControl``   non-increasing step envelope through sample points;
* ``ReferenceRCDControl``c(t) = M sqrt(j_K(t)) with j_K(t) = K/(e^{2Kt}-1)
  (1/(2t) at K = 0) on (0, inf).

Every control integrates from zero: the power primitive is the closed form
M t^{1-b} / (1-b), steps integrate exactly, and the singular variants are
integrated by Gauss-Legendre after a power substitution that removes the
endpoint singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PowerControl",
    "PowerLogControl",
    "TabulatedControl",
    "ReferenceRCDControl",
    "control_eval",
    "control_primitive",
    "fit_power_control",
    "log_threshold_T",
    "control_to_dict",
    "control_from_dict",
    "FIT_B_GRID",
]

FIT_B_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


def _check_in_horizon(control, t: float):
    lo, hi = control.horizon
    if not (lo < t <= hi):
        raise ValueError(
            f"time {t} outside the control horizon ({lo}, {hi}]"
        )


@dataclass(frozen=True)
class PowerControl:
    """c(t) = M / t^b with b in (0, 1); strong controls hold for all t > 0."""

    M: float
    b: float
    strong: bool = False

    def __post_init__(self):
        if not (0.0 < self.b < 1.0):
            raise ValueError("power exponent must lie in (0, 1)")
        if self.M < 0.0:
            raise ValueError("power constant must be nonnegative")

    @property
    def horizon(self) -> tuple[float, float]:
        return (0.0, math.inf if self.strong else 1.0)

    @property
    def M_tilde(self) -> float:
        return self.M / (1.0 - self.b)

    def eval(self, t: float) -> float:
        _check_in_horizon(self, t)
        return self.M / t**self.b

    def primitive(self, t: float) -> float:
        if t < 0.0:
            raise ValueError("primitive needs t >= 0")
        return self.M_tilde * t ** (1.0 - self.b)


@dataclass(frozen=True)
class PowerLogControl:
    """c(t) = M (1 + |log t|)^a / t^b on (0, 1]."""

    M: float
    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.b < 1.0):
            raise ValueError("power exponent must lie in (0, 1)")
        if self.a < 0.0 or self.M < 0.0:
            raise ValueError("log exponent and constant must be nonnegative")

    @property
    def horizon(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def eval(self, t: float) -> float:
        _check_in_horizon(self, t)
        return self.M * (1.0 + abs(math.log(t))) ** self.a / t**self.b

    def primitive(self, t: float) -> float:
        if t < 0.0:
            raise ValueError("primitive needs t >= 0")
        if t == 0.0:
            return 0.0
        # s = tau^p with p = 2/(1-b) turns s^{-b} ds into p tau dtau: the
        # integrand becomes continuous at 0 (tau log tau -> 0)
        p = 2.0 / (1.0 - self.b)

        def integrand(taus):
            taus = np.asarray(taus)
            out = np.zeros_like(taus)
            pos = taus > 0.0
            tp = taus[pos]
            out[pos] = p * tp * (1.0 + np.abs(p * np.log(tp))) ** self.a
            return self.M * out

        return _adaptive_quadrature(integrand, 0.0, t ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class TabulatedControl:
    """Non-increasing step envelope through positive (t, c) samples.

    Constant left of the first node, right-continuous steps between nodes.
    Sampling a non-increasing function therefore yields a valid upper
    envelope.  The horizon ends at the last node.
    """

    t_nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.t_nodes, dtype=float)
        vs = np.asarray(self.values, dtype=float)
        if ts.ndim != 1 or ts.shape != vs.shape or len(ts) == 0:
            raise ValueError("need equal-length nonempty node and value arrays")
        order = np.argsort(ts, kind="stable")
        ts, vs = ts[order], vs[order]
        if ts[0] <= 0.0 or np.any(vs <= 0.0):
            raise ValueError("nodes and values must be positive")
        if np.any(np.diff(ts) <= 0.0):
            raise ValueError("nodes must be distinct")
        if np.any(np.diff(vs) > 0.0):
            raise ValueError("tabulated control must be non-increasing")
        ts.setflags(write=False)
        vs.setflags(write=False)
        object.__setattr__(self, "t_nodes", ts)
        object.__setattr__(self, "values", vs)

    @property
    def horizon(self) -> tuple[float, float]:
        return (0.0, float(self.t_nodes[-1]))

    def eval(self, t: float) -> float:
        _check_in_horizon(self, t)
        idx = int(np.searchsorted(self.t_nodes, t, side="right")) - 1
        return float(self.values[max(idx, 0)])

    def primitive(self, t: float) -> float:
        if t < 0.0:
            raise ValueError("primitive needs t >= 0")
        ts, vs = self.t_nodes, self.values
        total = vs[0] * min(t, ts[0])
        for k in range(len(ts) - 1):
            if t <= ts[k]:
                break
            total += vs[k] * (min(t, ts[k + 1]) - ts[k])
        if t > ts[-1]:
            total += vs[-1] * (t - ts[-1])  # constant extension past the last node
        return float(total)


def j_kappa(K: float, t: float) -> float:
    """j_K(t) = K / (e^{2Kt} - 1), continuously 1/(2t) at K = 0."""
    if t <= 0.0:
        raise ValueError("needs t > 0")
    if K == 0.0:
        return 1.0 / (2.0 * t)
    return K / math.expm1(2.0 * K * t)


@dataclass(frozen=True)
class ReferenceRCDControl:
    """c(t) = M sqrt(j_K(t)) for all t > 0, the curvature-derived preset."""

    K: float
    M: float = 1.0

    def __post_init__(self):
        if self.M < 1.0:
            raise ValueError("reference preset needs M >= 1")

    @property
    def horizon(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def eval(self, t: float) -> float:
        _check_in_horizon(self, t)
        return self.M * math.sqrt(j_kappa(self.K, t))

    def primitive(self, t: float) -> float:
        if t < 0.0:
            raise ValueError("primitive needs t >= 0")
        if t == 0.0:
            return 0.0
        # s = tau^2: 2 tau sqrt(j_K(tau^2)) extends smoothly to tau = 0
        K, M = self.K, self.M

        def integrand(taus):
            taus = np.asarray(taus)
            out = np.empty_like(taus)
            for i, tau in enumerate(taus):
                if tau == 0.0:
                    out[i] = math.sqrt(2.0)
                else:
                    out[i] = 2.0 * tau * math.sqrt(j_kappa(K, tau * tau))
            return M * out

        return _adaptive_quadrature(integrand, 0.0, math.sqrt(t))


def _adaptive_quadrature(func_vec, lo: float, hi: float, rel_tol: float = 1e-12,
                         max_panels: int = 4096) -> float:
    from numpy.polynomial.legendre import leggauss

    if hi <= lo:
        return 0.0
    x, wts = leggauss(8)
    panels = 4
    previous = None
    while panels <= max_panels:
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        vals = np.asarray(func_vec(pts)).reshape(panels, 8)
        current = float((half * (vals @ wts)).sum())
        if previous is not None and abs(current - previous) <= rel_tol * (1.0 + abs(current)):
            return current
        previous = current
        panels *= 2
    return previous


def control_eval(control, t: float) -> float:
    """Evaluate any control at a time inside its horizon."""
    return control.eval(t)


def control_primitive(control, t: float) -> float:
    """C(t) = integral of the control from 0 to t; C(0) = 0."""
    return control.primitive(t)


def fit_power_control(sample_t, sample_c, b: float | None = None,
                      strong: bool = False) -> PowerControl:
    """Fit the tightest power envelope through measured (t, c) samples.

    For each exponent on the fitting grid the smallest admissible constant
    is M(b) = max_i c_i t_i^b; the exponent minimizing M(b) wins, smallest b
    on ties.  The returned envelope dominates every sample exactly (the
    constant is nudged up by ulps if rounding would break a sample).
    """
    ts = np.asarray(sample_t, dtype=float)
    cs = np.asarray(sample_c, dtype=float)
    if ts.size == 0:
        raise ValueError("cannot fit a control to zero samples")
    if ts.shape != cs.shape:
        raise ValueError("sample arrays must have equal length")
    if np.any(ts <= 0.0) or np.any(ts > 1.0) or np.any(cs <= 0.0):
        raise ValueError("samples must satisfy t in (0, 1] and c > 0")

    if b is None:
        grid = np.array(FIT_B_GRID)
        envelopes = np.array([float((cs * ts**bb).max()) for bb in grid])
        b_fit = float(grid[int(np.argmin(envelopes))])
    else:
        if not (0.0 < b < 1.0):
            raise ValueError("fixed exponent must lie in (0, 1)")
        b_fit = float(b)
    m_fit = float((cs * ts**b_fit).max())
    # exact sample domination despite round-off
    for _ in range(8):
        if np.all(m_fit / ts**b_fit >= cs):
            break
        m_fit = float(np.nextafter(m_fit, np.inf))
    return PowerControl(m_fit, b_fit, strong=strong)


def log_threshold_T(a: float, eps: float) -> float:
    """Smallest T in (0, 1] with (1 + |log T|)^a = T^{-eps}.

    Below this threshold the logarithmic factor is absorbed into the power:
    (1 + |log t|)^a <= t^{-eps} for all t in (0, T].  Solved in the
    well-conditioned logarithmic form a log(1 + u) = eps u for u = -log T;
    for a <= eps the only root is u = 0, so T = 1.
    """
    if a < 0.0 or eps <= 0.0:
        raise ValueError("need a >= 0 and eps > 0")
    if a <= eps:
        return 1.0

    def phi(u):
        return a * math.log1p(u) - eps * u

    lo = a / eps - 1.0  # phi is positive at its maximum point
    hi = max(2.0 * lo, 2.0)
    while phi(hi) > 0.0:
        hi *= 2.0
    # keep the invariant phi(lo) > 0 >= phi(hi): the returned root rounds
    # toward the guaranteed side (T no larger than the exact threshold)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if phi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    # Newton polish from the guaranteed side
    u = hi
    for _ in range(4):
        slope = a / (1.0 + u) - eps
        if slope == 0.0:
            break
        step = phi(u) / slope
        u_new = u - step
        if not (lo <= u_new):
            break
        u = u_new
    if phi(u) > 0.0:
        u = hi
    return math.exp(-u)


def control_to_dict(control) -> dict:
    if isinstance(control, PowerControl):
        return {"variant": "power", "M": control.M, "b": control.b, "strong": control.strong}
    if isinstance(control, PowerLogControl):
        return {"variant": "power_log", "M": control.M, "a": control.a, "b": control.b}
    if isinstance(control, TabulatedControl):
        return {
            "variant": "tabulated",
            "t": [float(v) for v in control.t_nodes],
            "c": [float(v) for v in control.values],
        }
    if isinstance(control, ReferenceRCDControl):
        return {"variant": "reference_rcd", "K": control.K, "M": control.M}
    raise TypeError(f"unknown control type {type(control).__name__}")


def control_from_dict(data: dict):
    variant = data.get("variant")
    if variant == "power":
        return PowerControl(float(data["M"]), float(data["b"]), bool(data.get("strong", False)))
    if variant == "power_log":
        return PowerLogControl(float(data["M"]), float(data["a"]), float(data["b"]))
    if variant == "tabulated":
        return TabulatedControl(np.asarray(data["t"], dtype=float), np.asarray(data["c"], dtype=float))
    if variant == "reference_rcd":
        return ReferenceRCDControl(float(data["K"]), float(data.get("M", 1.0)))
    raise ValueError(f"unknown control variant {variant!r}")
