import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semlab import (
    PowerControl,
    PowerLogControl,
    ReferenceRCDControl,
    TabulatedControl,
    build_heat_operator,
    c_star,
    control_eval,
    control_from_dict,
    control_primitive,
    control_to_dict,
    fit_power_control,
    generate_space,
    log_threshold_T,
)
from semlab.controls import j_kappa
from semlab.inequalities import default_t_grid


def test_reference_rcd_eval():
    control = ReferenceRCDControl(K=0.0, M=1.0)
    assert control_eval(control, 1.0) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert control_eval(control, 0.125) == pytest.approx(2.0, abs=1e-12)


def test_power_eval():
    control = PowerControl(2.0, 0.5)
    assert control_eval(control, 0.25) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        control_eval(control, 1.5)  # outside the horizon
    strong = PowerControl(2.0, 0.5, strong=True)
    assert control_eval(strong, 4.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        control_eval(control, 0.0)


def test_j_kappa_continuity_at_zero_curvature():
    for K in (1e-8, -1e-8):
        assert j_kappa(K, 1.0) == pytest.approx(0.5, abs=1e-6)
    # closed form sanity away from zero
    assert j_kappa(2.0, 0.5) == pytest.approx(2.0 / (math.exp(2.0) - 1.0), rel=1e-12)
    assert j_kappa(-1.0, 1.0) == pytest.approx(-1.0 / (math.exp(-2.0) - 1.0), rel=1e-12)


def test_power_primitive_closed_form():
    control = PowerControl(1.0, 0.5)
    assert control_primitive(control, 1.0) == pytest.approx(2.0, abs=1e-14)
    assert control_primitive(control, 0.0) == 0.0
    # C(t) = M-tilde t^{1-b} exactly for the power shape
    for t in (0.01, 0.2, 0.9):
        assert control_primitive(control, t) == pytest.approx(
            2.0 * math.sqrt(t), rel=1e-14)


def test_powerlog_primitive_quadrature():
    control = PowerLogControl(M=1.5, a=2.0, b=0.5)
    # oracle: dense trapezoid on a substituted smooth grid
    t = 0.8
    taus = np.linspace(0.0, t ** (1.0 / 4.0), 200001)
    p = 4.0
    vals = np.where(taus > 0,
                    1.5 * p * taus * (1 + np.abs(p * np.log(np.where(taus > 0, taus, 1.0)))) ** 2.0,
                    0.0)
    oracle = np.trapezoid(vals, taus)
    assert control_primitive(control, t) == pytest.approx(oracle, rel=1e-7)
    assert control_primitive(control, 0.0) == 0.0


def test_rcd_primitive_against_power_bound():
    control = ReferenceRCDControl(K=0.0, M=1.0)
    # j_0 integrates in closed form: int sqrt(1/(2s)) ds = sqrt(2 t)
    for t in (0.1, 0.5, 2.0):
        assert control_primitive(control, t) == pytest.approx(
            math.sqrt(2.0 * t), rel=1e-10)
    positive = ReferenceRCDControl(K=1.0, M=1.0)
    assert control_primitive(positive, 1.0) < control_primitive(control, 1.0)


def test_tabulated_envelope_semantics():
    control = TabulatedControl([0.1, 0.2, 0.4], [4.0, 2.0, 1.0])
    assert control_eval(control, 0.05) == 4.0   # constant left extension
    assert control_eval(control, 0.1) == 4.0
    assert control_eval(control, 0.15) == 4.0   # right-continuous step
    assert control_eval(control, 0.2) == 2.0
    assert control_eval(control, 0.39) == 2.0
    assert control_eval(control, 0.4) == 1.0
    with pytest.raises(ValueError):
        control_eval(control, 0.5)
    with pytest.raises(ValueError):
        TabulatedControl([0.1, 0.2], [1.0, 2.0])  # increasing values rejected


def test_tabulated_primitive_step_areas():
    control = TabulatedControl([0.1, 0.2], [3.0, 1.0])
    assert control_primitive(control, 0.05) == pytest.approx(0.15)
    assert control_primitive(control, 0.1) == pytest.approx(0.3)
    assert control_primitive(control, 0.15) == pytest.approx(0.45)
    assert control_primitive(control, 0.2) == pytest.approx(0.6)


def test_tabulated_primitive_converges_to_true_integral(p2, p2_heat):
    # stepped c_star samples on refining grids approach the closed form
    target = math.sqrt(2) / 2 * (1 - math.exp(-2 * 0.9))
    errors = []
    for count in (50, 400, 3200):
        grid = np.geomspace(1e-4, 1.0, count)
        control = TabulatedControl(grid, [c_star(p2_heat, float(t)) for t in grid])
        errors.append(abs(control_primitive(control, 0.9) - target))
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] <= 1e-3
    fine = np.geomspace(1e-6, 1.0, 120000)
    control = TabulatedControl(fine, np.sqrt(2) * np.exp(-2 * fine))
    assert control_primitive(control, 0.9) == pytest.approx(target, abs=1e-4)


def test_fit_recovers_generating_power():
    grid = default_t_grid()
    control = PowerControl(3.0, 0.5)
    samples = [control_eval(control, float(t)) for t in grid]
    fitted = fit_power_control(grid, samples)
    assert fitted.b == 0.5
    assert fitted.M == pytest.approx(3.0, abs=1e-12)


def test_fit_constant_samples():
    grid = default_t_grid()
    fitted = fit_power_control(grid, np.ones_like(grid))
    assert fitted.b == 0.05  # smallest grid exponent on ties
    assert fitted.M == pytest.approx(1.0, abs=1e-12)


def test_fit_envelope_on_p2_samples(p2_heat):
    grid = default_t_grid()
    samples = np.array([c_star(p2_heat, float(t)) for t in grid])
    for b in (0.05, 0.5, None):
        fitted = fit_power_control(grid, samples, b=b)
        bounds = np.array([control_eval(fitted, float(t)) for t in grid])
        assert np.all(bounds >= samples)  # exact sample domination


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_fit_envelope_is_exact_for_random_samples(seed):
    rng = np.random.default_rng(seed)
    ts = np.sort(rng.uniform(1e-4, 1.0, 12))
    cs = rng.uniform(0.1, 5.0, 12)
    fitted = fit_power_control(ts, cs)
    assert np.all(fitted.M / ts**fitted.b >= cs)


def test_fit_rejects_bad_samples():
    with pytest.raises(ValueError):
        fit_power_control([], [])
    with pytest.raises(ValueError):
        fit_power_control([0.5, 1.5], [1.0, 1.0])  # t outside (0, 1]


def test_log_threshold_trivial_cases():
    assert log_threshold_T(0.0, 0.7) == 1.0
    assert log_threshold_T(1.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert log_threshold_T(0.5, 1.0) == 1.0  # a <= eps keeps T = 1


@pytest.mark.parametrize("a", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("eps", [0.25, 0.5, 1.0])
def test_log_threshold_equation_and_guarantee(a, eps):
    T = log_threshold_T(a, eps)
    assert 0.0 < T <= 1.0
    u = -math.log(T)
    # residual of the defining equation in its well-conditioned log form
    assert abs(a * math.log1p(u) - eps * u) <= 1e-10 * (1.0 + eps * u)
    # downstream guarantee on a 100-point grid of (0, T]
    for t in np.linspace(T / 100.0, T, 100):
        lhs = (1.0 + abs(math.log(t))) ** a
        rhs = t ** (-eps)
        assert lhs <= rhs * (1.0 + 1e-12)


def test_log_threshold_smallest_solution():
    # for a=2, eps=1 the nontrivial root satisfies (1+u)^2 = e^u with u in (2, 3)
    T = log_threshold_T(2.0, 1.0)
    u = -math.log(T)
    assert 2.0 < u < 3.0
    # bisection oracle on the raw equation confirms the same root
    lo, hi = 2.0, 3.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if (1 + mid) ** 2 > math.exp(mid):
            lo = mid
        else:
            hi = mid
    assert u == pytest.approx(0.5 * (lo + hi), abs=1e-10)


def test_primitive_monotone_and_subadditive_sanity():
    for control in (PowerControl(2.0, 0.35), PowerLogControl(1.0, 1.0, 0.5),
                    ReferenceRCDControl(K=0.5, M=1.25),
                    TabulatedControl([0.05, 0.2, 1.0], [3.0, 2.0, 0.5])):
        ts = np.linspace(0.01, control.horizon[1] if control.horizon[1] != math.inf else 2.0, 17)
        values = [control_primitive(control, float(t)) for t in ts]
        assert all(a < b for a, b in zip(values, values[1:]))
        # C(t) <= t c(t0) + C(t0) for t >= t0 on non-increasing controls
        t0 = float(ts[4])
        c0 = control_eval(control, t0)
        base = control_primitive(control, t0)
        for t in ts[5:]:
            assert control_primitive(control, float(t)) <= base + float(t) * c0 + 1e-9


def test_control_serialization_round_trip():
    controls = [PowerControl(2.0, 0.5, strong=True),
                PowerLogControl(1.0, 2.0, 0.25),
                TabulatedControl([0.1, 0.5], [2.0, 1.0]),
                ReferenceRCDControl(K=-0.5, M=1.5)]
    for control in controls:
        data = control_to_dict(control)
        rebuilt = control_from_dict(data)
        assert type(rebuilt) is type(control)
        t_probe = 0.25
        assert control_eval(rebuilt, t_probe) == control_eval(control, t_probe)


def test_horizon_substitution_keeps_explicit_checks_valid():
    # controls valid only on (0, T]: rerunning the explicit family with the
    # time choices scaled by T must still pass
    from semlab import h1_exact
    from semlab.inequalities import (
        check_buser,
        check_eigen_bounds,
        check_indeterminacy,
    )

    space, dirichlet = generate_space("cycle:n=6")
    heat = build_heat_operator(space, dirichlet)
    T = log_threshold_T(2.0, 0.25)
    grid = default_t_grid(hi=T)
    samples = [c_star(heat, float(t)) for t in grid]
    fitted = fit_power_control(grid * (1.0 / T), samples)  # envelope on (0, T] after t -> t/T
    fitted = PowerControl(fitted.M * T**fitted.b, fitted.b)  # back to original times
    h1 = h1_exact(space, dirichlet)
    rep = check_buser(space, dirichlet, heat, mode="explicit", control=fitted,
                      h1=h1, horizon=T, verify_grid=grid)
    assert rep.passed
    phi1 = heat.eigenvectors[:, 1]
    rep = check_indeterminacy(space, dirichlet, heat, phi1, control=fitted,
                              h1=h1, horizon=T, verify_grid=grid)
    assert rep.passed
    reps = check_eigen_bounds(space, dirichlet, heat, 1, mode="explicit",
                              control=fitted, lambda_tilde=heat.lambda1,
                              horizon=T, verify_grid=grid)
    assert all(r.passed for r in reps)
