import math

import numpy as np
import pytest

from semlab import (
    AtomicMeasure,
    bl_star,
    build_heat_operator,
    c_star,
    c_star_brute_force,
    c_star_primitive,
    check_heat_ibp,
    dual_heat_measure,
    generate_space,
    heat_apply,
    heat_kernel_density,
    theta_ultracontractivity,
)
from semlab.controls import PowerControl, control_eval
from semlab.dirichlet import lipschitz_constant
from semlab.heat import c_star_zero_limit
from semlab.inequalities import default_t_grid

from conftest import random_weight_space


def test_p2_spectrum(p2_heat):
    np.testing.assert_allclose(p2_heat.eigenvalues, [0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(np.abs(p2_heat.eigenvectors[:, 0]),
                               [1 / math.sqrt(2)] * 2, atol=1e-12)
    np.testing.assert_allclose(np.abs(p2_heat.eigenvectors[:, 1]),
                               [1 / math.sqrt(2)] * 2, atol=1e-12)


def test_complete_graph_spectrum():
    # complete graph on n unit-mass points: eigenvalues (0, n, ..., n)
    for n in (4, 6):
        space, dirichlet = generate_space(f"complete:n={n}")
        heat = build_heat_operator(space, dirichlet)
        expected = np.full(n, float(n))
        expected[0] = 0.0
        np.testing.assert_allclose(heat.eigenvalues, expected, atol=1e-9)


def test_cycle4_spectrum_circulant_oracle():
    space, dirichlet = generate_space("cycle:n=4")
    heat = build_heat_operator(space, dirichlet)
    # circulant eigenvalues 2 - 2 cos(2 pi k / 4)
    expected = sorted(2.0 - 2.0 * math.cos(2 * math.pi * k / 4) for k in range(4))
    np.testing.assert_allclose(heat.eigenvalues, expected, atol=1e-10)


def test_heat_apply_closed_form_p2(p2_heat):
    f = np.array([1.0, 0.0])
    for t in (0.1, 0.5, 2.0):
        expected = [(1 + math.exp(-2 * t)) / 2, (1 - math.exp(-2 * t)) / 2]
        np.testing.assert_allclose(heat_apply(p2_heat, t, f), expected, atol=1e-13)


def test_heat_identity_at_zero(p2_heat):
    f = np.array([0.3, -1.7])
    np.testing.assert_array_equal(heat_apply(p2_heat, 0.0, f), f)
    with pytest.raises(ValueError):
        heat_apply(p2_heat, -0.1, f)


def test_heated_eigenfunction(p2_heat):
    f = np.array([1.0, -1.0])
    np.testing.assert_allclose(heat_apply(p2_heat, 1.0, f),
                               [math.exp(-2), -math.exp(-2)], atol=1e-14)


def test_heat_contraction_and_mass(cycle6):
    space, dirichlet = cycle6
    heat = build_heat_operator(space, dirichlet)
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = rng.standard_normal(space.n)
        t = float(rng.uniform(0.0, 3.0))
        hf = heat_apply(heat, t, f)
        assert space.norm1(hf) <= space.norm1(f) * (1 + 1e-12)
        assert space.norm2(hf) <= space.norm2(f) * (1 + 1e-12)
        assert hf.max() <= f.max() + 1e-12 and hf.min() >= f.min() - 1e-12
        assert space.integral(hf) == pytest.approx(space.integral(f), abs=1e-10)


def test_semigroup_law_and_self_adjointness():
    space, dirichlet = random_weight_space(8)
    heat = build_heat_operator(space, dirichlet)
    rng = np.random.default_rng(8)
    for _ in range(10):
        f, g = rng.standard_normal((2, space.n))
        s, t = rng.uniform(0.05, 1.5, 2)
        two_step = heat_apply(heat, s, heat_apply(heat, t, f))
        one_step = heat_apply(heat, s + t, f)
        assert np.max(np.abs(two_step - one_step)) <= 1e-10
        assert space.inner(f, heat_apply(heat, t, g)) == pytest.approx(
            space.inner(g, heat_apply(heat, t, f)), abs=1e-10)


def test_kernel_density_p2(p2_heat):
    for t in (0.05, 0.8):
        h0 = heat_kernel_density(p2_heat, t, 0)
        np.testing.assert_allclose(
            h0, [(1 + math.exp(-2 * t)) / 2, (1 - math.exp(-2 * t)) / 2], atol=1e-13)
    with pytest.raises(ValueError):
        heat_kernel_density(p2_heat, 0.0, 0)


def test_kernel_equilibrium_long_time(p2_heat):
    space = p2_heat.space
    h = heat_kernel_density(p2_heat, 50.0, 1)
    np.testing.assert_allclose(h, np.full(2, 1.0 / space.total_mass), atol=1e-10)


def test_kernel_symmetry_and_reproduction():
    space, dirichlet = generate_space("random_geometric:n=10,radius=0.6,seed=4")
    heat = build_heat_operator(space, dirichlet)
    t = 0.3
    kernel = np.array([heat_kernel_density(heat, t, x) for x in range(space.n)])
    assert np.max(np.abs(kernel - kernel.T)) <= 1e-10
    assert np.all(kernel >= 0.0)
    np.testing.assert_allclose(kernel @ space.m, np.ones(space.n), atol=1e-10)
    rng = np.random.default_rng(4)
    f = rng.standard_normal(space.n)
    np.testing.assert_allclose(heat_apply(heat, t, f), kernel @ (f * space.m),
                               atol=1e-11)


def test_dual_heat_measure_p2(p2_heat):
    t = 0.4
    pushed = dual_heat_measure(p2_heat, t, AtomicMeasure.delta(0))
    np.testing.assert_allclose(
        pushed.coeffs,
        [(1 + math.exp(-2 * t)) / 2, (1 - math.exp(-2 * t)) / 2], atol=1e-13)
    # stationarity of the reference measure
    space = p2_heat.space
    stationary = dual_heat_measure(p2_heat, t, AtomicMeasure.from_point_masses(space.m))
    np.testing.assert_allclose(stationary.coeffs, space.m, atol=1e-12)
    # total-variation contraction for the signed difference
    signed = dual_heat_measure(
        p2_heat, t, AtomicMeasure.delta(0) - AtomicMeasure.delta(1))
    assert signed.total_variation == pytest.approx(2 * math.exp(-2 * t), abs=1e-12)


def test_dual_heat_adjoint_identity():
    space, dirichlet = random_weight_space(6)
    heat = build_heat_operator(space, dirichlet)
    rng = np.random.default_rng(6)
    mu = AtomicMeasure(np.arange(space.n), rng.standard_normal(space.n))
    f = rng.standard_normal(space.n)
    t = 0.6
    lhs = float(np.dot(heat_apply(heat, t, f)[mu.points], mu.coeffs))
    pushed = dual_heat_measure(heat, t, mu)
    rhs = float(np.dot(f[pushed.points], pushed.coeffs))
    assert lhs == pytest.approx(rhs, abs=1e-10)
    assert pushed.total_variation <= mu.total_variation * (1 + 1e-12)


def test_c_star_closed_form_p2(p2_heat):
    for t in default_t_grid():
        assert c_star(p2_heat, float(t)) == pytest.approx(
            math.sqrt(2) * math.exp(-2 * t), abs=1e-12)


def test_c_star_brute_force_oracle():
    # kernel formula equals the sign-vector supremum on every small space
    specs = ["two_point", "path:n=4", "cycle:n=5", "star:n=6",
             "grid:n1=2,n2=3", "complete:n=5",
             "random_geometric:n=12,radius=0.55,seed=7"]
    for spec in specs:
        space, dirichlet = generate_space(spec)
        heat = build_heat_operator(space, dirichlet)
        for t in (0.01, 0.1, 1.0):
            kernel_value = c_star(heat, t)
            brute = c_star_brute_force(heat, t)
            assert abs(kernel_value - brute) <= 1e-10 * (1 + kernel_value)


def test_c_star_monotone_and_t_c_star_bounded():
    grid = default_t_grid()
    for seed in range(4):
        space, dirichlet = random_weight_space(seed)
        heat = build_heat_operator(space, dirichlet)
        values = np.array([c_star(heat, float(t)) for t in grid])
        assert np.all(values[:-1] >= values[1:] - 1e-12 * (1 + values[:-1]))
        products = grid * values
        assert np.isfinite(products).all()
        assert products.max() <= c_star_zero_limit(heat) * grid.max()


def test_c_star_below_any_control_at_earlier_times(p2_heat):
    # optimality: c_star(t) <= inf over s <= t of any valid control value
    control = PowerControl(2.0, 0.5)
    grid = default_t_grid()
    for t in grid[5:]:
        bound = min(control_eval(control, float(s)) for s in grid if s <= t)
        assert c_star(p2_heat, float(t)) <= bound * (1 + 1e-12)


def test_lip_to_lip_via_diameter():
    # Lip(H_t f) <= diam(X) c_star(t) Lip(f) on 200 random Lipschitz functions
    rng = np.random.default_rng(13)
    space, dirichlet = generate_space("random_geometric:n=9,radius=0.6,seed=13")
    heat = build_heat_operator(space, dirichlet)
    diam = space.diameter
    for _ in range(200):
        f = rng.standard_normal(space.n)
        t = float(rng.uniform(0.02, 2.0))
        lip_before = lipschitz_constant(space, f)
        lip_after = lipschitz_constant(space, heat_apply(heat, t, f))
        assert lip_after <= diam * c_star(heat, t) * lip_before * (1 + 1e-9) + 1e-12


def test_smoothing_against_bl_distance():
    # ||H_t(f0 - f1)||_1 <= max(c_star(t), 1) BL*(f0 m, f1 m)
    rng = np.random.default_rng(17)
    space, dirichlet = random_weight_space(17, n=7)
    heat = build_heat_operator(space, dirichlet)
    for _ in range(15):
        f0 = rng.uniform(0.0, 1.0, space.n)
        f1 = rng.uniform(0.0, 1.0, space.n)
        t = float(rng.uniform(0.05, 1.0))
        lhs = space.norm1(heat_apply(heat, t, f0 - f1))
        cert = bl_star(space, AtomicMeasure.from_density(space, f0),
                       AtomicMeasure.from_density(space, f1))
        assert lhs <= max(c_star(heat, t), 1.0) * cert.value * (1 + 1e-9) + 1e-12


def test_theta_profile_p2(p2_heat):
    for t in (0.05, 0.5, 3.0):
        assert theta_ultracontractivity(p2_heat, t) == pytest.approx(
            (1 + math.exp(-2 * t)) / 2, abs=1e-13)
    assert theta_ultracontractivity(p2_heat, 60.0) == pytest.approx(0.5, abs=1e-12)


def test_theta_sharpness():
    # a Dirac-like density saturates the L1 -> Linf bound
    space, dirichlet = random_weight_space(19, n=6)
    heat = build_heat_operator(space, dirichlet)
    t = 0.4
    theta = theta_ultracontractivity(heat, t)
    best = 0.0
    for x in range(space.n):
        f = np.zeros(space.n)
        f[x] = 1.0 / space.m[x]
        best = max(best, space.norm_inf(heat_apply(heat, t, f)) / space.norm1(f))
    assert best == pytest.approx(theta, rel=1e-10)


def test_mean_zero_l2_decay_and_a_priori_bound():
    space, dirichlet = random_weight_space(23, n=8)
    heat = build_heat_operator(space, dirichlet)
    rng = np.random.default_rng(23)
    lam1 = heat.lambda1
    phi1 = heat.eigenvectors[:, 1]
    for t in (0.1, 0.7, 2.0):
        f = rng.standard_normal(space.n)
        f -= space.integral(f) / space.total_mass
        assert space.norm2(heat_apply(heat, t, f)) <= (
            math.exp(-lam1 * t) * space.norm2(f) * (1 + 1e-10))
        # equality attained by the spectral-gap eigenfunction
        assert space.norm2(heat_apply(heat, t, phi1)) == pytest.approx(
            math.exp(-lam1 * t) * space.norm2(phi1), rel=1e-10)
        # a priori estimate || Delta H_t f ||_2 <= ||f||_2 / t
        from semlab.dirichlet import laplacian_apply

        assert space.norm2(laplacian_apply(dirichlet, heat_apply(heat, t, f))) <= (
            space.norm2(f) / t * (1 + 1e-10))


def test_c_star_primitive_p2_closed_form(p2_heat):
    grid = default_t_grid()
    for t in grid:
        expected = math.sqrt(2) / 2 * (1 - math.exp(-2 * t))
        assert c_star_primitive(p2_heat, float(t), anchors=grid) == pytest.approx(
            expected, abs=1e-11)
        assert c_star_primitive(p2_heat, float(t)) == pytest.approx(expected, abs=1e-11)
    assert c_star_primitive(p2_heat, 0.0) == 0.0


def test_c_star_primitive_monotone():
    space, dirichlet = random_weight_space(29, n=7)
    heat = build_heat_operator(space, dirichlet)
    grid = default_t_grid()
    values = [c_star_primitive(heat, float(t), anchors=grid) for t in grid]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_heat_ibp_self_pairing(p2_heat):
    space = p2_heat.space
    f = np.array([1.0, 0.0])
    assert check_heat_ibp(space, p2_heat.dirichlet, p2_heat, 0.9, f, f) <= 1e-8
    const = np.array([2.0, 2.0])
    assert check_heat_ibp(space, p2_heat.dirichlet, p2_heat, 0.9, const, const) <= 1e-12


def test_heat_ibp_random_grid():
    space, dirichlet = generate_space("grid:n1=3,n2=3")
    heat = build_heat_operator(space, dirichlet)
    rng = np.random.default_rng(31)
    for _ in range(5):
        f, g = rng.standard_normal((2, space.n))
        scale = 1.0 + space.norm2(f) * space.norm2(g)
        assert check_heat_ibp(space, dirichlet, heat, 0.7, f, g) <= 1e-8 * scale
        # spectral closed form of the right-hand side
        coeff_f = heat.coefficients(f)
        coeff_g = heat.coefficients(g)
        lhs = space.inner(g, f - heat_apply(heat, 0.7, f))
        spectral = float(np.sum(
            (1 - np.exp(-heat.eigenvalues * 0.7)) * coeff_f * coeff_g))
        assert lhs == pytest.approx(spectral, abs=1e-10 * scale)


def test_uncalibrated_space_warns():
    space, dirichlet = generate_space("cycle:n=5", calibrate=False)
    blown = type(space)(space.d * 3.0, space.m)  # calibration quotient now > 1
    with pytest.warns(UserWarning, match="calibrated"):
        build_heat_operator(blown, dirichlet)
