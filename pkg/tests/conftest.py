import numpy as np
import pytest

from semlab import build_heat_operator, generate_space


@pytest.fixture(scope="session")
def p2():
    """Calibrated two-point space: w=1, m=(1,1), d=sqrt(2)."""
    space, dirichlet = generate_space("two_point")
    return space, dirichlet


@pytest.fixture(scope="session")
def p2_heat(p2):
    space, dirichlet = p2
    return build_heat_operator(space, dirichlet)


@pytest.fixture(scope="session")
def cycle6():
    return generate_space("cycle:n=6")


@pytest.fixture(scope="session")
def grid33():
    return generate_space("grid:n1=3,n2=3")


def random_weight_space(seed, n=None):
    """Deterministic random-conductance, random-mass test space."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(3, 13))
    base = ["cycle", "path", "star", "complete"][seed % 4]
    if base == "cycle" and n < 3:
        n = 3
    spec = f"{base}:n={n}"
    _, d0 = generate_space(spec)
    pert = rng.uniform(0.3, 2.5, (n, n))
    pert = 0.5 * (pert + pert.T)
    masses = rng.uniform(0.4, 2.0, n)
    return generate_space(spec, weights=np.where(d0.w > 0, pert, 0.0), masses=masses)
