import numpy as np
import pytest
from hypothesis import given, strategies as st

from jholo.dbar import cauchy_green, cauchy_green_vanishing_at, dbar_residual, dbar_truncation
from jholo.errors import ConfigurationError, ResolutionError
from jholo.geometry import DomainSpec, GridFunction, build_grid, lp_norm
from jholo.structures import beltrami, rh_model
from jholo.crsolver import random_probes

GRID = build_grid(16, 64)


@pytest.mark.parametrize("g,V", [
    (lambda z: np.ones_like(z), lambda z: np.conj(z)),
    (lambda z: z, lambda z: z * np.conj(z)),
    (lambda z: np.conj(z), lambda z: np.conj(z) ** 2 / 2),
    (lambda z: z**2 * np.conj(z), lambda z: z**2 * np.conj(z) ** 2 / 2),
])
def test_cauchy_green_closed_forms(grid16, g, V):
    out = cauchy_green(GridFunction.from_callable(g, grid16))
    assert np.abs(out.values[0] - V(grid16.nodes)).max() < 1e-11


def _random_g(seed, grid=GRID, n=1):
    like = GridFunction(np.zeros((n,) + grid.shape), grid)
    return random_probes(like, 1, np.random.default_rng(seed))[0]


@given(st.integers(0, 2**32 - 1))
def test_cauchy_green_normalized_at_centre(seed):
    V = cauchy_green(_random_g(seed))
    assert np.abs(V.at(0.0)).max() < 1e-10


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_cauchy_green_is_linear(seed, c):
    g1, g2 = _random_g(seed), _random_g(seed + 1)
    lhs = cauchy_green(g1 * c + g2)
    rhs = cauchy_green(g1) * c + cauchy_green(g2)
    assert lp_norm(lhs - rhs) < 1e-10 * (1 + abs(c))


def test_right_inverse_of_dzbar(grid32):
    for seed in range(5):
        g = _random_g(seed, grid32, n=2)
        V = cauchy_green(g)
        assert dbar_truncation(V, g) < 1e-10


def test_vanishing_at_interior_point(grid16):
    g = _random_g(3, grid16)
    V = cauchy_green_vanishing_at(g, 0.3 - 0.2j)
    assert abs(V.at(0.3 - 0.2j)[0]) < 1e-12
    assert dbar_truncation(V, g) < 1e-10
    with pytest.raises(ConfigurationError):
        cauchy_green_vanishing_at(g, 1.5)


def test_unresolved_data_is_refused(grid16):
    g = GridFunction.from_callable(lambda z: np.conj(z) ** 40, grid16)
    with pytest.raises(ResolutionError):
        cauchy_green(g)


def test_cauchy_green_on_image_domain(grid32):
    d = DomainSpec("moebius-image", (1.0, 0.2, 0.1, 1.0))
    g = GridFunction.from_callable(lambda z: z, grid32, domain=d)
    V = cauchy_green(g, domain=d)
    assert lp_norm(g.like(V.dzbar - g.values)) < 1e-8
    with pytest.raises(ConfigurationError):
        cauchy_green(GridFunction.from_callable(lambda z: z, grid32), domain=d)


def test_beltrami_exact_solution(grid32):
    u = GridFunction.from_callable(lambda z: z + np.conj(z) / 3, grid32)
    assert lp_norm(dbar_residual(u, beltrami(2.0))) < 1e-9


def test_residual_checks_dimension(grid16):
    u = GridFunction.from_callable(lambda z: z, grid16)
    with pytest.raises(ConfigurationError):
        dbar_residual(u, rh_model(0.1))
