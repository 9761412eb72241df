import numpy as np
import pytest
from hypothesis import given, strategies as st

from jholo.errors import ConfigurationError, GeometryError
from jholo.geometry import (DomainSpec, GridFunction, arc_distance, build_decomposition, build_grid,
                            check_decomposition, lp_norm, quadrature, smoothstep, sobolev_norm)

GRID = build_grid(16, 64)


@pytest.mark.parametrize("shape", [(7, 64), (16, 48), (16, 16)])
def test_build_grid_rejects_bad_shapes(shape):
    with pytest.raises(ConfigurationError):
        build_grid(*shape)


def test_grid_layout(grid16):
    assert grid16.nodes.shape == (16, 64)
    assert np.allclose(np.abs(grid16.boundary), 1.0)
    assert np.all(np.diff(grid16.r) > 0)
    assert grid16.degree == min(2 * 16 - 4, 64 // 2 - 2)
    # total weight is the disc area
    assert abs(grid16.weights.sum() - np.pi) < 1e-12


@given(a=st.integers(0, 8), b=st.integers(0, 8))
def test_quadrature_exact_on_low_monomials(a, b):
    if a + b > 8:
        return
    f = GridFunction.from_callable(lambda z: z**a * np.conj(z) ** b, GRID)
    want = np.pi / (a + 1) if a == b else 0.0
    assert abs(quadrature(f)[0] - want) < 1e-9


def test_wirtinger_derivatives_of_monomials(grid16):
    z = grid16.nodes
    f = GridFunction.from_callable(lambda w: w**3 + 2 * np.conj(w) ** 2 + w * np.conj(w), grid16)
    assert np.abs(f.dz[0] - (3 * z**2 + np.conj(z))).max() < 1e-10
    assert np.abs(f.dzbar[0] - (4 * np.conj(z) + z)).max() < 1e-10


def test_norms_of_simple_maps(grid16):
    one = GridFunction.constant(1.0, grid16)
    assert abs(lp_norm(one) - np.pi ** 0.25) < 1e-12
    z = GridFunction.from_callable(lambda w: w, grid16)
    # |z|_4^4 = 2 pi / 6
    want = (np.pi / 3) ** 0.25 + np.pi ** 0.25
    assert abs(sobolev_norm(z) - want) < 1e-12
    with pytest.raises(ConfigurationError):
        lp_norm(one, p=2.0)


@given(st.integers(0, 2**32 - 1))
def test_lp_norm_triangle_inequality(seed):
    r = np.random.default_rng(seed)
    shape = (2,) + GRID.shape
    f = GridFunction(r.standard_normal(shape) + 1j * r.standard_normal(shape), GRID)
    g = GridFunction(r.standard_normal(shape) + 1j * r.standard_normal(shape), GRID)
    assert lp_norm(f + g) <= lp_norm(f) + lp_norm(g) + 1e-12


def test_spectral_evaluation_matches_polynomial(grid16):
    f = GridFunction.from_callable(lambda w: 1 + w**2 - 3j * np.conj(w) * w, grid16)
    pts = np.array([0.0, 0.3 + 0.2j, -0.7j, 0.95])
    want = 1 + pts**2 - 3j * np.abs(pts) ** 2
    assert np.abs(f.evaluate(pts)[0] - want).max() < 1e-11


def test_grid_functions_on_different_grids_do_not_mix(grid16, grid32):
    with pytest.raises(ConfigurationError):
        GridFunction.constant(1.0, grid16) + GridFunction.constant(1.0, grid32)


# domains -----------------------------------------------------------------
def test_moebius_domain_roundtrip():
    d = DomainSpec("moebius-image", (1.0, 0.2, 0.1, 1.0))
    w = 0.9 * np.exp(1j * np.linspace(0, 6, 40))
    assert np.abs(d.inverse(d.psi(w)) - w).max() < 1e-13
    assert d.certify(256) > 0


def test_polynomial_domain_newton_inverse():
    d = DomainSpec("polynomial-image", (0.0, 1.0, 0.2))
    w = 0.8 * np.exp(1j * np.linspace(0, 6, 40))
    assert np.abs(d.inverse(d.psi(w)) - w).max() < 1e-12
    assert d.contains(d.psi(np.array([0.5]))).all()


def test_domain_validation():
    with pytest.raises(GeometryError):
        DomainSpec("moebius-image", (1.0, 0.0, 1.0, 0.5))  # pole inside
    with pytest.raises(ConfigurationError):
        DomainSpec("ellipse", ())
    with pytest.raises(GeometryError):
        DomainSpec("polynomial-image", (0.0, 1.0, 0.6)).certify(512)  # psi' vanishes inside


def test_pulled_back_derivatives_on_image_domain(grid32):
    d = DomainSpec("moebius-image", (1.0, 0.2, 0.1, 1.0))
    f = GridFunction.from_callable(lambda z: z**2 + np.conj(z), grid32, domain=d)
    z = f.nodes
    assert np.abs(f.dz[0] - 2 * z).max() < 1e-8
    assert np.abs(f.dzbar[0] - 1).max() < 1e-8


# decompositions ------------------------------------------------------------
def test_two_arc_decomposition(grid32):
    dec = build_decomposition([(0.3, 2.8), (3.5, 6.0)], 0.05, grid32)
    assert dec.m == 2
    assert dec.checks["coverage"] and dec.checks["disjoint"]
    assert all(s > 0 for s in dec.checks["separation"])
    chi = dec.chi.values[0].real
    assert chi.min() >= 0 and chi.max() <= 1
    assert np.all(chi[0] == 1.0)  # centre ring is pure Delta_0
    assert check_decomposition(dec)["uncovered"] == pytest.approx(2 * np.pi - 5.0)


@pytest.mark.parametrize("arcs,alpha", [([(0.0, 3.0), (3.1, 6.0)], 0.05),  # gap below 6 alpha
                                        ([(0.0, 1.0)], 0.3),  # collar reaches the centre
                                        ([(0.0, 7.0)], 0.05)])  # arc longer than the circle
def test_decomposition_rejects_bad_input(grid32, arcs, alpha):
    with pytest.raises(GeometryError):
        build_decomposition(arcs, alpha, grid32)


def test_arc_distance_vanishes_on_arc_only():
    th = np.linspace(0.5, 1.5, 11)
    assert np.allclose(arc_distance(np.exp(1j * th), (0.5, 1.5)), 0.0)
    assert np.all(arc_distance(0.9 * np.exp(1j * th), (0.5, 1.5)) > 0.09)
    assert arc_distance(np.exp(2.5j), (0.5, 1.5), width=0.1) > 0.9


@given(st.floats(-1, 2), st.floats(-1, 2))
def test_smoothstep_monotone_and_clamped(x, y):
    sx, sy = smoothstep(x), smoothstep(y)
    assert 0 <= sx <= 1
    if x <= y:
        assert sx <= sy
    if x <= 0:
        assert sx == 0
    if x >= 1:
        assert sx == 1
