import numpy as np
import pytest
from hypothesis import given, strategies as st

from jholo.errors import ChartError, ConfigurationError, StructureError
from jholo.structures import (AlmostComplexStructure, ComplexMatrixField, affine_chart, beltrami, beltrami_field,
                              bump, catalog, complex_matrix_from_J, constant_beltrami, identity_chart,
                              j_standard, matrix_of_structure, pullback_matrix_field, pushforward_structure,
                              rh_model, shear_chart, standard, structure_from_matrix, to_complex, to_real,
                              translation_chart, validate_normalized_chart)


def _ball_points(n, count, seed=0, radius=0.9):
    r = np.random.default_rng(seed)
    z = r.standard_normal((n, count)) + 1j * r.standard_normal((n, count))
    z *= radius * r.uniform(0, 1, count) ** (1 / (2 * n)) / np.linalg.norm(z, axis=0)
    return z


def test_real_complex_roundtrip():
    z = _ball_points(3, 50)
    assert np.array_equal(to_complex(to_real(z)), z)
    J = j_standard(3)
    assert np.allclose(J @ J, -np.eye(6))


@pytest.mark.parametrize("A", [beltrami_field(), rh_model(0.1), rh_model(0.2, n=3), bump(0.05), beltrami(2.0),
                               standard(2)], ids=lambda A: A.catalog_id)
def test_structures_square_to_minus_identity(A):
    z = _ball_points(A.n, 1000)
    sq, det = A.structure().defects(to_real(z))
    assert sq.max() < 1e-8
    assert det.min() > 1e-10


@pytest.mark.parametrize("A", [beltrami_field(), rh_model(0.1), bump(0.05, n=2)], ids=lambda A: A.catalog_id)
def test_matrix_structure_roundtrip(A):
    z = _ball_points(A.n, 200, seed=1)
    back, defect = matrix_of_structure(A.structure(), z)
    assert np.abs(back - A(z)).max() < 1e-12
    assert defect.max() < 1e-12


def test_beltrami_two_has_coefficient_minus_one_third():
    A = beltrami(2.0)
    assert abs(A(np.zeros((1, 1)))[0, 0, 0] - (-1 / 3)) < 1e-10
    assert A.constant


def test_catalog_ids_and_errors():
    assert catalog("beltrami", lam=2).catalog_id == "beltrami(2.0)"
    assert catalog("rh-model", 3, eps=0.1).n == 3
    assert catalog("standard").zero
    with pytest.raises(ConfigurationError):
        catalog("kaehler")
    with pytest.raises(ConfigurationError):
        rh_model(0.1, n=4)
    with pytest.raises(ConfigurationError):
        beltrami(-1.0)
    with pytest.raises(ConfigurationError):
        constant_beltrami(1.2)


def test_closed_form_partials_match_differences():
    A = beltrami_field()
    fd = ComplexMatrixField(1, A.fn)
    z = _ball_points(1, 30, seed=2, radius=0.8)
    for exact, approx in zip(A.partials(z), fd.partials(z)):
        assert np.abs(exact - approx).max() < 1e-7
    B = bump(0.05, z0=(0.1, 0.2j), rho=1.5)
    fdB = ComplexMatrixField(2, B.fn)
    z = _ball_points(2, 30, seed=3)
    for exact, approx in zip(B.partials(z), fdB.partials(z)):
        assert np.abs(exact - approx).max() < 1e-7


def test_normalized_charts():
    probe = _ball_points(2, 64)
    assert validate_normalized_chart(rh_model(0.1), probe)
    assert validate_normalized_chart(bump(0.05), probe)
    full = ComplexMatrixField(2, lambda z: np.full((2, 2) + z.shape[1:], 0.1 + 0j))
    assert not validate_normalized_chart(full, probe)


def test_bump_vanishes_along_the_central_disc():
    t = np.linspace(-0.9, 0.9, 21)
    z = np.array([t + 0j, np.zeros_like(t)])
    assert np.abs(bump(0.05)(z)).max() == 0.0
    assert np.abs(rh_model(0.1)(z)).max() == 0.0


def test_non_square_structure_is_rejected():
    bad = AlmostComplexStructure(1, lambda x: 2 * np.eye(2)[:, :, None])
    with pytest.raises(StructureError):
        bad.check(np.zeros((2, 3)))
    wrong = AlmostComplexStructure(2, lambda x: np.eye(2))
    with pytest.raises(StructureError):
        wrong(np.zeros((4, 1)))


# charts --------------------------------------------------------------------
def test_pushforward_roundtrip_through_shear():
    J = rh_model(0.1).structure()
    S = shear_chart(2, 0.3)
    back = pushforward_structure(pushforward_structure(J, S), S.inverted())
    x = to_real(_ball_points(2, 1000, seed=4, radius=0.6))
    assert np.abs(back(x) - J(x)).max() < 1e-7


def test_shear_needs_small_parameter():
    with pytest.raises(ChartError):
        shear_chart(1, 1.0)


def test_chart_roundtrips():
    z = _ball_points(2, 40)
    M = np.array([[1.0, 0.2j], [0.1, 1.0]])
    for Psi in (identity_chart(2), translation_chart([0.1, -0.2j]), affine_chart(M, [0.3, 0.0]),
                shear_chart(2, 0.2)):
        assert Psi.roundtrip_error(z) < 1e-14


def test_affine_pullback_agrees_with_structure_route():
    A0 = rh_model(0.1)
    Psi = affine_chart(np.array([[1.0, 0.1], [0.2j, 0.9]]), [0.05, 0.02j])
    exact = pullback_matrix_field(A0, Psi)
    general = complex_matrix_from_J(pushforward_structure(A0.structure(), Psi.inverted()))
    z = _ball_points(2, 50, seed=5, radius=0.5)
    assert np.abs(exact(z) - general(z)).max() < 1e-7


def test_pullback_of_zero_structure_by_holomorphic_chart_is_zero():
    assert pullback_matrix_field(standard(2), translation_chart([0.1, 0.2])).zero


@given(st.floats(0.2, 5.0))
def test_beltrami_coefficient_formula(lam):
    # J = [[0, -lam], [1/lam, 0]]: the coefficient is (1 - lam) / (1 + lam)
    mu = beltrami(lam)(np.zeros((1, 1)))[0, 0, 0]
    assert abs(mu - (1 - lam) / (1 + lam)) < 1e-12
    J = structure_from_matrix(constant_beltrami(mu))
    assert np.abs(J(np.zeros((2, 1)))[..., 0] - np.array([[0, -lam], [1 / lam, 0]])).max() < 1e-10
