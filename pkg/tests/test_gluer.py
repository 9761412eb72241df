import numpy as np
import pytest

from jholo.crsolver import newton_solve
from jholo.errors import GateError, GluingError
from jholo.geometry import GridFunction, build_decomposition, build_grid
from jholo.gluer import GluingProblem, bump_scenario, cousin_glue, preglue, seam_continuity
from jholo.structures import bump, pullback_matrix_field, standard, translation_chart

ARCS = [(0.3, 2.8), (3.5, 6.0)]


@pytest.fixture(scope="module")
def grid():
    return build_grid(48, 128)


@pytest.fixture(scope="module")
def bump_problem(grid):
    return bump_scenario(grid)


def _null_problem(grid, A0, u0):
    dec = build_decomposition(ARCS, 0.05, grid)
    charts = [translation_chart([0.0, 0.05j * (j + 1)]) for j in range(2)]
    Aj = [pullback_matrix_field(A0, P) for P in charts]
    uj = [u0.like(P.inverse(u0.values)) for P in charts]
    return GluingProblem(dec, u0, uj, charts, A0, Aj)


def test_null_glue_returns_the_input(grid):
    A0 = bump(0.05)
    start = GridFunction.from_callable(lambda z: np.array([z, 0.3 * z**2]), grid)
    u0, _ = newton_solve(start, A0, 0.0, tol=1e-11, probes=8)
    problem = _null_problem(grid, A0, u0)
    assert max(problem.mismatches()) < 1e-12
    res = cousin_glue(problem, eps=1e-3, probes=8)
    assert max(res.deviations.values()) < 1e-10
    assert res.match_residual < 1e-12


def test_bump_glue(bump_problem):
    res = cousin_glue(bump_problem, eps=1e-3, probes=8)
    assert res.match_residual < 1e-7 * (1 + np.abs(res.u0_hat.values).max())
    assert max(res.deviations.values()) < 1e-3
    assert res.pin_error < 1e-9
    # the inputs disagree at order delta on the overlaps; the output does not
    assert min(bump_problem.mismatches()) > 1e-6
    assert seam_continuity(res, bump_problem.transitions, bump_problem.decomposition) < 1e-7


def test_bump_glue_with_extra_pins(bump_problem):
    pins = (0.2 + 0.1j, -0.3j)
    res = cousin_glue(bump_problem, eps=1e-3, probes=8, pins=pins)
    for z in (0.0,) + pins:
        assert np.abs(res.u0_hat.at(z) - bump_problem.u0.at(z)).max() < 1e-9


def test_compatibility_of_chart_structures(bump_problem):
    assert max(bump_problem.compatibility(samples=64)) < 1e-12


def test_pregluing_equals_chart_maps_in_pure_regions(bump_problem):
    phi0, phij = preglue(bump_problem)
    dec = bump_problem.decomposition
    chi = dec.chi.values[0].real
    inner = chi == 1.0
    assert np.abs(phi0.values[:, inner] - bump_problem.u0.values[:, inner]).max() == 0.0
    for j in range(2):
        outer = dec.deltas[j].mask & (chi == 0.0)
        want = bump_problem.uj[j].values[:, outer]
        assert np.abs(phij[j].values[:, outer] - want).max() < 1e-14


def test_gate_refuses_large_mismatch(grid):
    A0 = bump(0.05)
    start = GridFunction.from_callable(lambda z: np.array([z, 0.3 * z**2]), grid)
    u0, _ = newton_solve(start, A0, 0.0, tol=1e-11, probes=8)
    problem = _null_problem(grid, A0, u0)
    far = problem.uj[0].like(problem.uj[0].values + np.array([[[0.0]], [[2.0]]]))
    problem.uj[0] = far
    with pytest.raises(GateError) as err:
        cousin_glue(problem, eps=1e-3, probes=8)
    assert err.value.stage == "glue"


def test_problem_shape_is_checked(grid):
    dec = build_decomposition(ARCS, 0.05, grid)
    u0 = GridFunction.constant([0, 0], grid)
    with pytest.raises(GluingError):
        GluingProblem(dec, u0, [u0], [translation_chart([0, 0])], standard(2), [standard(2)])
