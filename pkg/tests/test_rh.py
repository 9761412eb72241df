import numpy as np
import pytest

from jholo.errors import ConfigurationError, GeometryError, ResolutionError
from jholo.geometry import TWO_PI, DomainSpec, build_grid
from jholo.rh import (PeakFunction, _intervals, attach_disc, build_preattachment, peak_functions, residual_ladder,
                      rh_scenario, riemann_power, standard_torus, torus_distance, verify_attachment)
from jholo.structures import standard


@pytest.fixture(scope="module")
def grid():
    return build_grid(64, 256)


@pytest.fixture(scope="module")
def scenario(grid):
    return rh_scenario(grid)


def test_peak_function_is_unimodular_on_its_arc():
    h = PeakFunction((0.5, 2.0), 0.3, 0.2)
    on = np.exp(1j * np.linspace(0.5, 2.0, 50))
    off = np.exp(1j * np.linspace(2.4, 0.1 + TWO_PI, 50))
    assert np.abs(np.abs(h(on)) - 1).max() < 1e-9
    assert np.abs(h(off)).max() < 1 - 1e-3
    assert h(0.0) == 0
    assert np.abs(h(0.7 * np.exp(1j * np.linspace(0, 6, 50)))).max() < 1


def test_peak_taylor_matches_power():
    h = PeakFunction((0.5, 2.0), 0.3, 0.2)
    a = h.taylor(8, 200)
    z = 0.6 * np.exp(1j * np.linspace(0, 6, 9))
    approx = np.polynomial.polynomial.polyval(z, a)
    assert np.abs(approx - h.power(z, 8)).max() < 1e-10
    assert h.tail(8, 400) < h.tail(8, 200) < 1e-4
    with pytest.raises(ConfigurationError):
        PeakFunction((0.5, 2.0), 0.0)


def test_riemann_power_of_domain_inverse(grid):
    d = DomainSpec("moebius-image", (1.0, 0.1, 0.0, 1.0))
    f = riemann_power(d, 3, grid)
    w = d.inverse(f.nodes)
    assert np.abs(f.values[0] - w**3).max() < 1e-12
    with pytest.raises(ConfigurationError):
        riemann_power(d, 0, grid)
    with pytest.raises(ConfigurationError):
        riemann_power("disc", 2, grid)


def test_torus_invariants(scenario):
    torus, dec = scenario
    chk = torus.check()
    assert chk["ok"]
    assert torus.n == 2 and torus.m == 3
    # v(z) is the centre of the fiber over z: at most 1 from the torus, on it where fibers collapse
    d = torus_distance(torus.v, torus)
    th = torus.v.grid.theta
    assert d.max() <= 1 + 1e-12
    gap_mid = np.argmin(np.abs(th - (torus.arcs[0][1] + 0.1)))
    assert d[gap_mid] < 1e-2


def test_torus_needs_normalized_structure(grid):
    from jholo.structures import ComplexMatrixField

    full = ComplexMatrixField(2, lambda z: np.full((2, 2) + z.shape[1:], 0.05 + 0j))
    with pytest.raises(ConfigurationError):
        standard_torus(grid, [(0.0, 2.0), (2.5, 4.5)], full)
    with pytest.raises(ConfigurationError):
        standard_torus(grid, [(0.0, 2.0)], standard(1))


def test_preattachment_identity_and_residuals(scenario):
    torus, dec = scenario
    pre = build_preattachment(torus, dec, np.exp(0.3j), 16)
    assert len(pre) == 3
    assert max(pre.identity_errors) < 1e-9
    assert all(r > 0 for r in pre.residuals)
    with pytest.raises(ConfigurationError):
        build_preattachment(torus, dec, 0.5, 16)
    with pytest.raises(ConfigurationError):
        build_preattachment(torus, dec, 1.0, 2.5)


def test_ladder_norms_move_in_opposite_directions(scenario):
    torus, dec = scenario
    rows = residual_ladder(torus, dec, ladder=(8, 16, 32))
    res = [r["residual"] for r in rows]
    sob = [r["sobolev"] for r in rows]
    dist = [r["distance"] for r in rows]
    assert all(np.diff(res) <= 0)
    assert all(np.diff(sob) > 0)
    assert all(np.diff(dist) < 0)


def test_intervals_merge_and_wrap():
    flags = np.zeros(16, dtype=bool)
    flags[[0, 1, 5, 15]] = True
    iv = _intervals(flags, 16)
    h = TWO_PI / 16
    assert len(iv) == 2
    assert sum(b - a for a, b in iv) == pytest.approx(4 * h)
    assert _intervals(np.ones(8, dtype=bool), 8) == [(0.0, TWO_PI)]
    assert _intervals(np.zeros(8, dtype=bool), 8) == []


def test_integrable_attach_with_pins(grid, scenario):
    _, dec = scenario
    torus = standard_torus(grid, dec.arcs, standard(2))
    res = attach_disc(torus, dec, 0.1, N=[8, 16], pins=[0.3 + 0.1j])
    assert res.measure < 0.15 * TWO_PI
    assert res.attach_distance < 0.1
    assert res.center_error < 1e-8
    assert res.pins[0][1] < 1e-9
    E, measure = verify_attachment(res.h, torus, 0.1)
    assert measure <= res.measure + 1e-12
    d = res.as_dict()
    assert d["pins"][0]["point"] == [0.3, 0.1]


def test_attach_validates_eps(scenario):
    torus, dec = scenario
    with pytest.raises(ConfigurationError):
        attach_disc(torus, dec, 0.0)
    with pytest.raises(GeometryError):
        attach_disc(torus, dec, 0.01)  # uncovered boundary exceeds eps * 2 pi


def test_scenario_geometry(grid):
    with pytest.raises(GeometryError):
        rh_scenario(grid, m=40, gap=0.2)
    _, dec = rh_scenario(grid, m=2, gap=0.3)
    assert dec.m == 2 and dec.uncovered == pytest.approx(0.6)
    assert len(peak_functions(dec)) == 2
