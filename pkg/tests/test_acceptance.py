"""Acceptance criteria 1-12 at their stated tolerances.

Every criterion prints one ``criterion N: PASS|FAIL ...`` line; the lines are
collected again in the pytest terminal summary. Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""
import json
import time

import numpy as np
import pytest

from jholo.cli import main as cli_main
from jholo.crsolver import frechet_remainders, newton_solve, random_probes
from jholo.dbar import cauchy_green, dbar_residual
from jholo.envelope import (DiscFamily, ScalarField, WeightedPoints, envelope_estimate, green_sum,
                            lelong_functional, lelong_number_estimate, perron_oracle, poletsky_average_check,
                            scalar_field)
from jholo.geometry import GridFunction, build_grid, lp_norm
from jholo.gluer import bump_scenario, cousin_glue
from jholo.rh import attach_disc, lqj_ladder, residual_ladder, rh_scenario
from jholo.structures import beltrami, beltrami_field, rh_model, standard

RESULTS = []


def record(k: int, ok: bool, detail: str):
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


# 1 -------------------------------------------------------------------------
def test_criterion_01_cauchy_green_right_inverse():
    grid = build_grid(64, 256)
    like = GridFunction(np.zeros((1,) + grid.shape), grid)
    gs = random_probes(like, 20, np.random.default_rng(1), degree=10)
    cauchy_green(gs[0])  # operator setup is cached per grid; time the solves only
    worst, slowest = 0.0, 0.0
    for g in gs:
        t = time.perf_counter()
        V = cauchy_green(g, check=False)
        slowest = max(slowest, time.perf_counter() - t)
        worst = max(worst, lp_norm(g.like(V.dzbar - g.values)) / (1 + lp_norm(g)))
    record(1, worst < 1e-7 and slowest < 1.0, f"max relative defect {worst:.2e}, slowest solve {slowest:.3f} s")


# 2 -------------------------------------------------------------------------
def test_criterion_02_frechet_slope():
    grid = build_grid(32, 128)
    rng = np.random.default_rng(2)
    slopes = []
    for A in (beltrami_field(), rh_model(0.1)):
        like = GridFunction(np.zeros((A.n,) + grid.shape), grid)
        for _ in range(10):
            phi = random_probes(like, 1, rng, normalize="lp")[0] * 0.3
            V = random_probes(like, 1, rng, normalize="sobolev")[0]
            slopes.append(frechet_remainders(A, phi, V)[1])
    lo, hi = min(slopes), max(slopes)
    record(2, 1.8 <= lo and hi <= 2.2, f"slopes in [{lo:.4f}, {hi:.4f}] over {len(slopes)} pairs")


# 3 -------------------------------------------------------------------------
def _integrable_worst(grid, count=20):
    rng = np.random.default_rng(3)
    z = grid.nodes
    iters, worst = set(), 0.0
    for _ in range(count):
        deg = rng.integers(1, 7)
        vals = np.zeros(grid.shape, dtype=complex)
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                vals += complex(*rng.standard_normal(2)) * z**a * np.conj(z) ** b
        vals += np.conj(z)  # keep antiholomorphic content so one step is needed
        phi = GridFunction(vals, grid)
        # the residual bound is absolute, so starts are taken at unit size
        _, tr = newton_solve(phi * (1 / lp_norm(phi)), standard(1), 0.0, probes=4)
        iters.add(tr.iterations)
        worst = max(worst, tr.final_residual)
    return iters, worst


def test_criterion_03_integrable_reduction():
    # degree <= 6 data is exact on any grid; 64x256 is reported for its roundoff floor
    iters, worst = _integrable_worst(build_grid(32, 128))
    iters64, worst64 = _integrable_worst(build_grid(64, 256))
    record(3, iters == {1} and worst < 1e-12,
           f"iterations {sorted(iters)}, worst residual {worst:.2e} on 32x128 "
           f"(64x256: iterations {sorted(iters64)}, worst {worst64:.2e})")


# 4 -------------------------------------------------------------------------
def test_criterion_04_beltrami_exactness():
    A = beltrami(2.0)
    mu = complex(A(np.zeros((1, 1)))[0, 0, 0])
    grid = build_grid(64, 256)
    u = GridFunction.from_callable(lambda w: w + np.conj(w) / 3, grid)
    r = lp_norm(dbar_residual(u, A))
    record(4, abs(mu + 1 / 3) < 1e-10 and r < 1e-9, f"A = {mu.real:.15f}{mu.imag:+.1e}i, residual {r:.2e}")


# 5 -------------------------------------------------------------------------
def _gated_starts(grid):
    for s in (0.05, 0.1, 0.15, 0.2, 0.25, 0.3):
        yield beltrami_field(), GridFunction.from_callable(lambda w, s=s: s * w, grid)
    for s in (0.1, 0.2, 0.3, 0.4):
        yield rh_model(0.1), GridFunction.from_callable(lambda w, s=s: np.array([w, s * w**3 + 0.1j * w]), grid)


def test_criterion_05_certificate():
    grid = build_grid(32, 128)
    worst, gated, runs = 0.0, 0, 0
    for A, phi in _gated_starts(grid):
        _, tr = newton_solve(phi, A, 0.0, probes=16)
        runs += 1
        gated += tr.gate_passed
        bound = 2 * tr.lqj["Q"] * tr.initial_residual * 1.05
        worst = max(worst, tr.deviation / bound)
    record(5, runs == 10 and gated == 10 and worst <= 1.0,
           f"{gated}/{runs} gated, max |u - phi| / (2 Q |F(phi)| 1.05) = {worst:.3f}")


# 6 -------------------------------------------------------------------------
def test_criterion_06_cousin_glue():
    grid = build_grid(64, 256)
    t0 = time.perf_counter()
    problem = bump_scenario(grid)
    t1 = time.perf_counter()
    res = cousin_glue(problem, eps=1e-3)
    t2 = time.perf_counter()
    centre = float(np.abs(res.u0_hat.at(0.0) - problem.u0.at(0.0)).max())
    dev = max(res.deviations.values())
    ok = res.match_residual < 1e-7 and dev < 1e-3 and centre < 1e-9 and t2 - t1 < 30
    record(6, ok, f"match {res.match_residual:.2e}, max deviation {dev:.2e}, centre {centre:.2e}, "
                  f"glue {t2 - t1:.1f} s (setup {t1 - t0:.1f} s)")


# 7 -------------------------------------------------------------------------
def test_criterion_07_residual_ladder():
    grid = build_grid(128, 512)
    torus, dec = rh_scenario(grid, eps_structure=0.1)
    ladder = (8, 16, 32, 64, 128)
    rows = residual_ladder(torus, dec, ladder=ladder)
    lqj = lqj_ladder(torus, dec, ladder=ladder, roots=4, probes=4)
    res = [r["residual"] for r in rows]
    rho = {r["N"]: r["rho"] for r in lqj}
    Q = [r["Q"] for r in lqj]
    L = [r["L"] for r in lqj]
    monotone = all(b <= a for a, b in zip(res, res[1:]))
    below = res[ladder.index(64)] < rho[64]
    vq = (max(Q) - min(Q)) / min(Q)
    vl = (max(L) - min(L)) / min(L) if min(L) > 0 else float("inf")
    record(7, monotone and below and vq < 0.25 and vl < 0.25,
           "residuals " + ", ".join(f"{r:.4f}" for r in res) + f"; rho(64) {rho[64]:.4f}; "
           f"Q spread {vq:.2%}, L spread {vl:.2%}")


# 8 -------------------------------------------------------------------------
def test_criterion_08_attach():
    grid = build_grid(160, 1024)
    torus, dec = rh_scenario(grid, eps_structure=0.1, m=3)
    t = time.perf_counter()
    res = attach_disc(torus, dec, 0.1, N=64)
    dt = time.perf_counter() - t
    frac = res.measure / (2 * np.pi)
    ok = frac < 0.15 and res.attach_distance < 0.1 and res.center_error < 1e-8 and dt < 300
    record(8, ok, f"|E|/2pi {frac:.4f}, distance off E {res.attach_distance:.4f}, "
                  f"centre {res.center_error:.1e}, {dt:.0f} s")


# 9 -------------------------------------------------------------------------
def test_criterion_09_poletsky():
    grid = build_grid(32, 128)
    torus, _ = rh_scenario(grid)
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(10):
        c = rng.standard_normal(4)
        f = ScalarField(lambda z, c=c: c[0] * z[0].real + c[1] * np.abs(z[1]) ** 2
                        + c[2] * np.cos(z[0].imag * z[1].real) + c[3] * (z[1] * z[1]).real, 2)
        k, a, ph = rng.integers(-3, 4), rng.uniform(-1, 1), rng.uniform(0, 2 * np.pi)
        worst = max(worst, poletsky_average_check(f, torus, lambda th: k * th + a * np.sin(th + ph)))
    record(9, worst < 1e-9, f"max average gap {worst:.2e} over 10 pairs")


# 10 ------------------------------------------------------------------------
def test_criterion_10_envelope_vs_perron():
    grid = build_grid(32, 128)
    f = scalar_field("neg-abs-im")
    A = standard(1)
    est = envelope_estimate(f, 0.0, A, DiscFamily(grid, A, budget=2000, seed=0))
    oracle = perron_oracle(f, size=64).at(0j)
    gap = abs(est.value - oracle)
    ok = gap < 5e-2 and est.value <= f.value(0.0)
    record(10, ok, f"envelope {est.value:.5f}, oracle {oracle:.5f}, gap {gap:.2e}, f(0) {f.value(0.0)}")


# 11 ------------------------------------------------------------------------
def test_criterion_11_lelong_chain():
    rng = np.random.default_rng(11)
    eq, pos = 0.0, -np.inf
    for _ in range(100):
        m = rng.integers(1, 8)
        w = WeightedPoints(0.98 * np.sqrt(rng.uniform(0, 1, m)) * np.exp(2j * np.pi * rng.uniform(0, 1, m)),
                           rng.uniform(0, 3, m))
        eq = max(eq, abs(green_sum(w, 0.0) - lelong_functional(w)))
        z = 0.999 * np.sqrt(rng.uniform(0, 1, 1000)) * np.exp(2j * np.pi * rng.uniform(0, 1, 1000))
        pos = max(pos, float(np.max(green_sum(w, z))))
    nus = [lelong_number_estimate(scalar_field("log-abs", k=k), 0.0, [1e-2, 1e-3, 1e-4, 1e-5]) for k in (1, 2, 3)]
    nu_err = max(abs(nu - k) for nu, k in zip(nus, (1, 2, 3)))
    record(11, eq < 1e-12 and pos <= 0 and nu_err < 1e-4,
           f"|green(0) - lelong| {eq:.1e}, max green {pos:.2e}, Lelong numbers "
           + ", ".join(f"{nu:.6f}" for nu in nus))


# 12 ------------------------------------------------------------------------
DETERMINISM = [
    {"scenario": "solve", "seed": 5, "grid": [32, 128], "structure": {"catalog": "rh-model"},
     "solve": {"start": [[0, 1], [0, [0, 0.1], 0, 0.2]], "probes": 8}},
    {"scenario": "glue", "seed": 5, "grid": [48, 128]},
    {"scenario": "envelope", "seed": 5, "envelope": {"budget": 200, "points": [0.0, [0.3, 0.1]]}},
    {"scenario": "lelong", "seed": 5, "structure": {"catalog": "standard", "n": 2},
     "lelong": {"f": {"name": "log-abs"}, "p": [[0, 0], [0, 0]]}},
    {"scenario": "diagnose", "seed": 5, "grid": [32, 128], "structure": {"catalog": "beltrami-field"},
     "diagnose": {"probes": 8, "count": 3}},
]


def test_criterion_12_determinism(tmp_path):
    same = []
    for i, doc in enumerate(DETERMINISM):
        cfg = tmp_path / f"c{i}.json"
        cfg.write_text(json.dumps(doc))
        outs = []
        for rep in range(2):
            out = tmp_path / f"o{i}_{rep}"
            cli_main(["--config", str(cfg), "--out", str(out)])
            outs.append((out / "results.csv").read_bytes())
        same.append(outs[0] == outs[1] and len(outs[0].splitlines()) > 1)
    record(12, all(same), f"byte-identical results.csv for {sum(same)}/{len(same)} scenarios "
                          f"({', '.join(d['scenario'] for d in DETERMINISM)})")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
