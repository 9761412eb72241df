"""Pregluing and the nonlinear Cousin problem over good-pair decompositions.

The chart maps are blended with the cutoff ``chi`` into one chart-0 map on the
whole disc, which is then corrected by the frozen-inverse Newton iteration
pinned at the centre. Chart-j outputs are the transports ``Psi_j^{-1}`` of
the corrected map, so the matching condition holds by construction and each
chart residual is verified on its collar.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .crsolver import LQJReport, estimate_lipschitz, newton_solve, right_inverse, LinearizedOperator
from .dbar import dbar_residual
from .errors import GateError, GluingError, RangeError
from .geometry import GoodPairDecomposition, GridFunction, lp_norm, sobolev_norm
from .structures import ChartTransition, ComplexMatrixField, identity_chart, pullback_matrix_field

log = logging.getLogger(__name__)

MATCH_TOL = 1e-7


@dataclass
class GluingProblem:
    decomposition: GoodPairDecomposition
    u0: GridFunction
    uj: list
    transitions: list
    A0: ComplexMatrixField
    Aj: list

    def __post_init__(self):
        m = self.decomposition.m
        if not (len(self.uj) == len(self.transitions) == len(self.Aj) == m):
            raise GluingError(f"need {m} chart maps, transitions and structures")

    @property
    def m(self) -> int:
        return self.decomposition.m

    def transported(self, j: int) -> np.ndarray:
        """``Psi_j(u_j)`` on the whole grid (NaN where the chart is undefined)."""
        Psi = self.transitions[j]
        v = self.uj[j].values
        out = Psi(v)
        if Psi.domain is not None:
            ok = np.asarray(Psi.domain(v), dtype=bool)
            out = np.where(ok[None], out, np.nan)
        return out

    def mismatches(self) -> list:
        """``|u0 - Psi_j(u_j)|_{W^{1,p}}`` over the overlap ``Delta_0 & Delta_j``."""
        out = []
        for j in range(self.m):
            mask = self.decomposition.overlaps[j].mask
            diff = self.u0.like(np.nan_to_num(self.u0.values - self.transported(j)))
            out.append(sobolev_norm(diff, mask=mask))
        return out

    def compatibility(self, samples: int = 256, seed: int = 0) -> list:
        """Max deviation between ``A_j`` and the pullback of ``A_0`` on chart-j image samples."""
        rng = np.random.default_rng(seed)
        out = []
        for j in range(self.m):
            mask = self.decomposition.deltas[j].mask
            pts = self.uj[j].values[:, mask]
            idx = rng.choice(pts.shape[1], size=min(samples, pts.shape[1]), replace=False)
            pts = pts[:, idx]
            ref = pullback_matrix_field(self.A0, self.transitions[j])
            out.append(float(np.abs(ref(pts) - self.Aj[j](pts)).max()))
        return out


@dataclass
class GluedResult:
    u0_hat: GridFunction
    uj_hat: list
    global_map: GridFunction
    deviations: dict
    match_residual: float
    residuals: dict
    pin_error: float
    mismatches: list
    trace: object
    lqj: dict
    steps: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"match_residual": self.match_residual, "deviations": self.deviations,
                "residuals": self.residuals, "pin_error": self.pin_error, "mismatches": self.mismatches,
                "lqj": self.lqj}


def preglue(problem: GluingProblem):
    """``phi = chi u0 + (1 - chi) Psi_j(u_j)``; returns ``(phi0, [phi_j])``.

    ``phi0`` is the chart-0 map on the whole disc, ``phi_j = Psi_j^{-1}(phi0)``.
    """
    dec = problem.decomposition
    chi = dec.chi.values[0].real
    vals = problem.u0.values.copy()
    for j in range(problem.m):
        mask = dec.deltas[j].mask
        tj = problem.transported(j)
        blend = chi[None] * problem.u0.values + (1 - chi[None]) * tj
        if np.any(~np.isfinite(blend[:, mask])):
            bad = np.argwhere(~np.isfinite(blend[0]) & mask)[0]
            raise GluingError(f"chart {j + 1} map leaves its transition domain at node {tuple(bad)}")
        vals[:, mask] = blend[:, mask]
    phi0 = problem.u0.like(vals)
    try:
        problem.A0.check_range(phi0.values)
    except RangeError as exc:
        raise GluingError(f"pregluing leaves the chart-0 region: {exc}") from exc
    phij = [phi0.like(problem.transitions[j].inverse(phi0.values)) for j in range(problem.m)]
    return phi0, phij


def cousin_glue(problem: GluingProblem, eps: float, tol: float = 1e-8, probes: int = 16, seed: int = 0,
                force: bool = False, max_iter: int = 30, pins=()) -> GluedResult:
    """Glue the chart maps into one family of discs matching on overlaps.

    Gate: the pregluing residual must be below ``rho`` of the LQJ report at the
    pregluing; otherwise :class:`GateError` lists the overlap mismatches.
    Extra ``pins`` (up to three interior points) keep the pregluing values there.
    """
    dec = problem.decomposition
    mism = problem.mismatches()
    phi0, _ = preglue(problem)
    # the grid polynomial of the blend may be off at the pins by the fit error; a
    # holomorphic interpolant of the misfit (a constant for the centre alone)
    # restores the pins without touching phi0_zbar
    a = (0.0,) + tuple(pins) if len(pins) else 0.0
    pts = np.atleast_1d(np.asarray(a, dtype=complex))
    miss = problem.u0.evaluate(pts) - phi0.project().evaluate(pts)
    w = dec.grid.nodes
    coeffs = np.linalg.solve(np.vander(phi0.domain.inverse(pts), increasing=True), miss.T)
    phi0 = phi0 + np.einsum("mi,mrt->irt", coeffs, w[None] ** np.arange(len(pts))[:, None, None])
    Q = right_inverse(LinearizedOperator(problem.A0, phi0), a, probes=probes, seed=seed)
    L = estimate_lipschitz(phi0, problem.A0, np.random.default_rng(seed + 1), probes=max(2, min(probes, 8)))
    lqj = LQJReport.from_constants(L, Q.op_norm_estimate, sample_size=probes, pairs=4)
    r0 = lp_norm(dbar_residual(phi0, problem.A0))
    # constant A makes the glue a linear solve; the gate is then not needed (as in newton_solve)
    if r0 >= lqj.rho and not force and not problem.A0.constant:
        raise GateError(f"pregluing residual {r0:.4g} >= rho {lqj.rho:.4g}; overlap mismatches "
                        + ", ".join(f"delta_{j + 1}={d:.3g}" for j, d in enumerate(mism)),
                        rho=lqj.rho, residual=r0, stage="glue")
    u, trace = newton_solve(phi0, problem.A0, a, tol=tol, Q=Q, lqj=lqj, force=True, max_iter=max_iter,
                            seed=seed)
    trace.forced = force
    trace.gate_passed = bool(r0 < lqj.rho)
    uj_hat = [u.like(problem.transitions[j].inverse(u.values)) for j in range(problem.m)]

    match = 0.0
    for j in range(problem.m):
        ov = dec.overlaps[j].mask
        diff = np.abs(problem.transitions[j](uj_hat[j].values) - u.values)[:, ov]
        match = max(match, float(diff.max()) if diff.size else 0.0)
    dev = {"u0": sobolev_norm(u - problem.u0, mask=dec.delta0.mask)}
    res = {"F0": lp_norm(dbar_residual(u, problem.A0), mask=dec.delta0.mask)}
    for j in range(problem.m):
        dm = dec.deltas[j].mask
        dev[f"u{j + 1}"] = sobolev_norm(uj_hat[j] - problem.uj[j], mask=dm)
        res[f"F{j + 1}"] = lp_norm(dbar_residual(uj_hat[j], problem.Aj[j]), mask=dm)
    pin = float(np.abs(u.evaluate(pts) - problem.u0.evaluate(pts)).max())
    result = GluedResult(u, uj_hat, u, dev, match, res, pin, mism, trace, lqj.as_dict())
    scale = 1 + float(np.abs(u.values).max())
    if match >= MATCH_TOL * scale:
        raise GluingError(f"overlap mismatch {match:.3g} after gluing")
    if not trace.converged:
        raise GluingError(f"glue iteration stalled at residual {trace.final_residual:.3g}")
    worst = max(dev.values())
    if worst >= eps:
        log.warning("glued maps deviate by %.3g >= eps = %.3g", worst, eps)
    result.global_map = assemble_global(result, problem.transitions, dec)
    return result


def assemble_global(result: GluedResult, charts, decomposition: GoodPairDecomposition) -> GridFunction:
    """Chart-0 values on ``Delta_0``, transported chart-j values elsewhere."""
    scale = 1 + float(np.abs(result.u0_hat.values).max())
    if not result.match_residual < MATCH_TOL * scale:
        raise GluingError(f"cannot assemble: match residual {result.match_residual:.3g}")
    vals = result.u0_hat.values.copy()
    for j, Psi in enumerate(charts):
        only = decomposition.deltas[j].mask & ~decomposition.delta0.mask
        vals[:, only] = Psi(result.uj_hat[j].values)[:, only]
    return result.u0_hat.like(vals)


def seam_continuity(result: GluedResult, charts, decomposition: GoodPairDecomposition,
                    samples: int | None = None) -> float:
    """Sup of ``|u0_hat - Psi_j(uj_hat)|`` on ``samples`` points of each seam."""
    count = samples or 4 * decomposition.grid.n_theta
    worst = 0.0
    for j, Psi in enumerate(charts):
        pts = decomposition.seam_samples(j, count)
        a = result.u0_hat.evaluate(pts)
        b = Psi(result.uj_hat[j].evaluate(pts))
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


# ---------------------------------------------------------------------------
def bump_scenario(grid, arcs=None, alpha: float = 0.05, eps: float = 0.05, delta: float = 2e-5,
                  offsets=None, probes: int = 16, seed: int = 0, tol: float = 1e-11):
    """Two-chart test problem for ``bump(eps)`` in C^2.

    Chart 0 carries ``bump(eps)``; chart ``j`` is a translate with the pulled
    back structure. The chart-0 disc solves the equation from
    ``(zeta, 0.3 zeta^2)``; chart-j discs solve it from the transported disc
    plus a ``delta``-size perturbation, so they disagree with ``u0`` at order
    ``delta`` on the overlaps.
    """
    from .geometry import build_decomposition
    from .structures import bump, translation_chart

    arcs = arcs or [(0.3, 2.8), (3.5, 6.0)]
    offsets = offsets or [(0.0, 0.05j * (j + 1)) for j in range(len(arcs))]
    dec = build_decomposition(arcs, alpha, grid)
    A0 = bump(eps, n=2)
    start = GridFunction.from_callable(lambda z: np.array([z, 0.3 * z**2]), grid)
    u0, _ = newton_solve(start, A0, 0.0, tol=tol, probes=probes, seed=seed)
    uj, charts, Aj = [], [], []
    for j, off in enumerate(offsets):
        Psi = translation_chart(off)
        Aj_ = pullback_matrix_field(A0, Psi)
        w = grid.nodes
        pert = delta * np.array([np.conj(w) ** 2 * 0, w**2 + 0.5 * np.conj(w)])
        s = u0.like(Psi.inverse(u0.values) + pert)
        u, _ = newton_solve(s, Aj_, 0.0, tol=tol, probes=probes, seed=seed)
        uj.append(u)
        charts.append(Psi)
        Aj.append(Aj_)
    return GluingProblem(dec, u0, uj, charts, A0, Aj)
