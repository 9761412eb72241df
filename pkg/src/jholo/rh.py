"""Boundary attachment of discs to a torus of fibers.

Along each boundary arc ``I_j`` the chart-j model disc is
``(zeta, 0, ..., 0, c h_j(zeta)**N)`` where ``h_j`` is holomorphic on the
disc, unimodular on ``I_j`` and strictly smaller than one in modulus
elsewhere. Large ``N`` makes the last component negligible away from ``I_j``
while keeping it on the unit circle along the arc. The model discs are
corrected chart by chart, glued to the central disc, and the boundary of the
result is compared with the sampled torus.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .crsolver import LinearizedOperator, estimate_lipschitz, estimate_lqj, newton_solve, right_inverse
from .dbar import dbar_residual
from .errors import AttachmentError, ConfigurationError, GateError, GeometryError, ResolutionError
from .geometry import (TWO_PI, DomainSpec, GoodPairDecomposition, GridFunction, PolarGrid, lp_norm,
                       smoothstep, sobolev_norm)
from .gluer import GluingProblem, cousin_glue
from .structures import ChartTransition, ComplexMatrixField, identity_chart, validate_normalized_chart

log = logging.getLogger(__name__)

N_LADDER = (8, 16, 32, 64, 128)
STAGE_TOL = 1e-3


def _beyond(theta, arc):
    """Angular distance from ``theta`` to the arc (zero on the arc)."""
    a, b = arc
    off = np.mod(np.asarray(theta) - a, TWO_PI)
    L = b - a
    return np.where(off <= L, 0.0, np.minimum(off - L, TWO_PI - off))


# ---------------------------------------------------------------------------
# peak functions
# ---------------------------------------------------------------------------
class PeakFunction:
    """``h(zeta) = zeta exp(-s g(zeta))`` with ``Re g`` the Poisson extension of ``b``.

    ``b`` vanishes on the arc and rises smoothly to one within ``width`` past
    its ends, so ``|h| = 1`` exactly on the arc, ``|h| < 1`` on the rest of the
    closed disc and ``h(0) = 0``.
    """

    def __init__(self, arc, width: float, strength: float = 0.3, samples: int = 2**15):
        if width <= 0 or strength <= 0:
            raise ConfigurationError("peak width and strength must be positive")
        self.arc = (float(arc[0]), float(arc[1]))
        self.width = float(width)
        self.strength = float(strength)
        self.samples = int(samples)
        K = self.samples
        t = TWO_PI * np.arange(K) / K
        b = smoothstep(_beyond(t, self.arc) / self.width)
        c = np.fft.fft(b) / K
        g = np.zeros(K, dtype=complex)
        g[0] = c[0].real
        g[1:K // 2] = 2 * c[1:K // 2]
        if np.abs(g[K // 4:K // 2]).max() > 1e-14:
            raise ResolutionError("boundary profile is not resolved; increase samples or width")
        cut = int(np.nonzero(np.abs(g) > 1e-18)[0].max()) + 1
        self.g_coefficients = g[:cut]
        self._boundary_h = np.exp(1j * t) * np.exp(-self.strength * (np.fft.ifft(g) * K))

    def g(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), self.g_coefficients)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return z * np.exp(-self.strength * self.g(z))

    def power(self, z, N: int):
        return self(z) ** N

    def taylor(self, N: int, degree: int) -> np.ndarray:
        """Taylor coefficients ``0..degree`` of ``h**N`` (boundary FFT)."""
        K = self.samples
        a = np.fft.fft(self._boundary_h ** N) / K
        if np.abs(a[K // 2:]).max() > 1e-10:
            raise ResolutionError(f"h^{N} is not resolved by {K} boundary samples")
        return a[: degree + 1]

    def tail(self, N: int, degree: int) -> float:
        """Sum of the dropped coefficient moduli (bound on the truncation error on the closed disc)."""
        K = self.samples
        a = np.fft.fft(self._boundary_h ** N) / K
        return float(np.abs(a[degree + 1:K // 2]).sum())

    def truncated_power(self, grid: PolarGrid, N: int, degree: int | None = None) -> np.ndarray:
        """Degree-``degree`` truncation of ``h**N`` at the nodes (holomorphic, exact on the grid)."""
        deg = grid.degree if degree is None else degree
        a = self.taylor(N, deg)
        out = np.empty(grid.shape, dtype=complex)
        powers = np.arange(a.size)
        for i, r in enumerate(grid.r):
            row = np.zeros(grid.n_theta, dtype=complex)
            row[: a.size] = a * r**powers
            out[i] = np.fft.ifft(row) * grid.n_theta
        return out


def riemann_power(domain, N: int, grid: PolarGrid) -> GridFunction:
    """``(h_j)**N`` at the nodes, ``h_j`` the inverse of the domain parametrization.

    ``domain`` is a :class:`DomainSpec` (values live on its pulled-back grid)
    or a :class:`PeakFunction` (values on the unit-disc grid).
    """
    if int(N) != N or N < 1:
        raise ConfigurationError("N must be a positive integer")
    N = int(N)
    if isinstance(domain, PeakFunction):
        return GridFunction(domain.power(grid.nodes, N)[None], grid)
    if not isinstance(domain, DomainSpec):
        raise ConfigurationError("domain must be a DomainSpec or a PeakFunction")
    f = GridFunction.constant(0.0, grid, domain=domain)
    z = f.nodes
    try:
        w = domain.inverse(z)
    except GeometryError as exc:
        raise ResolutionError(f"inverse of the domain map failed: {exc}") from exc
    if np.abs(domain.psi(w) - z).max() > 1e-9:
        raise ResolutionError("inverse of the domain map is inaccurate near the boundary")
    w = np.where(np.abs(w) > 1, w / np.abs(w), w)
    return f.like((w**N)[None])


# ---------------------------------------------------------------------------
# torus families
# ---------------------------------------------------------------------------
@dataclass
class TorusFamily:
    """Central disc ``v`` with boundary fibers ``G(z, zeta)``, all in chart-0 coordinates.

    ``charts[j]`` maps chart-j coordinates to chart 0 and ``structures[j]`` is
    the structure in chart j; in chart j the fibers over ``I_j`` are
    ``zeta -> (z, 0, ..., zeta)``.
    """

    v: GridFunction
    fiber: Callable
    arcs: list
    A0: ComplexMatrixField
    charts: list
    structures: list
    name: str = "torus"

    @property
    def n(self) -> int:
        return self.v.n

    @property
    def m(self) -> int:
        return len(self.arcs)

    def __call__(self, z, zeta):
        return self.fiber(np.asarray(z, dtype=complex), np.asarray(zeta, dtype=complex))

    def sample(self, count: int) -> np.ndarray:
        """``G`` on a ``count x count`` grid of ``(z, zeta)`` on the torus; shape ``(n, count**2)``."""
        s = np.exp(1j * TWO_PI * np.arange(count) / count)
        Z, W = np.meshgrid(s, s, indexing="ij")
        return self(Z.ravel(), W.ravel())

    def lipschitz(self, count: int = 256) -> float:
        """Largest angular finite-difference slope of ``G`` over both circle factors."""
        pts = self.sample(count).reshape(self.n, count, count)
        step = TWO_PI / count
        d1 = np.abs(np.roll(pts, -1, axis=1) - pts).max()
        d2 = np.abs(np.roll(pts, -1, axis=2) - pts).max()
        return float(np.sqrt(self.n) * max(d1, d2) / step)

    def check(self, tol: float = 1e-9) -> dict:
        """Invariants: centres on ``v``, normalized fibers over the arcs, normalized central disc."""
        grid = self.v.grid
        zb = grid.boundary
        centre = float(np.abs(self(zb, np.zeros_like(zb)) - self.v.values[:, -1]).max())
        s = np.exp(1j * TWO_PI * np.arange(64) / 64)
        fib = 0.0
        disc = 0.0
        model = np.zeros((self.n,) + grid.shape, dtype=complex)
        model[0] = grid.nodes
        for j, arc in enumerate(self.arcs):
            on = zb[_beyond(np.angle(zb), arc) == 0]
            Z, W = np.meshgrid(on, s, indexing="ij")
            got = self.charts[j].inverse(self(Z.ravel(), W.ravel()))
            want = np.zeros_like(got)
            want[0] = Z.ravel()
            want[-1] = W.ravel()
            fib = max(fib, float(np.abs(got - want).max()))
            disc = max(disc, float(np.abs(self.charts[j].inverse(self.v.values) - model).max()))
        out = {"centres": centre, "fibers": fib, "central_disc": disc}
        out["ok"] = bool(max(centre, fib, disc) < tol)
        return out


def standard_torus(grid: PolarGrid, arcs: Sequence, A0: ComplexMatrixField, width: float | None = None,
                   name: str = "torus") -> TorusFamily:
    """Torus over ``v = (zeta, 0, ..., 0)`` with fibers ``(z, 0, ..., lam(z) zeta)``.

    ``lam`` equals one on the arcs and shrinks the fibers to constant discs
    across the gaps (C-infinity in the boundary angle). Charts are identities and
    every chart carries ``A0``, which must have vanishing last column.
    """
    n = A0.n
    if n < 2:
        raise ConfigurationError("attachment needs n >= 2")
    arcs = [(float(a), float(b)) for a, b in arcs]
    if width is None:
        width = 0.5 * _min_gap(arcs)
    z = grid.nodes
    vals = np.zeros((n,) + grid.shape, dtype=complex)
    vals[0] = z
    v = GridFunction(vals, grid)
    probe = np.zeros((n, 64), dtype=complex)
    probe[0] = 0.9 * np.exp(1j * TWO_PI * np.arange(64) / 64)
    probe[-1] = np.linspace(-0.9, 0.9, 64)
    if not validate_normalized_chart(A0, probe):
        raise ConfigurationError("structure is not normalized: last column of A does not vanish")

    def lam(z):
        d = np.min([_beyond(np.angle(z), arc) for arc in arcs], axis=0)
        return 1 - smoothstep(d / width)

    def fiber(z, zeta):
        z, zeta = np.broadcast_arrays(z, zeta)
        out = np.zeros((n,) + z.shape, dtype=complex)
        out[0] = z
        out[-1] = lam(z) * zeta
        return out

    charts = [identity_chart(n) for _ in arcs]
    return TorusFamily(v, fiber, arcs, A0, charts, [A0] * len(arcs), name)


def _min_gap(arcs) -> float:
    arcs = sorted((np.mod(a, TWO_PI), np.mod(a, TWO_PI) + (b - a)) for a, b in arcs)
    if len(arcs) == 1:
        return TWO_PI - (arcs[0][1] - arcs[0][0])
    gaps = [arcs[(j + 1) % len(arcs)][0] - arcs[j][1] + (TWO_PI if j == len(arcs) - 1 else 0)
            for j in range(len(arcs))]
    return float(min(gaps))


# ---------------------------------------------------------------------------
# pre-attachment discs
# ---------------------------------------------------------------------------
@dataclass
class PreAttachment:
    maps: list
    peaks: list
    N: int
    c: complex
    residuals: list
    identity_errors: list
    truncation: list

    def __iter__(self):
        return iter(self.maps)

    def __len__(self):
        return len(self.maps)

    def __getitem__(self, j):
        return self.maps[j]


def peak_functions(decomp: GoodPairDecomposition, strength: float = 0.2, width: float | None = None,
                   inset: float = 0.05) -> list:
    """One peak function per arc, unimodular on the arc shrunk by ``inset`` at both ends.

    ``width`` (default 3/4 of the smallest gap) is the rise length of the
    boundary profile past the shrunk arc.
    """
    w = 0.75 * _min_gap(decomp.arcs) if width is None else width
    out = []
    for a, b in decomp.arcs:
        if b - a <= 2 * inset:
            raise ConfigurationError("inset swallows the arc")
        out.append(PeakFunction((a + inset, b - inset), w, strength))
    return out


def build_preattachment(torus: TorusFamily, decomp: GoodPairDecomposition, c: complex, N: int,
                        peak: dict | None = None, peaks: list | None = None) -> PreAttachment:
    """Chart-j model discs ``(zeta, 0, ..., 0, c h_j**N)``, ``h_j**N`` truncated to the grid degree.

    Records per chart the residual norm and the largest deviation from the
    identity ``F(phi) = A'(phi) conj(d_zeta phi')`` (primes drop the last
    component), which holds because the last column of ``A`` vanishes.
    """
    if abs(abs(c) - 1) > 1e-12:
        raise ConfigurationError("c must be unimodular")
    if int(N) != N or N < 1:
        raise ConfigurationError("N must be a positive integer")
    grid = torus.v.grid
    n = torus.n
    peaks = peaks or peak_functions(decomp, **(peak or {}))
    maps, res, ident, trunc = [], [], [], []
    for j in range(decomp.m):
        Aj = torus.structures[j]
        if not Aj.last_column_zero:
            raise ConfigurationError(f"chart {j + 1} is not normalized")
        vals = np.zeros((n,) + grid.shape, dtype=complex)
        vals[0] = grid.nodes
        vals[-1] = c * peaks[j].truncated_power(grid, int(N))
        phi = GridFunction(vals, grid)
        F = dbar_residual(phi, Aj)
        Ap = Aj(phi.values)[:, : n - 1]
        ref = np.einsum("jk...,k...->j...", Ap, np.conj(phi.dz[: n - 1]))
        maps.append(phi)
        res.append(lp_norm(F))
        ident.append(float(np.abs(F.values - ref).max()))
        trunc.append(peaks[j].tail(int(N), grid.degree))
    return PreAttachment(maps, peaks, int(N), complex(c), res, ident, trunc)


def residual_ladder(torus: TorusFamily, decomp: GoodPairDecomposition, c: complex = 1.0,
                    ladder: Sequence = N_LADDER, peak: dict | None = None) -> list:
    """Per N: chart residual norms, ``|phi - u0|_p`` and ``|phi|_{W^{1,p}}``."""
    peaks = peak_functions(decomp, **(peak or {}))
    out = []
    for N in ladder:
        pre = build_preattachment(torus, decomp, c, N, peaks=peaks)
        u0 = [torus.v.like(torus.charts[j].inverse(torus.v.values)) for j in range(decomp.m)]
        out.append({"N": int(N), "residual": max(pre.residuals),
                    "distance": max(lp_norm(p - u) for p, u in zip(pre.maps, u0)),
                    "sobolev": max(sobolev_norm(p) for p in pre.maps)})
    return out


def lqj_ladder(torus: TorusFamily, decomp: GoodPairDecomposition, ladder: Sequence = N_LADDER,
               roots: int = 8, chart: int = 0, probes: int = 4, seed: int = 0,
               peak: dict | None = None) -> list:
    """LQJ constants over ``{phi^{c,N} : c^roots = 1}`` for each ``N`` of the ladder."""
    peaks = peak_functions(decomp, **(peak or {}))
    out = []
    for N in ladder:
        fam = [build_preattachment(torus, decomp, np.exp(2j * np.pi * k / roots), N, peaks=peaks)[chart]
               for k in range(roots)]
        rep = estimate_lqj(fam, torus.structures[chart], 0.0, probes=probes, pairs=2, seed=seed)
        out.append({"N": int(N), **rep.as_dict()})
    return out


# ---------------------------------------------------------------------------
# attachment
# ---------------------------------------------------------------------------
@dataclass
class AttachmentResult:
    h: GridFunction
    E: list
    measure: float
    attach_distance: float
    center_error: float
    N: int
    c: complex
    eps: float
    distances: np.ndarray = field(repr=False, default=None)
    chart_traces: list = field(default_factory=list)
    glue: dict = field(default_factory=dict)
    preattachment: dict = field(default_factory=dict)
    pins: list = field(default_factory=list)  # (point, |h - v| there)

    def as_dict(self) -> dict:
        return {"N": self.N, "c": [self.c.real, self.c.imag], "eps": self.eps,
                "E": [list(map(float, iv)) for iv in self.E], "measure": self.measure,
                "attach_distance": self.attach_distance, "center_error": self.center_error,
                "charts": self.chart_traces, "glue": self.glue, "preattachment": self.preattachment,
                "pins": [{"point": [z.real, z.imag], "error": e} for z, e in self.pins]}


def _intervals(flags: np.ndarray, n_theta: int) -> list:
    """Merge flagged boundary nodes (each owning one angular cell) into intervals."""
    h = TWO_PI / n_theta
    idx = np.nonzero(flags)[0]
    if idx.size == 0:
        return []
    if idx.size == n_theta:
        return [(0.0, TWO_PI)]
    out = []
    start = prev = idx[0]
    for i in idx[1:]:
        if i != prev + 1:
            out.append(((start - 0.5) * h, (prev + 0.5) * h))
            start = i
        prev = i
    out.append(((start - 0.5) * h, (prev + 0.5) * h))
    # join across theta = 0
    if len(out) > 1 and idx[0] == 0 and idx[-1] == n_theta - 1:
        first = out.pop(0)
        last = out.pop()
        out.append((last[0], first[1] + TWO_PI))
    return out


def torus_distance(h: GridFunction, torus: TorusFamily, count: int | None = None) -> np.ndarray:
    """Distance from ``h`` at each boundary node to the sampled torus ``G(S^1 x S^1)``.

    The sample size per circle is at least ``n_theta`` and large enough that the
    sampling error (half a step times the Lipschitz constant) is below 1e-3.
    """
    grid = h.grid
    lip = torus.lipschitz()
    need = int(np.ceil(np.pi * lip / 1e-3)) if lip > 0 else 1
    count = count or min(max(grid.n_theta, need), 2048)
    pts = torus.sample(count)
    tree = cKDTree(np.concatenate([pts.real, pts.imag]).T)
    hb = h.values[:, -1]
    d, _ = tree.query(np.concatenate([hb.real, hb.imag]).T)
    return d


def verify_attachment(h: GridFunction, torus: TorusFamily, eps: float, count: int | None = None):
    """Boundary intervals where ``dist(h, torus) >= eps`` and their total measure."""
    d = torus_distance(h, torus, count)
    E = _intervals(d >= eps, h.grid.n_theta)
    return E, float(sum(b - a for a, b in E))


def _staged(exc: GateError, stage: str) -> GateError:
    return GateError(f"{stage}: {exc}", rho=exc.rho, residual=exc.residual, stage=stage)


def attach_disc(torus: TorusFamily, decomp: GoodPairDecomposition, eps: float, c: complex = 1.0,
                N: int | Sequence | None = None, tol: float = STAGE_TOL, probes: int = 8, seed: int = 0,
                peak: dict | None = None, allowance: float = 0.05, force: bool = False,
                pins=()) -> AttachmentResult:
    """Attach a disc through ``v(0)`` to the torus off a small boundary set ``E``.

    ``N`` may be an integer or a ladder; for a ladder the smallest passing
    value is used. ``eps`` bounds both the uncovered boundary fraction
    ``|circle \\ union I_j| / 2 pi`` and the attachment distance; failing arc nodes
    may bring ``|E|`` up to ``(eps + allowance) * 2 pi``. ``pins`` adds up to three
    interior points where every Newton stage keeps the pre-attachment values.
    """
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    if not decomp.uncovered < eps * TWO_PI:
        raise GeometryError(f"uncovered boundary {decomp.uncovered:.4g} is not below eps * 2pi")
    ladder = list(N_LADDER) if N is None else ([int(N)] if np.ndim(N) == 0 else [int(x) for x in N])
    peaks = peak_functions(decomp, **(peak or {}))
    last = None
    for Nk in ladder:
        try:
            return _attach_once(torus, decomp, eps, complex(c), Nk, tol, probes, seed, peaks, allowance, force,
                                tuple(complex(p) for p in pins))
        except (GateError, AttachmentError) as exc:
            log.info("N = %d rejected: %s", Nk, exc)
            last = exc
    raise last


def _attach_once(torus, decomp, eps, c, N, tol, probes, seed, peaks, allowance, force, pins=()):
    grid = torus.v.grid
    a = (0.0,) + pins if pins else 0.0
    pre = build_preattachment(torus, decomp, c, N, peaks=peaks)
    traces, uj = [], []
    for j, phi in enumerate(pre.maps):
        try:
            u, tr = newton_solve(phi, torus.structures[j], a, tol=tol, probes=probes, seed=seed, force=force)
        except GateError as exc:
            raise _staged(exc, f"chart {j + 1}") from exc
        if not tr.converged:
            raise AttachmentError(f"chart {j + 1}: residual floor {tr.final_residual:.3g} above {tol:.3g}")
        traces.append({"chart": j + 1, "initial_residual": tr.initial_residual,
                       "final_residual": tr.final_residual, "iterations": tr.iterations,
                       "deviation": tr.deviation, "certificate_bound": tr.certificate_bound,
                       "certificate_holds": tr.certificate_holds, **{k: tr.lqj[k] for k in ("L", "Q", "rho")}})
        uj.append(u)
    u0 = torus.v
    problem = GluingProblem(decomp, u0, uj, torus.charts, torus.A0, torus.structures)
    try:
        glued = cousin_glue(problem, eps, tol=tol, probes=probes, seed=seed, force=force, pins=pins)
    except GateError as exc:
        raise _staged(exc, "glue") from exc
    h = glued.global_map
    d = torus_distance(h, torus)
    theta = grid.theta
    covered = np.zeros(grid.n_theta, dtype=bool)
    for arc in decomp.arcs:
        covered |= _beyond(theta, arc) == 0
    fail = covered & (d >= eps)
    E = _intervals(~covered | fail, grid.n_theta)
    measure = float(sum(b - a for a, b in E))
    fail_measure = float(fail.sum() * TWO_PI / grid.n_theta)
    off = ~(~covered | fail)
    dist = float(d[off].max()) if off.any() else float("nan")
    centre = float(np.abs(h.at(0.0) - torus.v.at(0.0)).max())
    result = AttachmentResult(h, E, measure, dist, centre, N, c, eps, d, traces,
                              glued.summary() | {"trace": {"iterations": glued.trace.iterations,
                                                           "final_residual": glued.trace.final_residual}},
                              {"residuals": pre.residuals, "identity_errors": pre.identity_errors,
                               "truncation": pre.truncation},
                              [(z, float(np.abs(h.at(z) - torus.v.at(z)).max())) for z in pins])
    if measure >= (eps + allowance) * TWO_PI:
        raise AttachmentError(f"exceptional set has measure {measure:.3g} rad (failing arc nodes "
                              f"{fail_measure:.3g} rad)", measure=measure)
    if centre >= 1e-8:
        raise AttachmentError(f"centre moved by {centre:.3g}", measure=measure)
    return result


def rh_scenario(grid: PolarGrid, eps_structure: float = 0.1, m: int = 3, gap: float = 0.2,
                alpha: float | None = None, kappa: float = 4.0, n: int = 2):
    """``m`` equal arcs separated by gaps ``gap`` with ``rh-model(eps_structure)`` in every chart."""
    from .geometry import build_decomposition
    from .structures import rh_model

    L = (TWO_PI - m * gap) / m
    if L <= 0:
        raise GeometryError("gaps leave no room for arcs")
    arcs = [(j * (L + gap), j * (L + gap) + L) for j in range(m)]
    alpha = alpha if alpha is not None else 0.99 * gap / 6
    dec = build_decomposition(arcs, alpha, grid, kappa=kappa)
    torus = standard_torus(grid, arcs, rh_model(eps_structure, n))
    return torus, dec
