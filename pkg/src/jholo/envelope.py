"""Disc functionals, envelope search over disc families, and reference oracles.

The Poisson functional averages ``f`` over the boundary of a disc; its
envelope at ``p`` is the infimum over discs through ``p``. Candidates are
polynomial jets of degree at most six, corrected to ``J``-holomorphy by the
pinned Newton iteration when the structure is not integrable. A lattice
Perron iteration gives an independent value in complex dimension one.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .crsolver import newton_solve
from .dbar import dbar_residual
from .errors import ConfigurationError, JHoloError
from .geometry import TWO_PI, GridFunction, PolarGrid, lp_norm
from .structures import ComplexMatrixField

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------
@dataclass
class ScalarField:
    """Real function on chart coordinates; ``fn`` maps ``(n, P)`` complex to ``(P,)``."""

    fn: Callable
    n: int = 1
    domain: Callable | None = None
    continuous: bool = True
    name: str = "f"

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.ndim == 1 and self.n == 1:
            z = z[None]
        elif z.ndim == 1:
            z = z[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(self.fn(z), dtype=float)
        return np.broadcast_to(out, z.shape[1:]).copy()

    def value(self, p) -> float:
        return float(self(np.asarray(p, dtype=complex).reshape(self.n, 1))[0])

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.domain is None:
            return np.ones(z.shape[1:], dtype=bool)
        return np.asarray(self.domain(z), dtype=bool)


def _unit_ball(z):
    return np.sqrt(np.sum(np.abs(z) ** 2, axis=0)) <= 1 + 1e-12


def scalar_field(name: str, n: int = 1, **params) -> ScalarField:
    """Built-in fields on the closed unit ball: log-abs, neg-abs-im, re, abs2, const."""
    k = float(params.get("k", 1.0))
    table = {
        "log-abs": lambda z: k * np.log(np.abs(z[0])),
        "neg-abs-im": lambda z: -np.abs(z[0].imag),
        "re": lambda z: z[0].real,
        "abs2": lambda z: np.sum(np.abs(z) ** 2, axis=0),
        "const": lambda z: np.full(z.shape[1:], float(params.get("c", 0.0))),
    }
    if name not in table:
        raise ConfigurationError(f"unknown scalar field {name!r}")
    return ScalarField(table[name], n, _unit_ball, name != "log-abs", name)


# ---------------------------------------------------------------------------
# Poisson functional
# ---------------------------------------------------------------------------
def _boundary_values(v) -> np.ndarray:
    if isinstance(v, GridFunction):
        return v.values[:, -1]
    return np.asarray(v, dtype=complex)


def poisson_functional(f: ScalarField, v) -> float:
    """Boundary mean ``(1/2pi) int f(v(e^{it})) dt`` by the trapezoid rule on the boundary ring.

    ``v`` is a :class:`GridFunction` or an ``(n, n_theta)`` array of boundary values.
    """
    b = _boundary_values(v)
    if not np.all(f.contains(b)):
        raise ConfigurationError("disc boundary leaves the domain of f")
    vals = f(b)
    if np.any(np.isneginf(vals)):
        return float("-inf")
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# disc families
# ---------------------------------------------------------------------------
class DiscFamily:
    """Jets ``p + sum_k c_k zeta^k`` (``k = 1..degree``) corrected to holomorphy.

    For ``A = 0`` the jets are already holomorphic and only boundary values are
    formed during the search. Otherwise each candidate goes through the pinned
    Newton iteration and is rejected unless its residual is below ``tol``.
    Boundary means are checked on two resolutions; a candidate whose means
    disagree by more than ``qtol`` is rejected (its boundary runs into a
    singularity of ``f`` that the quadrature cannot resolve).
    """

    def __init__(self, grid: PolarGrid, A: ComplexMatrixField, degree: int = 6, budget: int = 2000,
                 scale: float = 0.5, tol: float = 1e-9, probes: int = 8, seed: int = 0, refine: int = 4,
                 qtol: float = 1e-5):
        if degree < 1 or budget < 0 or refine < 1 or not qtol > 0:
            raise ConfigurationError("need degree >= 1, budget >= 0, refine >= 1 and qtol > 0")
        self.grid = grid
        self.A = A
        self.n = A.n
        self.degree = int(degree)
        self.budget = int(budget)
        self.scale = float(scale)
        self.tol = float(tol)
        self.probes = int(probes)
        self.seed = int(seed)
        self.refine = int(refine)
        self.qtol = float(qtol)
        # boundary means are taken on K and 2K equispaced angles, K = refine * n_theta
        K = self.refine * grid.n_theta
        self._angles = [TWO_PI * np.arange(k) / k for k in (K, 2 * K)]
        self._powers = [np.exp(1j * np.outer(np.arange(1, degree + 1), t)) for t in self._angles]

    @property
    def size(self) -> int:
        return self.n * self.degree

    def jet(self, p, params) -> GridFunction:
        z = self.grid.nodes
        c = np.asarray(params, dtype=complex).reshape(self.n, self.degree)
        vals = np.repeat(np.asarray(p, dtype=complex).reshape(self.n, 1, 1), self.grid.n_r, 1)
        vals = np.broadcast_to(vals, (self.n,) + self.grid.shape).copy()
        for k in range(1, self.degree + 1):
            vals = vals + c[:, k - 1, None, None] * z[None] ** k
        return GridFunction(vals, self.grid)

    def boundary(self, p, params, fine: bool = True):
        """Boundary values of the corrected disc on the fine (``2K``) or coarse (``K``)
        angles, or ``None`` if the correction fails."""
        bs = self._boundaries(p, params, (1,) if fine else (0,))
        return None if bs is None else bs[0]

    def _boundaries(self, p, params, which=(0, 1)):
        c = np.asarray(params, dtype=complex).reshape(self.n, self.degree)
        p = np.asarray(p, dtype=complex).reshape(self.n, 1)
        if self.A.zero:
            return [p + c @ self._powers[k] for k in which]
        u = self.disc(p, params)
        if u is None:
            return None
        return [u.evaluate(np.exp(1j * self._angles[k])) for k in which]

    def poisson(self, f: ScalarField, p, params):
        """Boundary mean of ``f`` on ``2K`` angles, or ``None`` when the disc fails, leaves
        the domain, or the ``K``/``2K`` means differ by more than ``qtol (1 + |mean|)``."""
        bs = self._boundaries(p, params)
        if bs is None or not all(np.all(f.contains(b)) for b in bs):
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            coarse, fine = (float(np.mean(f(b))) for b in bs)
        if np.isneginf(fine):
            return fine
        if not np.isfinite(fine) or not abs(coarse - fine) <= self.qtol * (1 + abs(fine)):
            return None
        return fine

    def retract(self, p, params, inside: Callable, steps: int = 30):
        """Scale the non-constant part of the jet so its boundary lies in ``inside``."""
        c = np.asarray(params, dtype=complex).reshape(self.n, self.degree)
        p = np.asarray(p, dtype=complex).reshape(self.n, 1)
        P = self._powers[1]
        if np.all(inside(p + c @ P)):
            return np.asarray(params, dtype=complex)
        lo, hi = 0.0, 1.0
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            if np.all(inside(p + mid * c @ P)):
                lo = mid
            else:
                hi = mid
        return np.asarray(params, dtype=complex) * lo

    def disc(self, p, params):
        u = self.jet(p, params)
        if self.A.zero:
            return u
        try:
            u, tr = newton_solve(u, self.A, 0.0, tol=self.tol, probes=self.probes, seed=self.seed)
        except JHoloError as exc:
            log.debug("candidate rejected: %s", exc)
            return None
        if not tr.converged:
            return None
        return u

    def certificate(self, u: GridFunction, p) -> dict:
        res = 0.0 if self.A.zero else lp_norm(dbar_residual(u, self.A))
        pin = float(np.abs(u.at(0.0) - np.asarray(p, dtype=complex).ravel()).max())
        return {"residual": res, "pin_error": pin, "ok": bool(res < max(self.tol, 1e-12) and pin < 1e-8)}


@dataclass
class EnvelopeEstimate:
    point: np.ndarray
    value: float
    witness: GridFunction | None
    params: np.ndarray
    evaluations: int
    failures: int
    certificate: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"point": [[float(z.real), float(z.imag)] for z in np.ravel(self.point)], "value": self.value,
                "evaluations": self.evaluations, "failures": self.failures, "certificate": self.certificate}


def envelope_estimate(f: ScalarField, p, A: ComplexMatrixField, family: DiscFamily) -> EnvelopeEstimate:
    """Smallest Poisson mean over the family's discs through ``p``.

    Coordinate search with step halving from random restarts; the constant disc
    is always included. The sequence of candidates depends only on the seed,
    so a larger budget can only lower the estimate.
    """
    p = np.asarray(p, dtype=complex).reshape(A.n)
    if family.A is not A and family.A.catalog_id != A.catalog_id:
        raise ConfigurationError("family was built for a different structure")
    fp = f.value(p)
    best = fp
    best_params = np.zeros(family.size, dtype=complex)
    rng = np.random.default_rng(family.seed)
    evals = fails = 0
    damp = np.tile(1.0 / np.arange(1, family.degree + 1), family.n)
    history = [best]

    def value(params):
        # candidates leaving the domain of f are pulled back towards p
        nonlocal evals, fails
        evals += 1
        params = family.retract(p, params, f.contains)
        val = family.poisson(f, p, params)
        if val is None:
            fails += 1
            return np.inf, params
        return val, params

    while evals < family.budget:
        x = (rng.standard_normal(family.size) + 1j * rng.standard_normal(family.size)) * family.scale * damp
        fx, x = value(x)
        step = family.scale * 0.5
        while evals < family.budget and step > 1e-4:
            improved = False
            for i in range(family.size):
                for d in (step, -step, 1j * step, -1j * step):
                    if evals >= family.budget:
                        break
                    y = x.copy()
                    y[i] += d
                    fy, y = value(y)
                    if fy < fx:
                        x, fx, improved = y, fy, True
                if evals >= family.budget:
                    break
            if not improved:
                step *= 0.5
        if fx < best:
            best, best_params = fx, x
        history.append(best)
    witness = family.disc(p, best_params) if best < fp else None
    if witness is None or not best < fp:
        best, best_params = fp, np.zeros(family.size, dtype=complex)
        witness = family.jet(p, best_params)
    cert = family.certificate(witness, p)
    return EnvelopeEstimate(p, float(best), witness, best_params, evals, fails, cert, history)


def submeanvalue_check(f: ScalarField, A: ComplexMatrixField, v_p: GridFunction, family: DiscFamily) -> float:
    """Envelope at ``v_p(0)`` minus its boundary average along ``v_p`` (``n_theta/8`` points)."""
    centre = v_p.at(0.0)
    lhs = envelope_estimate(f, centre, A, family).value
    b = v_p.values[:, -1]
    step = max(v_p.grid.n_theta // (v_p.grid.n_theta // 8), 1)
    pts = b[:, ::step]
    rhs = np.mean([envelope_estimate(f, pts[:, k], A, family).value for k in range(pts.shape[1])])
    return float(lhs - rhs)


def extremal_torus(f: ScalarField, A: ComplexMatrixField, v: GridFunction, family: DiscFamily, m: int = 8,
                   gap: float = 0.1, width: float | None = None, samples: int = 16):
    """Torus of near-extremal discs over the boundary of ``v``.

    The circle is cut into ``m`` equal arcs separated by ``gap``. Over arc ``j``
    the fiber is the envelope witness ``w_j`` at ``v(e^{i theta_j})`` (arc
    midpoint) moved to the base point, ``G(z, zeta) = v(z) + w_j(lam(z) zeta) - w_j(0)``,
    and ``lam`` shrinks fibers to constant discs across the gaps. Translated
    fibers are exactly holomorphic only for constant ``A``; their residuals are
    reported.

    Returns ``(torus, log)``; ``log`` compares the torus double average of ``f``
    with the boundary average of envelope estimates along ``v`` on ``samples``
    points. Both sides are estimates, so the comparison is recorded, not asserted.
    """
    from .geometry import smoothstep
    from .rh import TorusFamily, _beyond, _min_gap
    from .structures import identity_chart

    if m < 1 or not 0 < gap < TWO_PI / m:
        raise ConfigurationError("need m >= 1 arcs and 0 < gap < 2pi/m")
    L = TWO_PI / m - gap
    arcs = [(j * TWO_PI / m, j * TWO_PI / m + L) for j in range(m)]
    width = 0.5 * _min_gap(arcs) if width is None else float(width)
    mids = np.array([a + L / 2 for a, _ in arcs])
    base = v.evaluate(np.exp(1j * mids))
    ests = [envelope_estimate(f, base[:, j], A, family) for j in range(m)]
    discs = [e.witness for e in ests]
    centres = [d.at(0.0) for d in discs]
    residuals = [0.0 if A.zero else lp_norm(dbar_residual(d, A)) for d in discs]

    def lam_and_arc(z):
        th = np.angle(z)
        d = np.array([_beyond(th, arc) for arc in arcs])
        return 1 - smoothstep(d.min(axis=0) / width), d.argmin(axis=0)

    def fiber(z, zeta):
        z, zeta = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(zeta, dtype=complex))
        shape = z.shape
        z, zeta = z.ravel(), zeta.ravel()
        out = v.evaluate(z)
        lam, j = lam_and_arc(z)
        for k in range(m):
            sel = j == k
            if sel.any():
                out[:, sel] += discs[k].evaluate(lam[sel] * zeta[sel]) - centres[k][:, None]
        return out.reshape((v.n,) + shape)

    torus = TorusFamily(v, fiber, arcs, A, [identity_chart(v.n) for _ in arcs], [A] * m, "extremal")
    th = TWO_PI * np.arange(samples) / samples
    pts = v.evaluate(np.exp(1j * th))
    rhs = float(np.mean([envelope_estimate(f, pts[:, k], A, family).value for k in range(samples)]))
    vals = torus.sample(samples)
    lhs = float(np.mean(f(vals)))
    log_ = {"torus_average": lhs, "envelope_average": rhs, "gap": lhs - rhs,
            "outside_domain": float(np.mean(~f.contains(vals))), "arc_values": [e.value for e in ests],
            "fiber_residuals": residuals}
    return torus, log_


def poletsky_average_check(f: ScalarField, torus, beta, count: int | None = None) -> float:
    """``|avg f(G(e^{i theta}, e^{i(t + beta(theta))})) - avg f(G(e^{i theta}, e^{it}))|``."""
    count = count or torus.v.grid.n_theta
    th = TWO_PI * np.arange(count) / count
    b = np.asarray(beta(th) if callable(beta) else beta, dtype=float)
    if b.shape != th.shape:
        raise ConfigurationError("beta must give one angle per boundary node")
    T, S = np.meshgrid(th, th, indexing="ij")
    z = np.exp(1j * T)
    a = f(torus(z.ravel(), np.exp(1j * S).ravel())).mean()
    shifted = f(torus(z.ravel(), np.exp(1j * (S + b[:, None])).ravel())).mean()
    return float(abs(shifted - a))


# ---------------------------------------------------------------------------
# Perron oracle
# ---------------------------------------------------------------------------
@dataclass
class PerronResult:
    x: np.ndarray
    values: np.ndarray
    inside: np.ndarray
    iterations: int
    change: float

    def at(self, z: complex) -> float:
        """Bilinear interpolation of the lattice function."""
        h = self.x[1] - self.x[0]
        fx = (z.real - self.x[0]) / h
        fy = (z.imag - self.x[0]) / h
        i, j = int(np.floor(fx)), int(np.floor(fy))
        s, t = fx - i, fy - j
        v = self.values
        return float((1 - s) * (1 - t) * v[i, j] + s * (1 - t) * v[i + 1, j]
                     + (1 - s) * t * v[i, j + 1] + s * t * v[i + 1, j + 1])


def perron_oracle(f: ScalarField, size: int = 64, iters: int = 200000, tol: float = 1e-8) -> PerronResult:
    """Largest discrete subharmonic minorant of ``f`` on a ``(size+1)^2`` lattice of the closed disc.

    Iterates ``u <- min(f, four-point average of u)`` from ``u = f`` at nodes
    whose four neighbours lie in the closed disc; other nodes keep ``f``.
    """
    x = np.linspace(-1, 1, size + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    Z = X + 1j * Y
    closed = np.abs(Z) <= 1 + 1e-12
    fz = np.where(closed, f(Z.ravel()[None]).reshape(Z.shape), 0.0)
    inner = np.zeros_like(closed)
    inner[1:-1, 1:-1] = closed[1:-1, 1:-1] & closed[2:, 1:-1] & closed[:-2, 1:-1] & closed[1:-1, 2:] & closed[1:-1, :-2]
    u = fz.copy()
    change = np.inf
    k = 0
    for k in range(1, iters + 1):
        avg = np.zeros_like(u)
        avg[1:-1, 1:-1] = 0.25 * (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2])
        new = np.where(inner, np.minimum(fz, avg), fz)
        change = float(np.abs(new - u).max())
        u = new
        if change < tol:
            break
    else:
        warnings.warn(f"Perron iteration stopped after {iters} sweeps with change {change:.3g}", RuntimeWarning)
    return PerronResult(x, np.where(closed, u, np.nan), closed, k, change)


# ---------------------------------------------------------------------------
# Lelong functional and Green sums
# ---------------------------------------------------------------------------
@dataclass
class WeightedPoints:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).ravel()
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.points.shape != self.weights.shape:
            raise ConfigurationError("points and weights differ in length")
        if np.any(self.weights < 0):
            raise ConfigurationError("weights must be nonnegative")
        if np.any(np.abs(self.points) >= 1):
            raise ConfigurationError("points must lie in the open disc")


def lelong_functional(w: WeightedPoints) -> float:
    """``sum alpha_k log|zeta_k|`` (``-inf`` when a weighted point sits at the origin)."""
    if w.points.size == 0:
        return 0.0
    active = w.weights > 0
    if np.any(active & (w.points == 0)):
        return float("-inf")
    return float(np.sum(w.weights[active] * np.log(np.abs(w.points[active]))))


def green_sum(w: WeightedPoints, z) -> np.ndarray | float:
    """``sum alpha_k log|(z - zeta_k) / (1 - conj(zeta_k) z)|`` at ``z`` (scalar or array)."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise ConfigurationError("z must lie in the open disc")
    out = np.zeros(z.shape)
    for a, s in zip(w.weights, w.points):
        if a == 0:
            continue
        with np.errstate(divide="ignore"):
            out = out + a * np.log(np.abs((z - s) / (1 - np.conj(s) * z)))
    return float(out) if out.ndim == 0 else out


def k_alpha(alpha: ScalarField, v: GridFunction) -> float:
    """Minimum of ``alpha(v(zeta)) log|zeta|`` over interior nodes, with ``0 * (-inf) = 0``."""
    inner = v.values[:, :-1]
    a = alpha(inner.reshape(v.n, -1)).reshape(inner.shape[1:])
    if np.any(a < 0):
        raise ConfigurationError("alpha must be nonnegative")
    lr = np.log(np.abs(v.grid.nodes[:-1]))
    terms = np.where(a == 0, 0.0, a * lr)
    return float(terms.min())


def lelong_chain(w: WeightedPoints) -> dict:
    """Discrete inequality chain: Green sum at 0, Lelong functional, smallest single term."""
    g0 = green_sum(w, 0.0)
    L = lelong_functional(w)
    active = w.weights > 0
    with np.errstate(divide="ignore"):
        k = float(np.min(w.weights[active] * np.log(np.abs(w.points[active])))) if active.any() else 0.0
    return {"green_at_0": g0, "lelong": L, "k_term": k,
            "holds": bool(abs(g0 - L) <= 1e-12 * max(1.0, abs(L)) and L <= k + 1e-12)}


def lelong_number_estimate(f: ScalarField, p, radii, samples: int = 256, seed: int = 0) -> float:
    """Least-squares slope of ``sup_{|q - p| = r} f(q)`` against ``log r``.

    In one variable the circles are sampled uniformly; for ``n > 1`` points are
    drawn on the sphere (fixed seed) and the complex lines through the
    coordinate axes are always included.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3 or np.any(np.diff(radii) >= 0) or radii[-1] <= 0:
        raise ConfigurationError("need at least 3 positive decreasing radii")
    p = np.asarray(p, dtype=complex).reshape(f.n, 1)
    t = np.exp(1j * TWO_PI * np.arange(samples) / samples)
    if f.n == 1:
        dirs = t[None]
    else:
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((f.n, samples)) + 1j * rng.standard_normal((f.n, samples))
        g /= np.linalg.norm(g, axis=0)
        axes = [np.eye(f.n)[:, [k]] * t[None] for k in range(f.n)]
        dirs = np.concatenate([g] + axes, axis=1)
    sups = []
    for r in radii:
        vals = f(p + r * dirs)
        if np.all(np.isneginf(vals)):
            return float("inf")
        sups.append(float(np.max(vals)))
    slope = np.polyfit(np.log(radii), np.asarray(sups), 1)[0]
    return float(slope)
