"""Discretization of the unit disc and of holomorphic images of it.

A :class:`PolarGrid` carries Gauss nodes in ``r**2`` together with the
boundary ring; a :class:`GridFunction` stores samples of a map into C^n on
such a grid (pulled back through the domain parametrization ``psi``) and
exposes spectral Wirtinger derivatives and discrete L^p / W^{1,p} norms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ._spectral import spectral
from .errors import ConfigurationError, GeometryError

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PolarGrid:
    n_r: int
    n_theta: int

    @property
    def spectral(self):
        return spectral(self.n_r, self.n_theta)

    @cached_property
    def r(self) -> np.ndarray:
        return self.spectral.r

    @cached_property
    def theta(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_theta) / self.n_theta

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.r[:, None] * np.exp(1j * self.theta)[None, :]

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.spectral.radial_weights[:, None] * (TWO_PI / self.n_theta)
        return np.broadcast_to(w, (self.n_r, self.n_theta)).copy()

    @property
    def boundary(self) -> np.ndarray:
        return self.nodes[-1]

    @property
    def degree(self) -> int:
        return self.spectral.degree

    @property
    def shape(self):
        return (self.n_r, self.n_theta)


def build_grid(n_r: int, n_theta: int) -> PolarGrid:
    """Polar grid with ``n_r`` rings (boundary ring included) and ``n_theta`` angles."""
    n_r, n_theta = int(n_r), int(n_theta)
    if n_r < 8:
        raise ConfigurationError(f"n_r must be >= 8, got {n_r}")
    if n_theta < 32 or n_theta & (n_theta - 1):
        raise ConfigurationError(f"n_theta must be a power of two >= 32, got {n_theta}")
    return PolarGrid(n_r, n_theta)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DomainSpec:
    """Holomorphic image ``psi(closed disc)``.

    ``moebius-image`` takes ``(a, b, c, d)`` with ``psi(w) = (a w + b)/(c w + d)``;
    ``polynomial-image`` takes ``(c0, c1, ...)`` with ``psi(w) = sum c_k w**k``.
    """

    kind: str = "unit-disc"
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind not in ("unit-disc", "moebius-image", "polynomial-image"):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "coefficients", tuple(complex(c) for c in self.coefficients))
        if self.kind == "moebius-image":
            if len(self.coefficients) != 4:
                raise ConfigurationError("moebius-image needs (a, b, c, d)")
            a, b, c, d = self.coefficients
            if abs(a * d - b * c) < 1e-14:
                raise GeometryError("degenerate Moebius map")
            if c != 0 and abs(d / c) <= 1 + 1e-9:
                raise GeometryError("Moebius pole inside the closed disc")
        if self.kind == "polynomial-image" and len(self.coefficients) < 2:
            raise ConfigurationError("polynomial-image needs at least (c0, c1)")

    @property
    def is_disc(self) -> bool:
        return self.kind == "unit-disc"

    def psi(self, w):
        w = np.asarray(w, dtype=complex)
        if self.kind == "unit-disc":
            return w.copy()
        if self.kind == "moebius-image":
            a, b, c, d = self.coefficients
            return (a * w + b) / (c * w + d)
        return np.polynomial.polynomial.polyval(w, self.coefficients)

    def dpsi(self, w):
        w = np.asarray(w, dtype=complex)
        if self.kind == "unit-disc":
            return np.ones_like(w)
        if self.kind == "moebius-image":
            a, b, c, d = self.coefficients
            return (a * d - b * c) / (c * w + d) ** 2
        dc = np.polynomial.polynomial.polyder(self.coefficients)
        return np.polynomial.polynomial.polyval(w, dc)

    def inverse(self, z, tol: float = 1e-13, max_iter: int = 60):
        """Preimage ``psi^{-1}(z)``; Newton iteration for polynomial images."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "unit-disc":
            return z.copy()
        if self.kind == "moebius-image":
            a, b, c, d = self.coefficients
            return (d * z - b) / (a - c * z)
        c0, c1 = self.coefficients[:2]
        w = (z - c0) / c1
        for _ in range(max_iter):
            step = (self.psi(w) - z) / self.dpsi(w)
            w = w - step
            if np.all(np.abs(step) < tol):
                break
        if np.any(np.abs(self.psi(w) - z) > 1e-9):
            raise GeometryError("Newton inversion of the domain map did not converge")
        return w

    def contains(self, z, margin: float = 0.0):
        try:
            w = self.inverse(z)
        except GeometryError:
            return np.zeros(np.shape(z), dtype=bool)
        return np.abs(w) <= 1 - margin

    def certify(self, n_samples: int) -> float:
        """Minimum of ``|psi'|`` on ``n_samples`` boundary points; raises if it vanishes.

        Also checks that ``psi'`` has no zeros inside (winding number zero) and that
        the boundary curve winds once around ``psi(0)``.
        """
        w = np.exp(1j * TWO_PI * np.arange(n_samples) / n_samples)
        dp = self.dpsi(w)
        m = float(np.abs(dp).min())
        if m <= 1e-12:
            raise GeometryError("psi' vanishes on the boundary")
        wind = np.round(np.sum(np.angle(np.roll(dp, -1) / dp)) / TWO_PI)
        z = self.psi(w) - self.psi(0.0)
        wind_z = np.round(np.sum(np.angle(np.roll(z, -1) / z)) / TWO_PI)
        if wind != 0 or wind_z != 1:
            raise GeometryError("domain map is not injective on the closed disc")
        return m


UNIT_DISC = DomainSpec()


@lru_cache(maxsize=32)
def _pullback(domain: DomainSpec, grid: PolarGrid):
    w = grid.nodes
    z = domain.psi(w)
    dp = domain.dpsi(w)
    return z, dp


# ---------------------------------------------------------------------------
# grid functions
# ---------------------------------------------------------------------------
class GridFunction:
    """Samples of a map ``domain -> C^n`` at the (pulled back) grid nodes.

    ``values`` has shape ``(n, n_r, n_theta)``.
    """

    def __init__(self, values, grid: PolarGrid, domain: DomainSpec = UNIT_DISC, p: float = 4.0):
        v = np.array(values, dtype=complex)
        if v.ndim == 2:
            v = v[None]
        if v.shape[1:] != grid.shape:
            raise ConfigurationError(f"values of shape {v.shape} do not fit grid {grid.shape}")
        self.values = v
        self.grid = grid
        self.domain = domain
        self.p = float(p)
        self._dz = None
        self._dzbar = None

    # construction helpers
    @classmethod
    def from_callable(cls, fn: Callable, grid: PolarGrid, domain: DomainSpec = UNIT_DISC, p: float = 4.0):
        z, _ = _pullback(domain, grid)
        vals = np.asarray(fn(z), dtype=complex)
        if vals.shape == z.shape:
            vals = vals[None]
        elif vals.ndim == 1:
            vals = np.broadcast_to(vals[:, None, None], (vals.size,) + z.shape)
        else:
            vals = np.broadcast_to(vals, vals.shape[:1] + z.shape)
        return cls(vals, grid, domain, p)

    @classmethod
    def constant(cls, c, grid: PolarGrid, domain: DomainSpec = UNIT_DISC, p: float = 4.0):
        c = np.atleast_1d(np.asarray(c, dtype=complex))
        return cls(np.broadcast_to(c[:, None, None], (c.size,) + grid.shape), grid, domain, p)

    def like(self, values) -> "GridFunction":
        return GridFunction(values, self.grid, self.domain, self.p)

    # geometry
    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return _pullback(self.domain, self.grid)[0]

    @property
    def jacobian(self) -> np.ndarray:
        return _pullback(self.domain, self.grid)[1]

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights * np.abs(self.jacobian) ** 2

    # derivatives
    @property
    def dzbar(self) -> np.ndarray:
        if self._dzbar is None:
            d = self.grid.spectral.d_zetabar(self.values)
            if not self.domain.is_disc:
                d = d / np.conj(self.jacobian)
            self._dzbar = d
        return self._dzbar

    @property
    def dz(self) -> np.ndarray:
        if self._dz is None:
            d = self.grid.spectral.d_zeta(self.values)
            if not self.domain.is_disc:
                d = d / self.jacobian
            self._dz = d
        return self._dz

    def project(self) -> "GridFunction":
        return self.like(self.grid.spectral.project(self.values))

    def evaluate(self, points) -> np.ndarray:
        """Spectral interpolation at physical points; shape ``(n, P)``."""
        w = self.domain.inverse(np.atleast_1d(np.asarray(points, dtype=complex)))
        return self.grid.spectral.evaluate(self.values, w)

    def at(self, point) -> np.ndarray:
        return self.evaluate([point])[:, 0]

    def boundary(self) -> np.ndarray:
        return boundary_restriction(self)

    def component(self, k: int) -> "GridFunction":
        return self.like(self.values[k : k + 1])

    def conj(self) -> "GridFunction":
        return self.like(np.conj(self.values))

    # arithmetic
    def _v(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid or other.domain != self.domain:
                raise ConfigurationError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.like(self.values + self._v(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.like(self.values - self._v(other))

    def __rsub__(self, other):
        return self.like(self._v(other) - self.values)

    def __mul__(self, other):
        return self.like(self.values * self._v(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.like(self.values / self._v(other))

    def __neg__(self):
        return self.like(-self.values)

    def __repr__(self):
        return f"GridFunction(n={self.n}, grid={self.grid.shape}, domain={self.domain.kind})"


def _check_p(p):
    if not p > 2:
        raise ConfigurationError(f"Sobolev exponent must exceed 2, got {p}")


def _lp(values, weights, p):
    mag = np.sqrt(np.sum(np.abs(values) ** 2, axis=0))
    return float(np.sum(weights * mag**p) ** (1.0 / p))


def lp_norm(f: GridFunction, p: float | None = None, mask=None) -> float:
    """Discrete L^p norm of ``|f|`` (Euclidean in C^n) over the domain."""
    p = f.p if p is None else p
    _check_p(p)
    w = f.weights if mask is None else f.weights * mask
    return _lp(f.values, w, p)


def sobolev_norm(f: GridFunction, p: float | None = None, mask=None) -> float:
    """``|f|_p + |f_zeta|_p + |f_zetabar|_p``."""
    p = f.p if p is None else p
    _check_p(p)
    w = f.weights if mask is None else f.weights * mask
    return _lp(f.values, w, p) + _lp(f.dz, w, p) + _lp(f.dzbar, w, p)


def boundary_restriction(f: GridFunction) -> np.ndarray:
    """Values on the ``r = 1`` ring, shape ``(n_theta, n)``."""
    return f.values[:, -1, :].T.copy()


def quadrature(f: GridFunction) -> np.ndarray:
    """Integral of each component over the domain."""
    return np.sum(f.values * f.weights, axis=(1, 2))


# ---------------------------------------------------------------------------
# good-pair decompositions
# ---------------------------------------------------------------------------
def smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1 (all derivatives vanish at both ends)."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 1e-300, 1 - 1e-16)
    f0 = np.where(x > 0, np.exp(-1 / xc), 0.0)
    f1 = np.where(x < 1, np.exp(-1 / (1 - xc)), 0.0)
    return f0 / (f0 + f1)


def _smooth_ramp(x, width):
    # 0 for x <= 0, x for x >= width, C-infinity in between
    return x * smoothstep(np.asarray(x) / width)


@dataclass
class Region:
    """Subset of the grid nodes (boolean mask over ``(n_r, n_theta)``)."""

    name: str
    mask: np.ndarray

    @property
    def size(self) -> int:
        return int(self.mask.sum())


@dataclass
class GoodPairDecomposition:
    arcs: list
    alpha: float
    grid: PolarGrid
    kappa: float
    delta0: Region
    deltas: list
    overlaps: list
    chi: GridFunction
    uncovered: float
    epsilon_arc: float
    checks: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.arcs)

    def distance(self, z, j: int | None = None):
        """Boundary-adapted distance to arc ``j`` (or to the union of arcs)."""
        if j is None:
            return np.min([arc_distance(z, a, self.kappa, self.alpha) for a in self.arcs], axis=0)
        return arc_distance(z, self.arcs[j], self.kappa, self.alpha)

    def chi_at(self, z):
        return smoothstep((self.distance(z) - 1.25 * self.alpha) / (0.5 * self.alpha))

    def seam_samples(self, j: int, count: int) -> np.ndarray:
        """``count`` points on the seam ``{d_j = alpha}`` (edge of Delta_0 facing arc j)."""
        a, b = self.arcs[j]
        th = np.linspace(a - 2 * self.alpha, b + 2 * self.alpha, 2 * count)
        tang = _smooth_ramp(np.maximum(np.maximum(a - th, th - b), 0.0), self.alpha)
        keep = tang <= self.alpha
        th = th[keep]
        rho = np.sqrt(self.alpha**2 - tang[keep] ** 2)
        idx = np.linspace(0, th.size - 1, count).round().astype(int)
        return ((1 - self.kappa * rho) * np.exp(1j * th))[idx]


def arc_distance(z, arc, kappa: float = 1.0, width: float = 0.0):
    """Distance from ``z`` to the arc in the coordinates ``(theta, (1-|z|)/kappa)``.

    For ``kappa = 1`` this agrees with the Euclidean distance to first order near
    the circle; ``kappa > 1`` stretches collars in the radial direction. A
    positive ``width`` rounds the angular excess past the arc ends so the
    function is smooth off the arc itself.
    """
    if width <= 0:
        width = 1e-12
    a, b = arc
    z = np.asarray(z, dtype=complex)
    t = np.mod(np.angle(z) - a, TWO_PI)
    L = b - a
    # signed angular excess past either end (smoothly clipped at zero)
    beyond = np.where(t <= L, 0.0, np.minimum(t - L, TWO_PI - t))
    tang = _smooth_ramp(beyond, width)
    rho = (1 - np.abs(z)) / kappa
    return np.hypot(tang, rho)


def _normalize_arcs(arcs):
    out = []
    for a, b in arcs:
        a, b = float(a), float(b)
        L = b - a
        if not 0 < L < TWO_PI:
            raise GeometryError(f"arc ({a}, {b}) must have length in (0, 2pi)")
        a0 = np.mod(a, TWO_PI)
        out.append((a0, a0 + L))
    return sorted(out)


def build_decomposition(
    arcs: Sequence, alpha: float, grid: PolarGrid, kappa: float = 1.0, epsilon_arc: float | None = None
) -> GoodPairDecomposition:
    """Collars ``Delta_j = {d_j < 2 alpha}`` around boundary arcs and ``Delta_0 = {d > alpha}``.

    ``chi`` equals 1 where ``d >= 1.75 alpha`` and 0 where ``d <= 1.25 alpha``.
    """
    if not alpha > 0:
        raise GeometryError("alpha must be positive")
    if kappa < 1:
        raise GeometryError("kappa must be >= 1")
    arcs = _normalize_arcs(arcs)
    m = len(arcs)
    if m == 0:
        raise GeometryError("need at least one arc")
    if 2 * alpha * kappa >= 0.5:
        raise GeometryError("collars reach the disc centre; decrease alpha or kappa")
    for j in range(m):
        for k in range(j + 1, m):
            (a1, b1), (a2, b2) = arcs[j], arcs[k]
            gap = min(np.mod(a2 - b1, TWO_PI), np.mod(a1 - b2, TWO_PI))
            overl = np.mod(a2 - a1, TWO_PI) < b1 - a1 or np.mod(a1 - a2, TWO_PI) < b2 - a2
            if overl or gap <= 6 * alpha:
                raise GeometryError(
                    f"arcs {j} and {k} are separated by {gap:.4g} rad <= 6*alpha = {6 * alpha:.4g}"
                )
    uncovered = TWO_PI - sum(b - a for a, b in arcs)
    if epsilon_arc is None:
        epsilon_arc = np.nextafter(uncovered, np.inf) if uncovered > 0 else 1e-300
    elif not uncovered < epsilon_arc:
        raise GeometryError(f"uncovered boundary measure {uncovered:.4g} is not below {epsilon_arc}")

    z = grid.nodes
    dj = np.array([arc_distance(z, a, kappa, alpha) for a in arcs])
    d = dj.min(axis=0)
    delta0 = Region("delta0", d > alpha)
    deltas = [Region(f"delta{j + 1}", dj[j] < 2 * alpha) for j in range(m)]
    overlaps = [Region(f"overlap{j + 1}", delta0.mask & deltas[j].mask) for j in range(m)]
    chi = GridFunction(smoothstep((d - 1.25 * alpha) / (0.5 * alpha)), grid)

    dec = GoodPairDecomposition(arcs, float(alpha), grid, float(kappa), delta0, deltas, overlaps,
                                chi, float(uncovered), float(epsilon_arc))
    dec.checks = check_decomposition(dec)
    return dec


def check_decomposition(dec: GoodPairDecomposition, samples: int | None = None) -> dict:
    """Node and sample checks of coverage, disjointness and cutoff placement."""
    grid = dec.grid
    m = dec.m
    a = dec.alpha
    # coverage on nodes
    cover = dec.delta0.mask.copy()
    for D in dec.deltas:
        cover |= D.mask
    if not cover.all():
        raise GeometryError("decomposition does not cover every grid node")
    # pairwise disjointness on nodes and on a fine sample near the boundary
    ns = samples or 4 * grid.n_theta
    th = TWO_PI * np.arange(ns) / ns
    rings = 1 - dec.kappa * a * np.linspace(0, 2.5, 11)
    pts = (rings[:, None] * np.exp(1j * th)[None, :]).ravel()
    all_pts = np.concatenate([grid.nodes.ravel(), pts])
    dj = np.array([dec.distance(all_pts, j) for j in range(m)])
    for j in range(m):
        for k in range(j + 1, m):
            if np.any((dj[j] < 2 * a) & (dj[k] < 2 * a)):
                raise GeometryError(f"collars {j + 1} and {k + 1} intersect")
    # overlaps nonempty; closures of D0\Dj and Dj\D0 separated
    separation = []
    for j in range(m):
        if not dec.overlaps[j].mask.any():
            raise GeometryError(f"overlap {j + 1} contains no grid node")
        inner = all_pts[dj[j] <= a]
        outer = all_pts[(dj[j] >= 2 * a) & (dj.min(axis=0) > a)]
        sep = np.inf
        if inner.size and outer.size:
            tree = cKDTree(np.c_[outer.real, outer.imag])
            sep = float(tree.query(np.c_[inner.real, inner.imag])[0].min())
        if not sep > 0:
            raise GeometryError(f"pair (Delta0, Delta{j + 1}) is not separated")
        separation.append(sep)
    chi = dec.chi.values[0].real
    d = np.min(dj[:, : grid.n_r * grid.n_theta], axis=0).reshape(grid.shape)
    if np.any(chi[d >= 1.75 * a] != 1.0) or np.any(chi[d <= 1.25 * a] != 0.0):
        raise GeometryError("cutoff is not locally constant near the pure regions")
    return {"coverage": True, "disjoint": True, "separation": separation,
            "uncovered": dec.uncovered, "epsilon_arc": dec.epsilon_arc}
