"""Linearization, right inverses and the frozen-inverse Newton iteration.

For a base map ``phi`` the linearized operator is

    D_phi(V) = V_zbar + A(phi) conj(V_z)
               + sum_j (dA/dz_j(phi) V_j + dA/dzbar_j(phi) conj(V_j)) conj(phi_z).

A right inverse is built from the Cauchy-Green operator ``CG_a`` (normalized
to vanish at ``a``) as ``Q = CG_a (D CG_a)^{-1}``, the inner inverse being a
GMRES solve on real-stacked vectors. Newton steps ``u <- u - Q F(u)`` reuse
the inverse of the starting point.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .dbar import dbar_residual
from .errors import ConfigurationError, DivergenceError, GateError, InverseError, RangeError
from .geometry import GridFunction, lp_norm, sobolev_norm
from .structures import ComplexMatrixField

log = logging.getLogger(__name__)

DEFAULT_PROBES = 64
NORM_PAIRING = "W^{1,p} -> L^p"


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------
def random_probes(like: GridFunction, count: int, rng: np.random.Generator, degree: int = 6,
                  normalize: str | None = None) -> list:
    """Random band-limited maps ``sum c_ab w^a conj(w)^b`` (``a + b <= degree``)."""
    w = like.grid.nodes
    pw = [w**a for a in range(degree + 1)]
    cw = [np.conj(x) for x in pw]
    out = []
    for _ in range(count):
        vals = np.zeros((like.n,) + w.shape, dtype=complex)
        for k in range(like.n):
            for a in range(degree + 1):
                for b in range(degree + 1 - a):
                    c = complex(rng.standard_normal(), rng.standard_normal()) / (1 + a + b)
                    vals[k] += c * pw[a] * cw[b]
        f = like.like(vals)
        if normalize == "lp":
            f = f / lp_norm(f)
        elif normalize == "sobolev":
            f = f / sobolev_norm(f)
        out.append(f)
    return out


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------
class LinearizedOperator:
    """``V -> D_phi(V)`` for fixed ``A`` and base point ``phi``."""

    def __init__(self, A: ComplexMatrixField, phi: GridFunction):
        if A.n != phi.n:
            raise ConfigurationError(f"structure has n={A.n} but map has n={phi.n}")
        A.check_range(phi.values)
        self.A = A
        self.phi = phi
        self.zero = A.zero
        if not self.zero:
            self.Aphi = A(phi.values)
            dA, dAb = A.partials(phi.values)
            cphz = np.conj(phi.dz)
            # T[j] = dA/dz_j(phi) conj(phi_z), S[j] = dA/dzbar_j(phi) conj(phi_z)
            self.T = np.einsum("jik...,k...->ji...", dA, cphz)
            self.S = np.einsum("jik...,k...->ji...", dAb, cphz)
            self.first_order_zero = not np.any(self.Aphi)
        else:
            self.first_order_zero = True

    def apply_values(self, V: np.ndarray) -> np.ndarray:
        f = self.phi.like(V)
        out = f.dzbar.copy()
        if self.zero:
            return out
        out += np.einsum("jk...,k...->j...", self.Aphi, np.conj(f.dz))
        out += np.einsum("ji...,j...->i...", self.T, V)
        out += np.einsum("ji...,j...->i...", self.S, np.conj(V))
        return out

    def __call__(self, V: GridFunction) -> GridFunction:
        return V.like(self.apply_values(V.values))

    apply = __call__


def linearize(A: ComplexMatrixField, phi: GridFunction) -> LinearizedOperator:
    return LinearizedOperator(A, phi)


def frechet_remainders(A: ComplexMatrixField, phi: GridFunction, V: GridFunction,
                       steps=(1e-2, 1e-3, 1e-4)) -> tuple:
    """``|F(phi + hV) - F(phi) - h D_phi V|_p`` for each step and the log-log slope."""
    D = LinearizedOperator(A, phi)
    F0 = dbar_residual(phi, A).values
    DV = D.apply_values(V.values)
    errs = []
    for h in steps:
        Fh = dbar_residual(phi + V * h, A).values
        errs.append(lp_norm(phi.like(Fh - F0 - h * DV)))
    errs = np.asarray(errs)
    if np.any(errs <= 0):
        return errs, float("inf")
    slope = float(np.polyfit(np.log(np.asarray(steps)), np.log(errs), 1)[0])
    return errs, slope


# ---------------------------------------------------------------------------
# right inverses
# ---------------------------------------------------------------------------
MAX_PINS = 4


def pin_points(a) -> tuple:
    """Normalization points as a tuple: one point or up to ``MAX_PINS`` distinct ones."""
    pts = (complex(a),) if np.ndim(a) == 0 else tuple(complex(x) for x in np.ravel(a))
    if not 1 <= len(pts) <= MAX_PINS:
        raise ConfigurationError(f"need 1 to {MAX_PINS} pin points, got {len(pts)}")
    if len(pts) > 1 and min(abs(x - y) for i, x in enumerate(pts) for y in pts[i + 1:]) < 1e-6:
        raise ConfigurationError("pin points must be distinct")
    return pts


class CauchyGreenInverse:
    """``g -> CG(g) - P``: exact right inverse of d/dzetabar vanishing at the pins.

    With one pin ``P`` is the constant ``CG(g)(a)``; with several it is the
    holomorphic polynomial of degree ``k - 1`` interpolating ``CG(g)`` at the
    ``k`` pins, so d/dzetabar is unaffected.
    """

    def __init__(self, like: GridFunction, a=0.0):
        self.like = like
        self.pins = pin_points(a)
        self.a = self.pins[0] if len(self.pins) == 1 else self.pins
        self.ws = like.domain.inverse(np.array(self.pins))
        if not np.all(np.abs(self.ws) < 1):
            raise ConfigurationError(f"normalization point {a} is not inside the domain")
        self.w = complex(self.ws[0])
        if len(self.pins) > 1:
            self._vinv = np.linalg.inv(np.vander(self.ws, increasing=True))
            self._powers = like.grid.nodes[None] ** np.arange(len(self.pins))[:, None, None]

    def apply_values(self, g: np.ndarray) -> np.ndarray:
        S = self.like.grid.spectral
        rhs = g if self.like.domain.is_disc else g * np.conj(self.like.jacobian)
        V = S.dbar_inverse(rhs)
        if len(self.pins) > 1:
            coeffs = S.evaluate(V, self.ws) @ self._vinv.T
            return V - np.einsum("...m,mrt->...rt", coeffs, self._powers)
        if self.w == 0:
            c = S.value_at_origin(V)
        else:
            c = S.evaluate(V, np.array([self.w]))[..., 0]
        return V - c[..., None, None]

    def __call__(self, g: GridFunction) -> GridFunction:
        return g.like(self.apply_values(g.values))


@dataclass
class RightInverse:
    D: LinearizedOperator
    a: object  # one pin or a tuple of pins
    base: object
    defect: float
    op_norm_estimate: float = float("nan")
    rtol: float = 1e-11
    stats: dict = field(default_factory=dict)
    pins: tuple = ()
    _kernel: tuple | None = None

    @property
    def phi(self):
        return self.D.phi

    def _inner(self, g: np.ndarray) -> np.ndarray:
        """Solve ``T w = g`` with ``T w = D(base(P w)) + (w - P w)``."""
        S = self.phi.grid.spectral
        shape = g.shape
        size = g.size

        def mv(x):
            w = (x[:size] + 1j * x[size:]).reshape(shape)
            Pw = S.project_cg(w)
            y = self.D.apply_values(self.base.apply_values(Pw)) + (w - Pw)
            y = y.ravel()
            return np.concatenate([y.real, y.imag])

        op = LinearOperator((2 * size, 2 * size), matvec=mv, dtype=float)
        b = np.concatenate([g.real.ravel(), g.imag.ravel()])
        nb = np.linalg.norm(b)
        if nb == 0:
            return np.zeros_like(g)
        counter = {"n": 0}

        def cb(_):
            counter["n"] += 1

        x, info = gmres(op, b, rtol=self.rtol, atol=0.0, restart=60, maxiter=20,
                        callback=cb, callback_type="pr_norm")
        self.stats["gmres_iterations"] = self.stats.get("gmres_iterations", 0) + counter["n"]
        if info != 0:
            warnings.warn(f"GMRES did not reach rtol={self.rtol} (info={info})", RuntimeWarning)
        w = (x[:size] + 1j * x[size:]).reshape(shape)
        return S.project_cg(w)

    def _apply0(self, g: np.ndarray) -> np.ndarray:
        if self.D.zero:
            return self.base.apply_values(g)
        return self.base.apply_values(self._inner(g))

    def _pin_kernel(self):
        """Kernel elements ``P - Q0 D P`` for ``P = (w - w0)^m e_i`` and ``i (w - w0)^m e_i``,
        with the real matrix of their values at the extra pins."""
        if self._kernel is None:
            like = self.phi
            ws = like.domain.inverse(np.array(self.pins))
            w = like.grid.nodes
            S = like.grid.spectral
            K = []
            for m in range(1, len(self.pins)):
                for i in range(like.n):
                    for unit in (1.0, 1j):
                        P = np.zeros((like.n,) + w.shape, dtype=complex)
                        P[i] = unit * (w - ws[0]) ** m
                        K.append(P - self._apply0(self.D.apply_values(P)))
            vals = [S.evaluate(k, ws[1:]).ravel() for k in K]
            M = np.array([np.concatenate([v.real, v.imag]) for v in vals]).T
            self._kernel = (np.array(K), ws, np.linalg.inv(M))
        return self._kernel

    def apply_values(self, g: np.ndarray) -> np.ndarray:
        x = self._apply0(g)
        if len(self.pins) > 1:
            K, ws, Minv = self._pin_kernel()
            v = self.phi.grid.spectral.evaluate(x, ws[1:]).ravel()
            c = Minv @ np.concatenate([v.real, v.imag])
            x = x - np.tensordot(c, K, axes=1)
        return x

    def __call__(self, g: GridFunction) -> GridFunction:
        return g.like(self.apply_values(g.values))

    apply = __call__


def _defect(D: LinearizedOperator, base, probes) -> float:
    worst = 0.0
    for g in probes:
        r = g.like(g.values - D.apply_values(base.apply_values(g.values)))
        worst = max(worst, lp_norm(r) / lp_norm(g))
    return worst


def estimate_op_norm(Q, probes) -> float:
    """Largest ratio ``|Q g|_{W^{1,p}} / |g|_p`` over the probes."""
    return max(sobolev_norm(Q(g)) / lp_norm(g) for g in probes)


def right_inverse(D: LinearizedOperator, a=0.0, base=None, probes: int = DEFAULT_PROBES, seed: int = 0,
                  strict: bool = True, threshold: float = 0.5) -> RightInverse:
    """Right inverse of ``D`` vanishing at ``a``.

    ``base`` defaults to the normalized Cauchy-Green operator. The defect
    ``|Id - D base|`` is probed; above ``threshold`` an :class:`InverseError` is
    raised (or only a warning when ``strict`` is false).
    """
    pins = pin_points(a)
    if base is None:
        base = CauchyGreenInverse(D.phi, pins[0])
    rng = np.random.default_rng(seed)
    pr = random_probes(D.phi, max(probes, 1), rng, normalize="lp")
    defect = 0.0 if D.zero else _defect(D, base, pr[: max(4, min(len(pr), 8))])
    if defect > threshold:
        msg = f"|Id - D base| estimated at {defect:.3g} > {threshold}"
        if strict:
            raise InverseError(msg, defect=defect)
        warnings.warn(msg + "; Krylov solve may converge slowly", RuntimeWarning)
    Q = RightInverse(D, pins[0] if len(pins) == 1 else pins, base, defect, pins=pins)
    if probes > 0:
        Q.op_norm_estimate = estimate_op_norm(Q, pr[:probes])
        Q.stats["probes"] = probes
    return Q


# ---------------------------------------------------------------------------
# LQJ diagnostics
# ---------------------------------------------------------------------------
@dataclass
class LQJReport:
    L: float
    Q: float
    rho: float
    C: float
    sample_size: int
    pairs: int
    norm: str = NORM_PAIRING

    @classmethod
    def from_constants(cls, L: float, Q: float, sample_size: int = 0, pairs: int = 0) -> "LQJReport":
        rho = 1 / (4 * Q) if L == 0 else min(1 / (4 * Q), 1 / (8 * Q * Q * L))
        return cls(float(L), float(Q), float(rho), float(2 * Q), sample_size, pairs)

    def as_dict(self) -> dict:
        return {"L": self.L, "Q": self.Q, "rho": self.rho, "C": self.C, "sample_size": self.sample_size,
                "pairs": self.pairs, "norm": self.norm}


def estimate_lipschitz(phi: GridFunction, A: ComplexMatrixField, rng, pairs: int = 4, probes: int = 8,
                       delta_norm: float = 0.5) -> float:
    """Probed ``|D_phi - D_phi~| / |phi - phi~|`` with ``|phi - phi~|_{W^{1,p}} = delta_norm`` (halved while phi~ leaves the chart region)."""
    if A.zero:
        return 0.0
    D0 = LinearizedOperator(A, phi)
    Vs = random_probes(phi, probes, rng, normalize="sobolev")
    best = 0.0
    for delta in random_probes(phi, pairs, rng, normalize="sobolev"):
        # shrink the perturbation until phi + delta stays in the chart region
        size = delta_norm
        for _ in range(8):
            try:
                D1 = LinearizedOperator(A, phi + delta * size)
                break
            except RangeError:
                size /= 2
        else:
            continue
        for V in Vs:
            diff = phi.like(D0.apply_values(V.values) - D1.apply_values(V.values))
            best = max(best, lp_norm(diff) / size)
    return best


def estimate_lqj(family, A: ComplexMatrixField, a=0.0, probes: int = DEFAULT_PROBES, pairs: int = 4,
                 seed: int = 0, inverses: list | None = None) -> LQJReport:
    """Uniform constants ``(L, Q)`` over a family of base maps, with ``rho`` and ``C``."""
    family = list(family)
    if not family:
        raise ConfigurationError("family must be nonempty")
    Q = 0.0
    L = 0.0
    for i, phi in enumerate(family):
        Qi = right_inverse(LinearizedOperator(A, phi), a, probes=probes, seed=seed)
        if inverses is not None:
            inverses.append(Qi)
        Q = max(Q, Qi.op_norm_estimate)
        L = max(L, estimate_lipschitz(phi, A, np.random.default_rng(seed + 1), pairs=pairs,
                                      probes=max(2, min(probes, 8))))
    return LQJReport.from_constants(L, Q, sample_size=probes * len(family), pairs=pairs * len(family))


# ---------------------------------------------------------------------------
# Newton iteration
# ---------------------------------------------------------------------------
@dataclass
class NewtonTrace:
    residuals: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged: bool = False
    final_residual: float = float("nan")
    pinned_value: list = field(default_factory=list)
    pin_error: float = float("nan")
    iterations: int = 0
    initial_residual: float = float("nan")
    lqj: dict = field(default_factory=dict)
    gate_passed: bool = False
    forced: bool = False
    deviation: float = float("nan")
    certificate_bound: float = float("nan")
    certificate_holds: bool = False
    frozen: bool = True
    gate_enforced: bool = True
    projection_error: float = 0.0

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["pinned_value"] = [[float(np.real(v)), float(np.imag(v))] for v in self.pinned_value]
        return d

    def records(self) -> list:
        """One record per iteration (for JSON lines)."""
        out = []
        for k, r in enumerate(self.residuals):
            out.append({"iteration": k, "residual": r, "step": self.steps[k - 1] if k else 0.0})
        return out


def newton_solve(phi: GridFunction, A: ComplexMatrixField, a=0.0, tol: float = 1e-9, max_iter: int = 30,
                 force: bool = False, lqj: LQJReport | None = None, Q: RightInverse | None = None,
                 probes: int = DEFAULT_PROBES, seed: int = 0, frozen: bool = True):
    """Frozen-inverse Newton iteration ``u <- u - Q_phi F(u)`` pinned at ``a``.

    ``a`` is one point or up to four; every step vanishes there, so ``u`` keeps
    the values of the projected start at the pins. The gate
    ``|F(phi)|_p < rho`` is enforced unless ``force``; returns ``(u, trace)``.
    """
    pins = pin_points(a)
    a = pins[0] if len(pins) == 1 else pins
    trace = NewtonTrace(forced=force, frozen=frozen)
    # work with the grid polynomial of phi; nodal data beyond the resolved degree
    # would otherwise leak into the products A(u) conj(u_z) at every step
    phi_nodes = phi
    phi = phi.project()
    trace.projection_error = sobolev_norm(phi - phi_nodes) if phi.grid.n_r * phi.grid.n_theta else 0.0
    F0 = dbar_residual(phi, A)
    r0 = lp_norm(F0)
    trace.initial_residual = r0
    if Q is None:
        Q = right_inverse(LinearizedOperator(A, phi), a, probes=probes, seed=seed)
    if lqj is None:
        L = estimate_lipschitz(phi, A, np.random.default_rng(seed + 1), probes=max(2, min(probes, 8)))
        lqj = LQJReport.from_constants(L, Q.op_norm_estimate, sample_size=probes, pairs=4)
    trace.lqj = lqj.as_dict()
    trace.gate_passed = bool(r0 < lqj.rho)
    # with constant A the residual is affine in u and the iteration is a linear solve
    trace.gate_enforced = not A.constant
    if not trace.gate_passed and trace.gate_enforced and not force:
        raise GateError(f"residual {r0:.4g} is not below rho = {lqj.rho:.4g}", rho=lqj.rho, residual=r0,
                        stage="newton")
    pin0 = phi.evaluate(pins)
    u = phi
    F = F0
    trace.residuals.append(r0)
    increases = 0
    stalled = 0
    for k in range(max_iter):
        if trace.residuals[-1] < tol:
            break
        if not frozen and k > 0:
            Q = right_inverse(LinearizedOperator(A, u), a, probes=0, seed=seed, strict=False)
        step = Q(F)
        u = u - step
        F = dbar_residual(u, A)
        r = lp_norm(F)
        trace.steps.append(sobolev_norm(step))
        trace.residuals.append(r)
        trace.iterations = k + 1
        log.debug("newton %d: residual %.3e", k + 1, r)
        if not np.isfinite(r):
            raise DivergenceError("non-finite residual", trace=trace)
        prev = trace.residuals[-2]
        if r > prev * (1 + 1e-3):
            increases += 1
            if increases >= 2:
                trace.final_residual = r
                raise DivergenceError(f"residual grew twice in a row (now {r:.3g})", trace=trace)
        else:
            increases = 0
        # discretization floor: no progress for three steps
        stalled = stalled + 1 if r > 0.9 * prev else 0
        if stalled >= 3:
            break
    trace.final_residual = trace.residuals[-1]
    trace.converged = bool(trace.final_residual < tol)
    pin = u.evaluate(pins)
    trace.pinned_value = list(pin[:, 0])
    trace.pin_error = float(np.abs(pin - pin0).max())
    trace.deviation = sobolev_norm(u - phi_nodes)
    trace.certificate_bound = lqj.C * r0
    trace.certificate_holds = bool(trace.deviation <= trace.certificate_bound * 1.05 + tol)
    return u, trace
