"""Almost complex structures, their complex matrix representation, and charts.

Real coordinates are interleaved: ``x = (Re z1, Im z1, Re z2, ...)``. All
evaluators are vectorized: complex points have shape ``(n, *S)``, complex
matrices ``(n, n, *S)``, real matrices ``(2n, 2n, *S)``.

A structure ``J`` is encoded by the complex matrix ``A`` for which
``w -> A(z) conj(w)`` equals ``(J_st + J)^{-1} (J - J_st)`` as a real-linear
map; J-holomorphic discs then solve ``u_zbar + A(u) conj(u_z) = 0``.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ChartError, ConfigurationError, RangeError, StructureError

FD_STEP = 1e-5


def j_standard(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    for k in range(n):
        J[2 * k, 2 * k + 1] = -1.0
        J[2 * k + 1, 2 * k] = 1.0
    return J


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    x = np.empty((2 * z.shape[0],) + z.shape[1:])
    x[0::2] = z.real
    x[1::2] = z.imag
    return x


def to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def _last(m):
    # (a, b, *S) -> (*S, a, b)
    return np.moveaxis(np.moveaxis(m, 0, -1), 0, -1)


def _first(m):
    # (*S, a, b) -> (a, b, *S)
    return np.moveaxis(np.moveaxis(m, -1, 0), -1, 0)


def real_of_complex_matrix(A: np.ndarray) -> np.ndarray:
    """Real ``2n x 2n`` block form of a complex-linear map."""
    n = A.shape[0]
    M = np.empty((2 * n, 2 * n) + A.shape[2:])
    M[0::2, 0::2] = A.real
    M[0::2, 1::2] = -A.imag
    M[1::2, 0::2] = A.imag
    M[1::2, 1::2] = A.real
    return M


def _conj_matrix(n):
    return np.diag(np.tile([1.0, -1.0], n))


# ---------------------------------------------------------------------------
class AlmostComplexStructure:
    """Real matrix field ``x -> J(x)`` on R^{2n}."""

    def __init__(self, n: int, fn: Callable, catalog_id: str | None = None, h: float = FD_STEP):
        self.n = int(n)
        self.fn = fn
        self.catalog_id = catalog_id
        self.h = h

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        J = np.asarray(self.fn(x), dtype=float)
        if J.shape[:2] != (2 * self.n, 2 * self.n):
            raise StructureError(f"structure returned shape {J.shape}")
        return np.broadcast_to(J, (2 * self.n, 2 * self.n) + x.shape[1:])

    def at_complex(self, z) -> np.ndarray:
        return self(to_real(z))

    def defects(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(|J^2 + I|_F, |det(J + J_st)|)`` per point."""
        J = _last(self(x))
        I = np.eye(2 * self.n)
        sq = np.linalg.norm(J @ J + I, axis=(-2, -1))
        det = np.abs(np.linalg.det(J + j_standard(self.n)))
        return sq, det

    def check(self, x, tol: float = 1e-8) -> None:
        sq, det = self.defects(x)
        if np.any(sq > tol):
            raise StructureError(f"J^2 != -I (defect {sq.max():.3g})")
        if np.any(det <= 1e-10):
            raise StructureError("det(J + J_st) vanishes")

    def derivative(self, x) -> np.ndarray:
        """Central differences ``dJ/dx_k``, shape ``(2n, 2n, 2n, *S)`` (k first)."""
        x = np.asarray(x, dtype=float)
        out = []
        for k in range(2 * self.n):
            e = np.zeros((2 * self.n,) + (1,) * (x.ndim - 1))
            e[k] = self.h
            out.append((self(x + e) - self(x - e)) / (2 * self.h))
        return np.array(out)


class ComplexMatrixField:
    """Complex matrix field ``z -> A(z)`` with first-order Wirtinger partials.

    ``partials`` returns ``(dA/dz_j, dA/dzbar_j)`` stacked along a leading axis
    ``j``. When no closed form is supplied they are computed by central finite
    differences with step ``h``.
    """

    def __init__(self, n: int, fn: Callable, partials: Callable | None = None, h: float = FD_STEP,
                 catalog_id: str | None = None, zero: bool = False, region: Callable | None = None,
                 structure: AlmostComplexStructure | None = None, constant: bool = False):
        self.n = int(n)
        self.constant = constant or zero
        self.fn = fn
        self._partials = partials
        self.h = h
        self.catalog_id = catalog_id
        self.zero = zero
        self.region = region
        self.last_column_zero = False
        self._structure = structure

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        A = np.asarray(self.fn(z), dtype=complex)
        return np.broadcast_to(A, (self.n, self.n) + z.shape[1:])

    def check_range(self, z) -> None:
        if self.region is None:
            return
        ok = np.asarray(self.region(np.asarray(z)), dtype=bool)
        if not ok.all():
            bad = np.unravel_index(np.argmin(ok), ok.shape)
            raise RangeError(f"map leaves the chart region at node {tuple(int(i) for i in bad)}",
                             node=tuple(int(i) for i in bad))

    def partials(self, z):
        z = np.asarray(z, dtype=complex)
        S = z.shape[1:]
        if self.zero:
            zz = np.zeros((self.n, self.n, self.n) + S, dtype=complex)
            return zz, zz
        if self._partials is not None:
            dz, dzb = self._partials(z)
            shp = (self.n, self.n, self.n) + S
            return np.broadcast_to(dz, shp), np.broadcast_to(dzb, shp)
        dz, dzb = [], []
        for j in range(self.n):
            e = np.zeros((self.n,) + (1,) * len(S), dtype=complex)
            e[j] = self.h
            ax = (self(z + e) - self(z - e)) / (2 * self.h)
            ay = (self(z + 1j * e) - self(z - 1j * e)) / (2 * self.h)
            dz.append((ax - 1j * ay) / 2)
            dzb.append((ax + 1j * ay) / 2)
        return np.array(dz), np.array(dzb)

    def structure(self) -> AlmostComplexStructure:
        """The real structure ``J = J_st (I + B)(I - B)^{-1}`` encoded by ``A``."""
        if self._structure is None:
            self._structure = structure_from_matrix(self)
        return self._structure

    def apply_conj(self, z, w) -> np.ndarray:
        """``A(z) conj(w)`` for vector fields ``w`` of shape ``(n, *S)``."""
        if self.zero:
            return np.zeros_like(np.asarray(w, dtype=complex))
        return np.einsum("jk...,k...->j...", self(z), np.conj(w))


def structure_from_matrix(A: ComplexMatrixField) -> AlmostComplexStructure:
    n = A.n
    Jst = j_standard(n)
    C = _conj_matrix(n)

    def fn(x):
        Mr = _last(real_of_complex_matrix(A(to_complex(x))))
        B = Mr @ C
        I = np.eye(2 * n)
        J = Jst @ (I + B) @ np.linalg.inv(I - B)
        return _first(J)

    return AlmostComplexStructure(n, fn, catalog_id=A.catalog_id)


def matrix_of_structure(J: AlmostComplexStructure, z, strict: float = 1e-6):
    """Pointwise extraction of ``A`` from ``J``; also returns the linearity defect."""
    n = J.n
    x = to_real(z)
    Jm = _last(J(x))
    Jst = j_standard(n)
    B = np.linalg.solve(Jst + Jm, Jm - Jst)
    M = B @ _conj_matrix(n)
    defect = np.linalg.norm(M @ Jst - Jst @ M, axis=(-2, -1))
    if np.any(defect > strict):
        raise StructureError(f"extracted map is not complex linear (defect {defect.max():.3g})")
    M = _first(M)
    A = M[0::2, 0::2] + 1j * M[1::2, 0::2]
    return A, defect


def complex_matrix_from_J(J: AlmostComplexStructure, h: float = FD_STEP) -> ComplexMatrixField:
    """Complex matrix field of ``J`` (extraction per point, finite-difference partials)."""

    def fn(z):
        return matrix_of_structure(J, z)[0]

    return ComplexMatrixField(J.n, fn, h=h, catalog_id=J.catalog_id, structure=J)


def validate_normalized_chart(A: ComplexMatrixField, samples) -> bool:
    """True iff the last column of ``A`` is below 1e-10 on ``samples`` (shape ``(n, P)``)."""
    if A.zero:
        ok = True
    else:
        ok = bool(np.all(np.abs(A(samples)[:, -1]) < 1e-10))
    A.last_column_zero = ok
    return ok


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------
def standard(n: int = 1) -> ComplexMatrixField:
    def fn(z):
        return np.zeros((n, n) + np.shape(z)[1:], dtype=complex)

    A = ComplexMatrixField(n, fn, catalog_id="standard", zero=True)
    Jm = j_standard(n)
    A._structure = AlmostComplexStructure(n, lambda x: np.broadcast_to(
        Jm.reshape(Jm.shape + (1,) * (x.ndim - 1)), Jm.shape + x.shape[1:]), catalog_id="standard")
    return A


def beltrami(lam: float) -> ComplexMatrixField:
    """Constant structure ``J(x, y) = (-lam y, x / lam)`` on C."""
    if lam <= 0:
        raise ConfigurationError("beltrami parameter must be positive")
    Jm = np.array([[0.0, -lam], [1.0 / lam, 0.0]])
    J = AlmostComplexStructure(1, lambda x: np.broadcast_to(
        Jm.reshape(2, 2, *([1] * (x.ndim - 1))), (2, 2) + x.shape[1:]), catalog_id=f"beltrami({lam})")
    A = matrix_of_structure(J, np.zeros((1, 1)))[0][:, :, 0]
    mu = complex(A[0, 0])

    def fn(z):
        return np.full((1, 1) + np.shape(z)[1:], mu)

    def part(z):
        zz = np.zeros((1, 1, 1) + np.shape(z)[1:], dtype=complex)
        return zz, zz

    return ComplexMatrixField(1, fn, part, catalog_id=J.catalog_id, structure=J, constant=True)


def constant_beltrami(mu: complex) -> ComplexMatrixField:
    mu = complex(mu)
    if abs(mu) >= 1:
        raise ConfigurationError("|mu| must be < 1")

    def fn(z):
        return np.full((1, 1) + np.shape(z)[1:], mu)

    def part(z):
        zz = np.zeros((1, 1, 1) + np.shape(z)[1:], dtype=complex)
        return zz, zz

    return ComplexMatrixField(1, fn, part, catalog_id=f"beltrami-const({mu})", constant=True)


def beltrami_field(mu: Callable | None = None, eps: float = 0.3) -> ComplexMatrixField:
    """Variable coefficient on C; default ``mu(z) = eps (z + conj(z)^2 / 2)``."""
    if mu is None:
        def fn(z):
            w = z[0]
            return (eps * (w + 0.5 * np.conj(w) ** 2))[None, None]

        def part(z):
            w = z[0]
            return (np.broadcast_to(eps + 0j, w.shape)[None, None, None],
                    (eps * np.conj(w))[None, None, None])

        return ComplexMatrixField(1, fn, part, catalog_id=f"beltrami-field({eps})",
                                  region=lambda z: np.abs(z[0]) < 1.2)

    def fn(z):
        return np.asarray(mu(z[0]), dtype=complex)[None, None] * np.ones((1, 1) + np.shape(z)[1:])

    return ComplexMatrixField(1, fn, catalog_id="beltrami-field")


def rh_model(eps: float, n: int = 2) -> ComplexMatrixField:
    """``A = eps z_n E_11``: vanishing last column, zero along ``(zeta, 0, ..., 0)``."""
    if n not in (2, 3):
        raise ConfigurationError("rh-model exists for n = 2 and n = 3")

    def fn(z):
        A = np.zeros((n, n) + np.shape(z)[1:], dtype=complex)
        A[0, 0] = eps * z[n - 1]
        return A

    def part(z):
        S = np.shape(z)[1:]
        dz = np.zeros((n, n, n) + S, dtype=complex)
        dz[n - 1, 0, 0] = eps
        return dz, np.zeros_like(dz)

    bound = 0.9 / max(abs(eps), 1e-300)
    return ComplexMatrixField(n, fn, part, catalog_id=f"rh-model({eps})",
                              region=lambda z: np.abs(z[n - 1]) < bound)


def _bump_profile(s):
    inside = s < 1
    ss = np.where(inside, s, 0.0)
    b = np.where(inside, np.exp(1 - 1 / (1 - ss)), 0.0)
    db = np.where(inside, -b / (1 - ss) ** 2, 0.0)
    return b, db


def bump(eps: float, z0=0.0, rho: float = 2.0, n: int = 2) -> ComplexMatrixField:
    """Compactly supported perturbation ``A = eps beta(|z - z0|^2/rho^2) z_n E_11``.

    For ``n = 1`` the coefficient is the scalar ``eps beta``.
    """
    z0 = np.broadcast_to(np.asarray(z0, dtype=complex), (n,)).copy()

    def parts(z):
        d = z - z0.reshape((n,) + (1,) * (z.ndim - 1))
        s = np.sum(np.abs(d) ** 2, axis=0) / rho**2
        b, db = _bump_profile(s)
        return d, b, db

    def fn(z):
        z = np.asarray(z, dtype=complex)
        _, b, _ = parts(z)
        A = np.zeros((n, n) + z.shape[1:], dtype=complex)
        A[0, 0] = eps * b * (z[n - 1] if n > 1 else 1.0)
        return A

    def part(z):
        z = np.asarray(z, dtype=complex)
        d, b, db = parts(z)
        dz = np.zeros((n, n, n) + z.shape[1:], dtype=complex)
        dzb = np.zeros_like(dz)
        tail = z[n - 1] if n > 1 else 1.0
        for j in range(n):
            dz[j, 0, 0] = eps * db * np.conj(d[j]) / rho**2 * tail
            dzb[j, 0, 0] = eps * db * d[j] / rho**2 * tail
        if n > 1:
            dz[n - 1, 0, 0] += eps * b
        return dz, dzb

    return ComplexMatrixField(n, fn, part, catalog_id=f"bump({eps})")


def catalog(name: str, n: int | None = None, **params) -> ComplexMatrixField:
    """Build a catalog structure by id."""
    if name == "standard":
        return standard(n or 1)
    if name == "beltrami":
        return beltrami(float(params.get("lam", params.get("lambda", 2.0))))
    if name == "beltrami-field":
        return beltrami_field(params.get("mu"), float(params.get("eps", 0.3)))
    if name == "rh-model":
        return rh_model(float(params.get("eps", 0.1)), n or 2)
    if name == "bump":
        return bump(float(params.get("eps", 0.05)), params.get("z0", 0.0), float(params.get("rho", 2.0)), n or 2)
    raise ConfigurationError(f"unknown catalog structure {name!r}")


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------
class ChartTransition:
    """Smooth map ``Psi`` between open subsets of C^n with its inverse."""

    def __init__(self, n: int, forward: Callable, inverse: Callable, name: str = "chart",
                 domain: Callable | None = None, h: float = 1e-6, holomorphic: bool = False):
        self.n = n
        self.forward = forward
        self.inverse = inverse
        self.name = name
        self.domain = domain
        self.h = h
        self.holomorphic = holomorphic

    def __call__(self, z):
        return self.forward(np.asarray(z, dtype=complex))

    def inverted(self) -> "ChartTransition":
        return ChartTransition(self.n, self.inverse, self.forward, name=f"inv({self.name})", h=self.h,
                               holomorphic=self.holomorphic)

    def jacobian(self, z) -> np.ndarray:
        """Real Jacobian ``(2n, 2n, *S)`` by central differences."""
        x = to_real(z)
        cols = []
        for k in range(2 * self.n):
            e = np.zeros((2 * self.n,) + (1,) * (x.ndim - 1))
            e[k] = self.h
            fp = to_real(self.forward(to_complex(x + e)))
            fm = to_real(self.forward(to_complex(x - e)))
            cols.append((fp - fm) / (2 * self.h))
        return np.stack(cols, axis=1)

    def roundtrip_error(self, samples) -> float:
        p = np.asarray(samples, dtype=complex)
        return float(np.abs(self.forward(self.inverse(p)) - p).max())


def identity_chart(n: int) -> ChartTransition:
    return ChartTransition(n, lambda z: np.array(z, dtype=complex), lambda z: np.array(z, dtype=complex),
                           name="identity", holomorphic=True)


def affine_chart(M, b) -> ChartTransition:
    """Complex affine map ``z -> M z + b``."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    b = np.asarray(b, dtype=complex).ravel()
    n = M.shape[0]
    Mi = np.linalg.inv(M)

    def fwd(z):
        return np.einsum("jk,k...->j...", M, z) + b.reshape((n,) + (1,) * (np.ndim(z) - 1))

    def inv(z):
        return np.einsum("jk,k...->j...", Mi, z - b.reshape((n,) + (1,) * (np.ndim(z) - 1)))

    return ChartTransition(n, fwd, inv, name="affine", holomorphic=True)


def translation_chart(b) -> ChartTransition:
    b = np.asarray(b, dtype=complex).ravel()
    return affine_chart(np.eye(b.size), b)


def shear_chart(n: int, s: float) -> ChartTransition:
    """Non-holomorphic ``z -> z + s conj(z_1) e_1`` (inverse in closed form)."""
    if abs(s) >= 1:
        raise ChartError("shear must satisfy |s| < 1")

    def fwd(z):
        out = np.array(z, dtype=complex)
        out[0] = z[0] + s * np.conj(z[0])
        return out

    def inv(w):
        out = np.array(w, dtype=complex)
        out[0] = (w[0] - s * np.conj(w[0])) / (1 - s * s)
        return out

    return ChartTransition(n, fwd, inv, name=f"shear({s})")


def pushforward_structure(J: AlmostComplexStructure, Psi: ChartTransition) -> AlmostComplexStructure:
    """``p -> dPsi(q) J(q) dPsi(q)^{-1}`` with ``q = Psi^{-1}(p)``."""
    n = J.n

    def fn(x):
        q = Psi.inverse(to_complex(x))
        D = _last(Psi.jacobian(q))
        cond = np.linalg.cond(D)
        if np.any(cond > 1e10):
            raise ChartError(f"chart Jacobian is ill-conditioned (cond {cond.max():.3g})")
        Jq = _last(J(to_real(q)))
        return _first(D @ Jq @ np.linalg.inv(D))

    return AlmostComplexStructure(n, fn, catalog_id=f"push({J.catalog_id},{Psi.name})")


def pullback_matrix_field(A0: ComplexMatrixField, Psi: ChartTransition) -> ComplexMatrixField:
    """Matrix field on the source of ``Psi`` whose discs map to ``A0``-discs under ``Psi``.

    Complex affine charts use the exact rule ``A(v) = M^{-1} A0(Psi v) conj(M)``; other
    charts go through the real structure.
    """
    if A0.zero and Psi.holomorphic:
        return standard(A0.n)
    if Psi.name in ("identity",):
        return A0
    if Psi.holomorphic and Psi.name == "affine":
        z0 = np.zeros((A0.n, 1), dtype=complex)
        b = Psi.forward(z0)[:, 0]
        M = np.stack([Psi.forward(np.eye(A0.n, dtype=complex)[:, [k]])[:, 0] - b for k in range(A0.n)], axis=1)
        Mi = np.linalg.inv(M)
        Mc = np.conj(M)

        def fn(v):
            A = A0(Psi.forward(v))
            return np.einsum("ij,jk...,kl->il...", Mi, A, Mc)

        region = None
        if A0.region is not None:
            region = lambda v: A0.region(Psi.forward(v))
        return ComplexMatrixField(A0.n, fn, catalog_id=f"pull({A0.catalog_id})", region=region)
    J = pushforward_structure(A0.structure(), Psi.inverted())
    return complex_matrix_from_J(J)
