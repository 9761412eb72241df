"""Spectral machinery on the polar grid of the closed unit disc.

Each angular Fourier mode ``k`` of a function on the disc is expanded as
``r**|k| * P_n(2 r**2 - 1)`` with ``P_n`` the Jacobi polynomials
``P_n^{(0, |k|)}``. This is the regular (Zernike-type) structure of smooth
functions at the origin, so every monomial ``zeta**a * conj(zeta)**b`` with
``a + b <= degree`` is represented exactly.

The Wirtinger derivatives and a right inverse of ``d/dzetabar`` act
mode-by-mode in closed form on this basis; the per-mode matrices are built
once per grid shape and cached.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def jacobi_table(nmax: int, a: float, b: float, x: np.ndarray) -> np.ndarray:
    """Values of ``P_n^{(a,b)}(x)`` for ``n = 0 .. nmax-1``; shape ``(nmax, x.size)``."""
    x = np.asarray(x, dtype=float).ravel()
    out = np.zeros((max(nmax, 1), x.size))
    out[0] = 1.0
    if nmax > 1:
        out[1] = (a + 1) + (a + b + 2) * (x - 1) / 2
    for n in range(2, nmax):
        c = 2 * n + a + b
        a1 = 2 * n * (n + a + b) * (c - 2)
        a2 = (c - 1) * (c * (c - 2) * x + a * a - b * b)
        a3 = 2 * (n + a - 1) * (n + b - 1) * c
        out[n] = (a2 * out[n - 1] - a3 * out[n - 2]) / a1
    return out[:nmax]


def _shifted(nmax, a, b, x):
    # P_{n-1}^{(a,b)} for n = 0..nmax-1 (row 0 is zero)
    out = np.zeros((nmax, np.size(x)))
    if nmax > 1:
        out[1:] = jacobi_table(nmax - 1, a, b, x)
    return out


def basis_values(k: int, nk: int, r: np.ndarray) -> np.ndarray:
    """Unscaled basis ``r**|k| P_n^{(0,|k|)}(2r^2-1)``, shape ``(nk, r.size)``."""
    b = abs(k)
    r = np.asarray(r, dtype=float).ravel()
    return (r ** b)[None, :] * jacobi_table(nk, 0, b, 2 * r * r - 1)


def _dbar_values(k, nk, r):
    # d/dzetabar of mode k, returned as radial profile of mode k+1
    b = abs(k)
    t = r * r
    x = 2 * t - 1
    n = np.arange(nk)[:, None]
    dP = (n + b + 1) * _shifted(nk, 1, b + 1, x)  # dP/dt
    if k >= 0:
        return (r ** (k + 1))[None, :] * dP
    q = -k
    P = jacobi_table(nk, 0, b, x)
    return (r ** (q - 1))[None, :] * (q * P + t[None, :] * dP)


def _dz_values(k, nk, r):
    # d/dzeta of mode k, returned as radial profile of mode k-1
    b = abs(k)
    t = r * r
    x = 2 * t - 1
    n = np.arange(nk)[:, None]
    dP = (n + b + 1) * _shifted(nk, 1, b + 1, x)
    if k <= 0:
        return (r ** (b + 1))[None, :] * dP
    P = jacobi_table(nk, 0, b, x)
    return (r ** (k - 1))[None, :] * (k * P + t[None, :] * dP)


def _cg_values(m, nk, r):
    """Antiderivative in zetabar of mode m, as radial profile of mode m-1.

    For ``m - 1 >= 0`` the holomorphic freedom is fixed by integrating in from
    the boundary, for ``m - 1 < 0`` by integrating out from the origin; both
    choices keep the kernels bounded.
    """
    k = m - 1
    t = r * r
    x = 2 * t - 1
    n = np.arange(nk)[:, None]
    if k >= 0:
        # g = r^(k+1) P_n^{(0,k+1)};  V = -r^k (1-t)/(n+1) P_n^{(1,k)}
        P1 = jacobi_table(nk, 1, k, x)
        return -(r ** k)[None, :] * (1 - t)[None, :] / (n + 1) * P1
    q = -k
    # g = r^(q-1) P_n^{(0,q-1)};  V = -(1/n)(1-t) r^q P_{n-1}^{(1,q)}, n >= 1
    out = np.empty((nk, r.size))
    out[0] = r ** q / q
    if nk > 1:
        P1 = jacobi_table(nk - 1, 1, q, x)
        out[1:] = -(1 - t)[None, :] * (r ** q)[None, :] * P1 / np.arange(1, nk)[:, None]
    return out


def _weighted_fit(B: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares fit matrix for the rows of ``B`` as basis.

    The basis is orthogonal for the Gauss part of ``w`` up to the boundary
    ring, so the Gram matrix is well conditioned and the normal equations are
    about two digits more accurate than an SVD pseudo-inverse here.
    """
    BW = B * w[None, :]
    return cho_solve(cho_factor(BW @ B.T), BW)


class DiscSpectral:
    """Per-mode operator matrices for a polar grid of shape ``(n_r, n_theta)``.

    Radial rings are Gauss-Legendre nodes in ``t = r**2`` plus the boundary
    ring ``r = 1``. Matrices are stored padded to a common width so they can be
    applied with one batched ``matmul``.
    """

    def __init__(self, n_r: int, n_theta: int):
        self.n_r = n_r
        self.n_theta = n_theta
        xg, wg = np.polynomial.legendre.leggauss(n_r - 1)
        self.t = np.concatenate([(1 + xg) / 2, [1.0]])
        self.r = np.sqrt(self.t)
        # area measure: dA = r dr dtheta = dt dtheta / 2 = dx dtheta / 4
        self.radial_weights = np.concatenate([wg / 4, [0.0]])
        self.degree = min(2 * n_r - 4, n_theta // 2 - 2)
        D = self.degree
        self.modes = np.arange(-D, D + 1)
        self.columns = self.modes % n_theta
        M = self.modes.size
        self.nk = (D - np.abs(self.modes)) // 2 + 1
        self.nk_cg = np.where(np.abs(self.modes) <= D - 1, (D - 1 - np.abs(self.modes)) // 2 + 1, 0)
        kmax = int(self.nk.max())
        r = self.r

        w = self.radial_weights.copy()
        w[-1] = w[:-1].max()

        self.fit = np.zeros((M, kmax, n_r))
        self.scale = np.zeros((M, kmax))
        self.scale_cg = np.zeros((M, kmax))
        # each operator is stored composed with its fit: one (M, n_r, n_r) matrix
        self._composite = {name: np.zeros((M, n_r, n_r))
                           for name in ("project", "project_cg", "dbar", "dz", "cg")}
        C = self._composite
        for i, k in enumerate(self.modes):
            k = int(k)
            nk = int(self.nk[i])
            B = basis_values(k, nk, r)
            s = np.abs(B).max(axis=1)
            Bs = B / s[:, None]
            self.scale[i, :nk] = s
            fit = _weighted_fit(Bs, w)
            self.fit[i, :nk, :] = fit
            C["project"][i] = Bs.T @ fit
            C["dbar"][i] = (_dbar_values(k, nk, r) / s[:, None]).T @ fit
            C["dz"][i] = (_dz_values(k, nk, r) / s[:, None]).T @ fit
            nc = int(self.nk_cg[i])
            if nc:
                Bc = basis_values(k, nc, r)
                sc = np.abs(Bc).max(axis=1)
                self.scale_cg[i, :nc] = sc
                fit_cg = _weighted_fit(Bc / sc[:, None], w)
                C["project_cg"][i] = (Bc / sc[:, None]).T @ fit_cg
                C["cg"][i] = (_cg_values(k, nc, r) / sc[:, None]).T @ fit_cg
        # index of the output column for operators that shift the mode
        self.columns_up = (self.modes + 1) % n_theta
        self.columns_down = (self.modes - 1) % n_theta

    # -- transforms ---------------------------------------------------------
    def modes_of(self, values: np.ndarray) -> np.ndarray:
        """Radial profiles per retained mode, shape ``(..., M, n_r)``."""
        F = np.fft.fft(values, axis=-1) / self.n_theta
        return np.swapaxes(F[..., self.columns], -1, -2)

    def synthesize(self, profiles: np.ndarray, columns: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`modes_of` with profiles placed at ``columns``."""
        shape = profiles.shape[:-2] + (self.n_r, self.n_theta)
        F = np.zeros(shape, dtype=complex)
        F[..., columns] = np.swapaxes(profiles, -1, -2)
        return np.fft.ifft(F, axis=-1) * self.n_theta

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        return np.matmul(self.fit, self.modes_of(values)[..., None])[..., 0]

    def _apply(self, values, name, columns):
        values = np.asarray(values)
        lead = values.shape[:-2]
        prof = self.modes_of(values.reshape((-1,) + values.shape[-2:]))  # (B, M, n_r)
        prof = np.transpose(prof, (1, 2, 0))  # (M, n_r, B)
        B = prof.shape[-1]
        # real matrices against real and imaginary parts (avoids a complex upcast)
        ri = np.matmul(self._composite[name], np.concatenate([prof.real, prof.imag], axis=-1))
        out = ri[..., :B] + 1j * ri[..., B:]
        out = np.transpose(out, (2, 0, 1)).reshape(lead + out.shape[:2])
        return self.synthesize(out, columns)

    def project(self, values):
        return self._apply(values, "project", self.columns)

    def project_cg(self, values):
        """Projection onto the (degree D-1) input space of :meth:`dbar_inverse`."""
        return self._apply(values, "project_cg", self.columns)

    def d_zetabar(self, values):
        return self._apply(values, "dbar", self.columns_up)

    def d_zeta(self, values):
        return self._apply(values, "dz", self.columns_down)

    def dbar_inverse(self, values):
        return self._apply(values, "cg", self.columns_down)

    def value_at_origin(self, values: np.ndarray) -> np.ndarray:
        """Spectral value at ``zeta = 0``; only the zero mode contributes."""
        i = int(np.searchsorted(self.modes, 0))
        nk = int(self.nk[i])
        prof = self.modes_of(values)[..., i, :]
        c = prof @ self.fit[i, :nk, :].T
        return c @ ((-1.0) ** np.arange(nk) / self.scale[i, :nk])

    def evaluate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Spectral interpolation of ``values`` at disc points; shape ``(..., P)``."""
        coef = self.coefficients(values)
        pts = np.asarray(points, dtype=complex).ravel()
        rr = np.abs(pts)
        ph = np.exp(1j * np.angle(pts))
        out = np.zeros(coef.shape[:-2] + (pts.size,), dtype=complex)
        for i, k in enumerate(self.modes):
            nk = int(self.nk[i])
            B = basis_values(int(k), nk, rr) / self.scale[i, :nk, None]
            out += (coef[..., i, :nk] @ B) * ph ** int(k)
        return out


@lru_cache(maxsize=6)
def spectral(n_r: int, n_theta: int) -> DiscSpectral:
    return DiscSpectral(n_r, n_theta)
