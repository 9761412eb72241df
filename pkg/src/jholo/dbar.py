"""Cauchy-Green right inverse of d/dzetabar and the nonlinear residual.

On the unit disc the operator acts in the Zernike-type polar basis: every
mode is integrated in closed form in ``zetabar``. On a domain ``psi(D)`` the
equation ``V_zbar = g`` is pulled back to ``V_wbar = g conj(psi')``.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ResolutionError
from .geometry import DomainSpec, GridFunction, lp_norm
from .structures import ComplexMatrixField

RESIDUAL_TOL = 1e-7


def _solve(g: GridFunction) -> np.ndarray:
    rhs = g.values if g.domain.is_disc else g.values * np.conj(g.jacobian)
    return g.grid.spectral.dbar_inverse(rhs)


def cauchy_green(g: GridFunction, domain: DomainSpec | None = None, normalize: bool = True,
                 check: bool = True) -> GridFunction:
    """``V`` with ``V_zbar = g`` and (by default) ``V = 0`` at the centre ``psi(0)``.

    With ``check`` set, a relative truncation residual above 1e-7 raises
    :class:`ResolutionError`.
    """
    if domain is not None and domain != g.domain:
        raise ConfigurationError("g is not sampled on the requested domain")
    V = _solve(g)
    if normalize:
        V = V - g.grid.spectral.value_at_origin(V)[..., None, None]
    out = g.like(V)
    if check:
        res = dbar_truncation(out, g)
        if res > RESIDUAL_TOL:
            raise ResolutionError(f"Cauchy-Green truncation residual {res:.3g} exceeds "
                                  f"{RESIDUAL_TOL}; use a larger grid")
    return out


def dbar_truncation(V: GridFunction, g: GridFunction) -> float:
    """``|V_zbar - g|_p / (1 + |g|_p)``."""
    return lp_norm(g.like(V.dzbar - g.values)) / (1 + lp_norm(g))


def cauchy_green_vanishing_at(g: GridFunction, a, check: bool = True) -> GridFunction:
    """Cauchy-Green solution shifted by a constant so that ``V(a) = 0``."""
    a = complex(a)
    w = g.domain.inverse(np.array([a]))[0]
    if not abs(w) < 1:
        raise ConfigurationError(f"normalization point {a} is not inside the domain")
    V = cauchy_green(g, normalize=False, check=check)
    if w == 0:
        c = g.grid.spectral.value_at_origin(V.values)
    else:
        c = g.grid.spectral.evaluate(V.values, np.array([w]))[..., 0]
    return V.like(V.values - c[:, None, None])


def dbar_residual(u: GridFunction, A: ComplexMatrixField) -> GridFunction:
    """``F(u) = u_zbar + A(u) conj(u_z)`` at every node."""
    if A.n != u.n:
        raise ConfigurationError(f"structure has n={A.n} but map has n={u.n}")
    A.check_range(u.values)
    return u.like(u.dzbar + A.apply_conj(u.values, u.dz))
