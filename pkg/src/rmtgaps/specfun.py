"""Real-valued special functions used by the ensemble kernels.

Everything here is real arithmetic.  In particular ``beta_inc_negarg``
packages the combination ``(-1)**(-a) * B(-r; a, b)`` that shows up in
heavy-tailed kernels: on the principal branch it equals the manifestly real
integral ``int_0^r u**(a-1) (1+u)**(b-1) du``, which is how it is defined and
tested here.  Gamma/erf/Gauss-2F1 evaluation is delegated to scipy's
C implementations behind the documented contracts; the Appell F1 function,
which scipy lacks, is computed from its Euler integral representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import ConvergenceError, ParameterError
from .quadrature import graded_unit_maps, integrate_cells_1d

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "gamma",
    "gammaln",
    "gamma_upper",
    "gamma_lower",
    "erf",
    "hyp2f1",
    "beta",
    "beta_inc",
    "beta_inc_negarg",
    "appell_f1",
    "barnes_g",
    "barnes_g_log",
]


@dataclass(frozen=True)
class SeriesControl:
    """Termination control for series/quadrature evaluation."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_terms: int = 100_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ParameterError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise ParameterError("abs_tol must be non-negative")
        if self.max_terms < 1:
            raise ParameterError("max_terms must be at least 1")


DEFAULT_CONTROL = SeriesControl()

gamma = _sp.gamma
gammaln = _sp.gammaln


def _check_finite(value, what):
    if not np.all(np.isfinite(value)):
        raise ConvergenceError(f"{what} evaluated to a non-finite value")
    return value


def gamma_upper(a, x):
    """Upper incomplete gamma integral int_x^inf t**(a-1) e**(-t) dt, a > 0."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0):
        raise ParameterError("gamma_upper requires a > 0")
    if np.any(x < 0):
        raise ParameterError("gamma_upper requires x >= 0")
    out = _sp.gammaincc(a, x) * _sp.gamma(a)
    return _check_finite(out, "gamma_upper")[()]


def gamma_lower(a, x):
    """Lower incomplete gamma integral int_0^x t**(a-1) e**(-t) dt, a > 0."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0):
        raise ParameterError("gamma_lower requires a > 0")
    if np.any(x < 0):
        raise ParameterError("gamma_lower requires x >= 0")
    out = _sp.gammainc(a, x) * _sp.gamma(a)
    return _check_finite(out, "gamma_lower")[()]


def erf(x):
    """Error function (2/sqrt(pi)) int_0^x e**(-t^2) dt; odd, erf(inf) = 1."""
    return _sp.erf(x)


def hyp2f1(a, b, c, z):
    """Gauss hypergeometric function for real parameters and real z < 1.

    z = 1 is admitted only when the series converges there (c - a - b > 0).
    """
    c_arr = np.asarray(c, dtype=float)
    if np.any((c_arr <= 0) & (c_arr == np.floor(c_arr))):
        raise ParameterError("hyp2f1 pole: c must not be a non-positive integer")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr > 1):
        raise ParameterError("hyp2f1 requires z <= 1")
    out = _sp.hyp2f1(a, b, c, z)
    return _check_finite(out, "hyp2f1")[()]


def beta(a, b):
    """Complete Beta function Gamma(a)Gamma(b)/Gamma(a+b)."""
    return _sp.beta(a, b)


def beta_inc(z, a, b):
    """Incomplete Beta integral B(z; a, b) = int_0^z t**(a-1) (1-t)**(b-1) dt.

    ``a > 0`` and ``0 <= z <= 1``; ``b`` may be any real as long as the
    integral exists (``b > 0`` when z = 1).  Evaluated through
    ``(z**a / a) * 2F1(a, 1-b; a+1; z)``.
    """
    z_arr = np.asarray(z, dtype=float)
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr <= 0):
        raise ParameterError("beta_inc requires a > 0")
    if np.any((z_arr < 0) | (z_arr > 1)):
        raise ParameterError("beta_inc requires 0 <= z <= 1 (see beta_inc_negarg)")
    b_arr = np.asarray(b, dtype=float)
    if np.any((z_arr == 1) & (b_arr <= 0)):
        raise ParameterError("beta_inc at z = 1 requires b > 0")
    out = z_arr ** a_arr / a_arr * _sp.hyp2f1(a, 1.0 - b_arr, a_arr + 1.0, z_arr)
    return _check_finite(out, "beta_inc")[()]


def beta_inc_negarg(r, a, b):
    """The real combination (-1)**(-a) B(-r; a, b) for r >= 0, a > 0.

    Equals int_0^r u**(a-1) (1+u)**(b-1) du, evaluated through
    ``(r**a / a) * 2F1(a, 1-b; a+1; -r)``; vanishes at r = 0.
    """
    r_arr = np.asarray(r, dtype=float)
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr <= 0):
        raise ParameterError("beta_inc_negarg requires a > 0")
    if np.any(r_arr < 0):
        raise ParameterError("beta_inc_negarg requires r >= 0")
    out = (r_arr ** a_arr / a_arr
           * _sp.hyp2f1(a, 1.0 - np.asarray(b, dtype=float), a_arr + 1.0, -r_arr))
    return _check_finite(out, "beta_inc_negarg")[()]


def appell_f1(a, b1, b2, c, x, y, control: SeriesControl = DEFAULT_CONTROL):
    """Appell hypergeometric F1(a; b1, b2; c; x, y) for c > a > 0, x < 1, y < 1.

    Computed by adaptive quadrature of the Euler integral
    Gamma(c)/(Gamma(a)Gamma(c-a)) int_0^1 t**(a-1) (1-t)**(c-a-1)
    (1-x t)**(-b1) (1-y t)**(-b2) dt; endpoint power behaviour is absorbed by
    graded panel maps.
    """
    if not a > 0:
        raise ParameterError("appell_f1 requires a > 0")
    if not c - a > 0:
        raise ParameterError("appell_f1 requires c - a > 0")
    if x >= 1 or y >= 1:
        raise ParameterError("appell_f1 requires x < 1 and y < 1")

    p_lo = a - 1.0
    p_hi = c - a - 1.0

    def fvec(t):
        vals = t ** p_lo * (1.0 - t) ** p_hi
        vals = vals * (1.0 - x * t) ** (-b1) * (1.0 - y * t) ** (-b2)
        return vals[None, :]

    vals, _errs, _n = integrate_cells_1d(
        fvec, graded_unit_maps(p_lo, p_hi), control.rel_tol,
        abs_floor=control.abs_tol, max_panels=control.max_terms)
    lpref = gammaln(c) - gammaln(a) - gammaln(c - a)
    return float(vals[0]) * math.exp(lpref)


def barnes_g_log(n: int) -> float:
    """log G(n) for the Barnes G-function at a positive integer argument."""
    if n < 1 or n != int(n):
        raise ParameterError("barnes_g requires a positive integer")
    return float(sum(math.lgamma(j) for j in range(1, int(n))))


def barnes_g(n: int) -> float:
    """Barnes G-function at a positive integer: G(n+1) = prod_{j<=n} Gamma(j).

    Raises OverflowError once the product exceeds double range; use
    :func:`barnes_g_log` there.
    """
    logg = barnes_g_log(n)
    if logg > math.log(np.finfo(float).max):
        raise OverflowError("barnes_g overflows double precision; use barnes_g_log")
    return math.exp(logg)
