"""Dense determinants and Pfaffians with pivoting, plus derivative helpers.

Matrices are plain ``(n, n)`` float ``numpy`` arrays.  Antisymmetric inputs
are symmetrised as ``(A - A.T)/2`` when their asymmetry is within roundoff of
the entry scale (quadrature-built kernels carry that much noise) and rejected
beyond it.  The Pfaffian uses Parlett-Reid-style skew-symmetric elimination
with partial pivoting; the sign convention is fixed by
``pfaffian([[0, 1], [-1, 0]]) = +1``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError, ParameterError

__all__ = [
    "det",
    "slogdet",
    "pfaffian",
    "slogpf",
    "pfaffian_derivative",
]

_ASYM_TOL = 1e-12


def _check_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix contains non-finite entries")
    return a


def _check_antisymmetric(a, tol=_ASYM_TOL) -> np.ndarray:
    a = _check_square(a)
    scale = np.max(np.abs(a), initial=0.0)
    asym = np.max(np.abs(a + a.T), initial=0.0)
    if asym > tol * max(scale, 1e-300):
        raise ParameterError(
            f"matrix is not antisymmetric: |A + A^T| = {asym:.3e} exceeds "
            f"{tol:.0e} of the entry scale {scale:.3e}")
    return 0.5 * (a - a.T)


def slogdet(a) -> tuple[float, float]:
    """(sign, log|det|) via row-pivoted elimination; sign 0 for singular input."""
    sign, logabs = np.linalg.slogdet(_check_square(a))
    return float(sign), float(logabs)


def det(a) -> float:
    """Determinant; singular matrices give exactly 0."""
    sign, logabs = slogdet(a)
    if sign == 0.0:
        return 0.0
    return sign * math.exp(logabs)


def slogpf(a, asym_tol=_ASYM_TOL) -> tuple[float, float]:
    """(sign, log|Pf|) of an even-dimensional antisymmetric matrix.

    Skew-symmetric tridiagonalisation by congruence with partial pivoting;
    each 2x2 elimination step contributes one superdiagonal factor.
    """
    a = _check_antisymmetric(a, asym_tol)
    n = a.shape[0]
    if n % 2 == 1:
        raise ParameterError("pfaffian requires even dimension")
    if n == 0:
        return 1.0, 0.0
    a = a.copy()
    sign = 1.0
    logabs = 0.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(a[k + 1:, k])))
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            sign = -sign
        piv = a[k, k + 1]
        if piv == 0.0:
            return 0.0, -math.inf
        sign *= 1.0 if piv > 0 else -1.0
        logabs += math.log(abs(piv))
        if k + 2 < n:
            tau = a[k, k + 2:] / piv
            col = a[k + 2:, k + 1]
            a[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return sign, logabs


def pfaffian(a, asym_tol=_ASYM_TOL) -> float:
    """Pfaffian of an even-dimensional antisymmetric matrix; Pf(A)^2 = det(A)."""
    sign, logabs = slogpf(a, asym_tol)
    if sign == 0.0:
        return 0.0
    return sign * math.exp(logabs)


def pfaffian_derivative(a, da, asym_tol=_ASYM_TOL) -> float:
    """d/dx Pf(A(x)) given A and dA/dx, via d Pf = (1/2) Pf(A) tr(A^-1 dA)."""
    a = _check_antisymmetric(a, asym_tol)
    da = _check_antisymmetric(da, asym_tol)
    if a.shape != da.shape:
        raise ParameterError("A and dA must have the same shape")
    try:
        x = np.linalg.solve(a, da)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular matrix in pfaffian_derivative") from exc
    return 0.5 * pfaffian(a, asym_tol) * float(np.trace(x))
