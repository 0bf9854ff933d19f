"""Gap probabilities and extreme-eigenvalue densities from kernel matrices.

Two joint-density structures are supported:

* determinant kind ("type I"): the eigenvalue density is a product of two
  determinants, and every probability is a ratio ``det(kernel)/det(h)`` where
  ``h`` is the full-domain kernel matrix;
* pfaffian kind ("type II"): a Pfaffian times a determinant, probabilities
  are ratios ``Pf(kernel)/Pf(h)`` of antisymmetric matrices whose dimension
  is ``n`` rounded up to even (odd ``n`` adds a border row of one-dimensional
  integrals).

Densities of the smallest/largest eigenvalue come from analytic
differentiation: row-replacement sums for determinants, the trace identity
``d Pf(A) = Pf(A) tr(A^-1 A')/2`` for Pfaffians (with a finite-difference
fallback when the kernel matrix is numerically singular).  Before any
determinant or Pfaffian, rows and columns are rescaled by the magnitudes of
the full-domain matrix; the same scaling is applied to numerator and
denominator so ratios are unchanged while each factorisation stays well
conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import pfaff_linalg
from .errors import NumericalError, ParameterError
from .quadrature import Interval, integrate_cells_1d, integrate_cells_2d

__all__ = [
    "GapQuery",
    "EnsembleModel",
    "make_determinant_model",
    "make_pfaffian_model",
    "partition",
    "gap_probability",
    "double_gap_probability",
    "sf_min",
    "cdf_max",
    "pdf_min",
    "pdf_max",
    "joint_extreme_pdf",
    "chi_matrix",
    "chi_tilde_matrix",
]

_PROB_SLACK = 1e-8  # beyond this, an out-of-range probability is an error, not noise


@dataclass(frozen=True)
class GapQuery:
    """The interval (r, s) queried for emptiness."""

    r: float
    s: float

    def __post_init__(self):
        if math.isnan(self.r) or math.isnan(self.s):
            raise ParameterError("gap query endpoints must not be NaN")
        if self.r > self.s:
            raise ParameterError(f"gap query requires r <= s, got r={self.r}, s={self.s}")


@dataclass(frozen=True)
class EnsembleModel:
    """Compiled evaluator for one ensemble variant.

    ``kernel`` bundles the family-specific integral evaluators; everything
    derived from the full-domain matrix (scalings, log-magnitudes) is frozen
    in at build time.  Instances are immutable and safe to share.
    """

    spec: object
    domain: Interval
    kind: str  # "determinant" or "pfaffian"
    kernel: object
    n: int
    dim: int                       # matrix dimension (n, or n+1 for odd pfaffian kind)
    h: np.ndarray
    row_scale: np.ndarray
    col_scale: np.ndarray
    sign_h: float
    log_h: float                   # of the rescaled full-domain matrix
    norm_inverse: float            # C^-1 = n! det(h) or n! Pf(h)
    closed_norm: Optional[float] = None
    sf_min_closed: Optional[Callable[[float], float]] = None
    pdf_min_closed: Optional[Callable[[float], float]] = None
    quad_rel_tol: float = 1e-9
    max_panels: int = 6000
    pair_floors: Optional[np.ndarray] = field(default=None, repr=False)

    def gap(self, r: float, s: float) -> float:
        return gap_probability(self, r, s)

    def double_gap(self, r: float, s: float) -> float:
        return double_gap_probability(self, r, s)


def _logfact(n: int) -> float:
    return math.lgamma(n + 1)


def make_determinant_model(spec, domain, kernel, *, closed_norm=None,
                           sf_min_closed=None, pdf_min_closed=None,
                           quad_rel_tol=1e-9, max_panels=6000) -> EnsembleModel:
    """Assemble a determinant-kind model from a kernel with seg/wfg evaluators."""
    n = kernel.n
    h = np.asarray(kernel.seg(domain.lo, domain.hi), dtype=float)
    if h.shape != (n, n) or not np.all(np.isfinite(h)):
        raise NumericalError("full-domain kernel matrix is invalid")
    rmax = np.max(np.abs(h), axis=1)
    if np.any(rmax == 0.0):
        raise NumericalError("full-domain kernel matrix has a zero row")
    row_scale = 1.0 / rmax
    cmax = np.max(np.abs(h) * row_scale[:, None], axis=0)
    col_scale = 1.0 / np.where(cmax > 0, cmax, 1.0)
    sign_h, log_h = pfaff_linalg.slogdet(h * row_scale[:, None] * col_scale[None, :])
    if sign_h == 0.0:
        raise NumericalError("full-domain kernel matrix is singular")
    sign_u, log_u = pfaff_linalg.slogdet(h)
    norm_inverse = sign_u * math.exp(_logfact(n) + log_u)
    model = EnsembleModel(
        spec=spec, domain=domain, kind="determinant", kernel=kernel, n=n, dim=n,
        h=h, row_scale=row_scale, col_scale=col_scale, sign_h=sign_h, log_h=log_h,
        norm_inverse=norm_inverse, closed_norm=closed_norm,
        sf_min_closed=sf_min_closed, pdf_min_closed=pdf_min_closed,
        quad_rel_tol=quad_rel_tol, max_panels=max_panels)
    _check_norm(model)
    return model


def make_pfaffian_model(spec, domain, kernel, *, closed_norm=None,
                        sf_min_closed=None, pdf_min_closed=None,
                        quad_rel_tol=1e-9, max_panels=6000) -> EnsembleModel:
    """Assemble a pfaffian-kind model; ``kernel`` provides pairwise evaluators."""
    n = kernel.n
    dim = n if n % 2 == 0 else n + 1
    h = np.asarray(kernel.h_matrix(), dtype=float)
    if h.shape != (dim, dim) or not np.all(np.isfinite(h)):
        raise NumericalError("full-domain kernel matrix is invalid")
    rmax = np.max(np.abs(h), axis=1)
    if np.any(rmax == 0.0):
        raise NumericalError("full-domain kernel matrix has a zero row")
    d = 1.0 / np.sqrt(rmax)
    sign_h, log_h = pfaff_linalg.slogpf(h * d[:, None] * d[None, :])
    if sign_h == 0.0:
        raise NumericalError("full-domain kernel matrix has vanishing Pfaffian")
    sign_u, log_u = pfaff_linalg.slogpf(h)
    norm_inverse = sign_u * math.exp(_logfact(n) + log_u)
    # per-pair absolute floors for the quadrature: resolve each entry to the
    # precision the Pfaffian of h can see
    hmax = float(np.max(np.abs(h[:n, :n]), initial=0.0)) or float(np.max(np.abs(h)))
    floors = []
    for j in range(n):
        for k in range(j + 1, n):
            floors.append(quad_rel_tol * max(abs(h[j, k]), 1e-6 * hmax))
    model = EnsembleModel(
        spec=spec, domain=domain, kind="pfaffian", kernel=kernel, n=n, dim=dim,
        h=h, row_scale=d, col_scale=d, sign_h=sign_h, log_h=log_h,
        norm_inverse=norm_inverse, closed_norm=closed_norm,
        sf_min_closed=sf_min_closed, pdf_min_closed=pdf_min_closed,
        quad_rel_tol=quad_rel_tol, max_panels=max_panels,
        pair_floors=np.asarray(floors) if floors else None)
    _check_norm(model)
    return model


def _check_norm(model: EnsembleModel):
    if model.closed_norm is not None:
        got, want = model.norm_inverse, model.closed_norm
        if not math.isfinite(got) or want <= 0 or abs(got - want) > 1e-8 * abs(want):
            raise NumericalError(
                f"normalisation mismatch: kernel matrix gives {got!r}, "
                f"closed form gives {want!r}")
    if not (model.norm_inverse > 0 and math.isfinite(model.norm_inverse)):
        raise NumericalError(f"non-positive partition function {model.norm_inverse!r}")


# ---------------------------------------------------------------------------
# Kernel matrices
# ---------------------------------------------------------------------------


def _query_pieces(model, r, s):
    """Decompose the excised domain (lo,r) u (s,hi) into nonempty pieces."""
    lo, hi = model.domain.lo, model.domain.hi
    if not (lo <= r <= s <= hi):
        raise ParameterError(
            f"query must satisfy {lo} <= r <= s <= {hi}, got r={r}, s={s}")
    pieces = []
    if r > lo:
        pieces.append((lo, r))
    if hi > s:
        pieces.append((s, hi))
    return pieces


def _pair_index(n):
    return [(j, k) for j in range(n) for k in range(j + 1, n)]


def _chi_det(model, pieces) -> np.ndarray:
    n = model.n
    out = np.zeros((n, n))
    for a, b in pieces:
        out += np.asarray(model.kernel.seg(a, b), dtype=float)
    return out


def _chi_pf(model, pieces) -> np.ndarray:
    """Antisymmetric kernel matrix over a union of pieces (pfaffian kind)."""
    kern = model.kernel
    n, dim = model.n, model.dim
    out = np.zeros((dim, dim))
    pairs = _pair_index(n)
    if pairs:
        acc = np.zeros(len(pairs))
        for i1, (a1, b1) in enumerate(pieces):
            for i2, (a2, b2) in enumerate(pieces):
                if i2 < i1:
                    continue
                weight = 1.0 if i1 == i2 else 2.0
                cells = [(mx, my)
                         for mx in kern.axis_cells(a1, b1)
                         for my in kern.axis_cells(a2, b2)]

                def fvec2(x, y):
                    return kern.pair_vals(x[:, None], y[None, :])

                vals, _errs, _nev = integrate_cells_2d(
                    fvec2, cells, model.quad_rel_tol,
                    abs_floor=model.pair_floors, max_panels=model.max_panels)
                acc += 0.5 * weight * vals
        for m, (j, k) in enumerate(pairs):
            out[j, k] = acc[m]
            out[k, j] = -acc[m]
    if dim > n:
        border = np.zeros(n)
        for a, b in pieces:
            border += np.asarray(kern.border_seg(a, b), dtype=float)
        out[:n, n] = border
        out[n, :n] = -border
    return out


def chi_matrix(model: EnsembleModel, r: float, s: float) -> np.ndarray:
    """Kernel matrix for the gap query (r, s): integrals exclude (r, s)."""
    pieces = _query_pieces(model, r, s)
    return _chi_det(model, pieces) if model.kind == "determinant" else _chi_pf(model, pieces)


def chi_tilde_matrix(model: EnsembleModel, r: float, s: float) -> np.ndarray:
    """Kernel matrix for the double-gap query: integrals restricted to [r, s]."""
    lo, hi = model.domain.lo, model.domain.hi
    if not (lo <= r <= s <= hi):
        raise ParameterError(
            f"query must satisfy {lo} <= r <= s <= {hi}, got r={r}, s={s}")
    pieces = [(r, s)] if s > r else []
    return _chi_det(model, pieces) if model.kind == "determinant" else _chi_pf(model, pieces)


# ---------------------------------------------------------------------------
# Ratios
# ---------------------------------------------------------------------------


def _ratio(model: EnsembleModel, mat: np.ndarray) -> float:
    """det(mat)/det(h) or Pf(mat)/Pf(h) with shared row/column rescaling."""
    scaled = mat * model.row_scale[:, None] * model.col_scale[None, :]
    if model.kind == "determinant":
        sign, logabs = pfaff_linalg.slogdet(scaled)
    else:
        sign, logabs = pfaff_linalg.slogpf(scaled)
    if sign == 0.0:
        return 0.0
    return sign * model.sign_h * math.exp(logabs - model.log_h)


def _check_probability(value: float, what: str) -> float:
    if not math.isfinite(value) or value < -_PROB_SLACK or value > 1.0 + _PROB_SLACK:
        raise NumericalError(f"{what} = {value!r} is outside [0, 1] beyond tolerance")
    return min(max(value, 0.0), 1.0)


def partition(model: EnsembleModel) -> float:
    """Inverse normalisation constant C^-1 = n! det(h) (resp. n! Pf(h))."""
    return model.norm_inverse


def gap_probability(model: EnsembleModel, r: float, s: float) -> float:
    """Probability that no eigenvalue lies in (r, s)."""
    GapQuery(r, s)
    try:
        value = _ratio(model, chi_matrix(model, r, s))
    except NumericalError as exc:
        raise NumericalError(f"gap probability at (r={r}, s={s}): {exc}") from exc
    return _check_probability(value, f"E({r}, {s})")


def double_gap_probability(model: EnsembleModel, r: float, s: float) -> float:
    """Probability that every eigenvalue lies in [r, s]."""
    GapQuery(r, s)
    try:
        value = _ratio(model, chi_tilde_matrix(model, r, s))
    except NumericalError as exc:
        raise NumericalError(f"double gap probability at (r={r}, s={s}): {exc}") from exc
    return _check_probability(value, f"Etilde({r}, {s})")


def sf_min(model: EnsembleModel, x: float, *, use_closed: bool = True) -> float:
    """Survival function of the smallest eigenvalue: E(lo, x)."""
    if model.sf_min_closed is not None and use_closed:
        return _check_probability(model.sf_min_closed(x), f"sf_min({x})")
    return gap_probability(model, model.domain.lo, x)


def cdf_max(model: EnsembleModel, x: float) -> float:
    """Cumulative distribution of the largest eigenvalue: E(x, hi)."""
    return gap_probability(model, x, model.domain.hi)


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def _row_replace_sum(model, base: np.ndarray, repl: np.ndarray) -> float:
    """sum_i det(base with row i replaced by repl[i]) / det(h)."""
    total = 0.0
    for i in range(model.n):
        mat = base.copy()
        mat[i, :] = repl[i, :]
        total += _ratio(model, mat)
    return total


def _pf_derivative_matrix(model, x: float, pieces, sign: float) -> np.ndarray:
    """d/dx of the pfaffian-kind kernel matrix whose moving edge sits at x.

    ``sign`` is -1 when growing x shrinks the integration region (survival
    function) and +1 when it grows it (distribution function); the matrix of
    single integrals follows from differentiating the double integral at its
    boundary and merging the two edge terms by antisymmetry.
    """
    kern = model.kernel
    n, dim = model.n, model.dim
    out = np.zeros((dim, dim))
    pairs = _pair_index(n)
    if pairs:
        acc = np.zeros(len(pairs))
        for a, b in pieces:
            cells = kern.axis_cells(a, b)

            def fvec(mu):
                return kern.pair_vals(x, mu)

            vals, _errs, _nev = integrate_cells_1d(
                fvec, cells, model.quad_rel_tol,
                abs_floor=model.pair_floors, max_panels=model.max_panels)
            acc += vals
        for m, (j, k) in enumerate(pairs):
            out[j, k] = sign * acc[m]
            out[k, j] = -sign * acc[m]
    if dim > n:
        wg = np.asarray(kern.wg(x), dtype=float)
        out[:n, n] = sign * wg
        out[n, :n] = -sign * wg
    return out


def _fd_derivative(f, x, lo, hi, negate):
    """Richardson-extrapolated central difference of a distribution function."""
    h = max(1e-5, 1e-4 * abs(x))
    h = min(h, 0.25 * (hi - x) if math.isfinite(hi) else h, 0.25 * (x - lo) if math.isfinite(lo) else h)
    if h <= 0:
        raise NumericalError(f"cannot take finite differences at boundary point x={x}")

    def central(step):
        return (f(x + step) - f(x - step)) / (2.0 * step)

    d = (4.0 * central(h / 2.0) - central(h)) / 3.0
    return -d if negate else d


def pdf_min(model: EnsembleModel, x: float, *, use_closed: bool = True,
            with_info: bool = False):
    """Density of the smallest eigenvalue at x (interior point of the domain)."""
    lo, hi = model.domain.lo, model.domain.hi
    if not (lo < x < hi):
        raise ParameterError(f"pdf_min requires an interior point, got x={x}")
    if model.pdf_min_closed is not None and use_closed:
        val = model.pdf_min_closed(x)
        return (val, {"fallback": False}) if with_info else val

    fallback = False
    if model.kind == "determinant":
        base = _chi_det(model, [(x, hi)])
        value = _row_replace_sum(model, base, np.asarray(model.kernel.wfg(x), dtype=float))
    else:
        chi = _chi_pf(model, [(x, hi)])
        dchi = _pf_derivative_matrix(model, x, [(x, hi)], sign=-1.0)
        value, fallback = _pf_density(model, chi, dchi, negate=True)
        if fallback:
            value = _fd_derivative(lambda t: sf_min(model, t, use_closed=False),
                                   x, lo, hi, negate=True)
    value = _check_density(value, f"pdf_min({x})")
    return (value, {"fallback": fallback}) if with_info else value


def pdf_max(model: EnsembleModel, x: float, *, with_info: bool = False):
    """Density of the largest eigenvalue at x (interior point of the domain)."""
    lo, hi = model.domain.lo, model.domain.hi
    if not (lo < x < hi):
        raise ParameterError(f"pdf_max requires an interior point, got x={x}")
    fallback = False
    if model.kind == "determinant":
        base = _chi_det(model, [(lo, x)])
        value = _row_replace_sum(model, base, np.asarray(model.kernel.wfg(x), dtype=float))
    else:
        chi = _chi_pf(model, [(lo, x)])
        dchi = _pf_derivative_matrix(model, x, [(lo, x)], sign=+1.0)
        value, fallback = _pf_density(model, chi, dchi, negate=False)
        if fallback:
            value = _fd_derivative(lambda t: cdf_max(model, t), x, lo, hi, negate=False)
    value = _check_density(value, f"pdf_max({x})")
    return (value, {"fallback": fallback}) if with_info else value


def _pf_density(model, chi, dchi, negate):
    """E * tr(chi^-1 dchi)/2 with the sign of the defining derivative."""
    scaled = chi * model.row_scale[:, None] * model.col_scale[None, :]
    sign_c, log_c = pfaff_linalg.slogpf(scaled)
    if sign_c == 0.0:
        return math.nan, True
    prob = sign_c * model.sign_h * math.exp(log_c - model.log_h)
    dscaled = dchi * model.row_scale[:, None] * model.col_scale[None, :]
    try:
        trace = float(np.trace(np.linalg.solve(scaled, dscaled)))
    except np.linalg.LinAlgError:
        return math.nan, True
    if not math.isfinite(trace):
        return math.nan, True
    value = 0.5 * prob * trace
    return (-value if negate else value), False


def _check_density(value: float, what: str) -> float:
    if not math.isfinite(value) or value < -_PROB_SLACK:
        raise NumericalError(f"{what} = {value!r} is negative beyond tolerance")
    return max(value, 0.0)


def joint_extreme_pdf(model: EnsembleModel, r: float, s: float) -> float:
    """Joint density of (smallest, largest) eigenvalue at (r, s); 0 for r >= s."""
    if model.n < 2:
        raise ParameterError("joint extreme density requires n >= 2")
    lo, hi = model.domain.lo, model.domain.hi
    if r >= s:
        return 0.0
    if not (lo < r and s < hi):
        raise ParameterError(f"joint density requires lo < r < s < hi, got ({r}, {s})")

    if model.kind == "determinant":
        base = _chi_det(model, [(r, s)])
        dr = np.asarray(model.kernel.wfg(r), dtype=float)
        ds = np.asarray(model.kernel.wfg(s), dtype=float)
        total = 0.0
        for i in range(model.n):
            for l in range(model.n):
                if i == l:
                    continue
                mat = base.copy()
                mat[i, :] = dr[i, :]
                mat[l, :] = ds[l, :]
                total += _ratio(model, mat)
        return _check_density(total, f"joint_extreme_pdf({r}, {s})")

    # pfaffian kind: mixed central differences of the double-gap probability
    h1 = max(1e-5, 1e-4 * abs(r))
    h2 = max(1e-5, 1e-4 * abs(s))
    h1 = min(h1, 0.25 * (s - r), 0.25 * (r - lo) if math.isfinite(lo) else h1)
    h2 = min(h2, 0.25 * (s - r), 0.25 * (hi - s) if math.isfinite(hi) else h2)

    def mixed(a, b):
        return -(double_gap_probability(model, r + a, s + b)
                 - double_gap_probability(model, r - a, s + b)
                 - double_gap_probability(model, r + a, s - b)
                 + double_gap_probability(model, r - a, s - b)) / (4.0 * a * b)

    value = (4.0 * mixed(h1 / 2.0, h2 / 2.0) - mixed(h1, h2)) / 3.0
    return _check_density(value, f"joint_extreme_pdf({r}, {s})")
