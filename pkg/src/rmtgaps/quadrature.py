"""Adaptive 1D and 2D quadrature with endpoint and infinite-domain transforms.

The building block is the Gauss(7)/Kronrod(15) pair applied to panels of a
unit parameter interval; coordinate maps (affine, graded-power for endpoint
singularities, rational / algebraic for infinite tails) carry the panel onto
the actual integration domain.  The same rule drives three entry points:

* ``integrate_1d`` / ``integrate_union_1d``: scalar integrands,
* ``integrate_2d_antisym``: the antisymmetrised double integral
  ``(1/2) iint w(l)w(m) f(l,m) [g_j(l)g_k(m) - g_k(l)g_j(m)] dl dm``,
* vector-valued internal drivers used by the ensemble kernels, which
  integrate many matrix entries over a shared adaptive panel tree.

Maps for mirrored domains are built so that evaluating a kernel at ``(-b,-a)``
performs the same floating point operations as at ``(a,b)``; this keeps the
left/right symmetry of even-weight ensembles exact to roundoff.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, NumericalError, ParameterError

__all__ = [
    "Interval",
    "QuadResult",
    "integrate_1d",
    "integrate_union_1d",
    "integrate_2d_antisym",
]

# 15-point Kronrod nodes (ascending) with the embedded 7-point Gauss rule.
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
# Gauss-7 weights aligned on the Kronrod grid (zero at Kronrod-only nodes).
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]

_ABS_FLOOR = 1e-300  # guards pure relative tolerances on identically-zero results


@dataclass(frozen=True)
class Interval:
    """An open interval of the extended real line; ``lo < hi``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ParameterError(f"interval requires lo < hi, got ({self.lo}, {self.hi})")
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ParameterError("interval endpoints must not be NaN")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)


@dataclass(frozen=True)
class QuadResult:
    """Integral value with an absolute error estimate and evaluation count."""

    value: float
    abs_error_estimate: float
    evaluations: int


# ---------------------------------------------------------------------------
# Axis maps: t in (0,1)  ->  (x, dx/dt)
# ---------------------------------------------------------------------------


class AxisMap:
    """Coordinate map from the unit parameter interval onto a domain piece."""

    def __call__(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class AffineMap(AxisMap):
    a: float
    b: float

    def __call__(self, t):
        span = self.b - self.a
        return self.a + span * t, np.full_like(t, span)


@dataclass(frozen=True)
class PowerMap(AxisMap):
    """x = a + (b-a) * t**m: grades panels toward the ``a`` endpoint.

    Used where the integrand carries an integrable power behaviour at ``a``;
    nodes never touch t = 0, so the integrand is only ever evaluated at
    interior points.
    """

    a: float
    b: float
    m: float

    def __call__(self, t):
        span = self.b - self.a
        tm1 = t ** (self.m - 1.0)
        return self.a + span * (tm1 * t), self.m * span * tm1


@dataclass(frozen=True)
class SemiInfiniteMap(AxisMap):
    """x = anchor + sign * scale * t/(1-t): covers (anchor, +inf) or (-inf, anchor)."""

    anchor: float
    scale: float
    sign: float  # +1 for an upper tail, -1 for a lower tail

    def __call__(self, t):
        u = 1.0 - t
        y = self.scale * t / u
        return self.anchor + self.sign * y, np.abs(self.sign) * self.scale / (u * u)


@dataclass(frozen=True)
class AlgebraicTailMap(AxisMap):
    """Tail map for integrands decaying like |x|^(-p), p > 1.

    x = anchor + sign * scale * (t**(-1/(p-1)) - 1 + 1) ... concretely
    x = anchor + sign * scale * t**(-q) with q = 1/(p-1), shifted so t=1 hits
    the anchor; the jacobian times an exact x^-p decay is bounded in t.
    """

    anchor: float
    scale: float
    p: float
    sign: float

    def __call__(self, t):
        q = 1.0 / (self.p - 1.0)
        y = self.scale * (t ** (-q) - 1.0)
        jac = self.scale * q * t ** (-q - 1.0)
        return self.anchor + self.sign * y, jac


@dataclass(frozen=True)
class MirrorMap(AxisMap):
    """x = -inner(t): the mirrored-piece construction used for x < 0 pieces."""

    inner: AxisMap

    def __call__(self, t):
        x, jac = self.inner(t)
        return -x, jac


def graded_unit_maps(p_lo: float, p_hi: float) -> list[AxisMap]:
    """Maps covering (0,1) for an integrand ~ t**p_lo at 0 and (1-t)**p_hi at 1."""

    def grade(e):
        if e >= 0 and float(e).is_integer():
            return 1.0
        return float(max(1.0, math.ceil(4.0 / (1.0 + e))))

    m_lo, m_hi = grade(p_lo), grade(p_hi)
    if m_lo == 1.0 and m_hi == 1.0:
        return [AffineMap(0.0, 1.0)]
    return [PowerMap(0.0, 0.5, m_lo), MirrorMap(PowerMap(-1.0, -0.5, m_hi))]


# ---------------------------------------------------------------------------
# Panel rule and adaptive drivers
# ---------------------------------------------------------------------------


def _damped_error(resk, resg, resabs, resasc):
    """QUADPACK-style sharpened error estimate, vectorised over components."""
    err = np.abs(resk - resg)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(resasc > 0.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5, 1.0)
    err = np.where(resasc > 0.0, resasc * np.minimum(1.0, ratio), err)
    eps50 = 50.0 * np.finfo(float).eps * resabs
    return np.maximum(err, eps50 * (resabs > 0))


def _rule_1d(fvec, amap, t0, t1):
    half = 0.5 * (t1 - t0)
    t = 0.5 * (t0 + t1) + half * _XK
    x, jac = amap(t)
    vals = np.atleast_2d(np.asarray(fvec(x), dtype=float)) * jac
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))
        raise NumericalError(f"integrand returned a non-finite value near x={x[bad[0][-1]]!r}")
    resk = half * (vals @ _WK)
    resg = half * (vals @ _WG)
    resabs = half * (np.abs(vals) @ _WK)
    mean = resk / (2.0 * half) if half > 0 else resk
    resasc = half * (np.abs(vals - mean[:, None]) @ _WK)
    return resk, _damped_error(resk, resg, resabs, resasc), x.size


def _rule_2d(fvec2, mapx, mapy, tx0, tx1, ty0, ty1):
    hx, hy = 0.5 * (tx1 - tx0), 0.5 * (ty1 - ty0)
    tx = 0.5 * (tx0 + tx1) + hx * _XK
    ty = 0.5 * (ty0 + ty1) + hy * _XK
    x, jx = mapx(tx)
    y, jy = mapy(ty)
    vals = np.asarray(fvec2(x, y), dtype=float)
    if vals.ndim == 2:
        vals = vals[None, :, :]
    vals = vals * (jx[:, None] * jy[None, :])
    if not np.all(np.isfinite(vals)):
        raise NumericalError(
            f"2d integrand returned a non-finite value on panel x~{x[7]!r}, y~{y[7]!r}"
        )
    area = hx * hy
    resk = area * np.einsum("i,j,mij->m", _WK, _WK, vals)
    resg = area * np.einsum("i,j,mij->m", _WG, _WG, vals)
    resabs = area * np.einsum("i,j,mij->m", _WK, _WK, np.abs(vals))
    mean = resk / (4.0 * area) if area > 0 else resk
    resasc = area * np.einsum("i,j,mij->m", _WK, _WK, np.abs(vals - mean[:, None, None]))
    return resk, _damped_error(resk, resg, resabs, resasc), x.size * y.size


def _adapt(panels, refine, rel_tol, abs_floor, max_panels):
    """Shared adaptive loop: refine the worst panel until all components converge.

    ``panels`` is a list of (vals, errs, extra) seeds; ``refine`` maps an
    ``extra`` payload to its children (evaluated).  Returns totals, total
    error and evaluation count.  Deterministic: ties broken by insertion
    order.
    """
    m = panels[0][0].size
    totals = np.zeros(m)
    total_err = np.zeros(m)
    evals = 0
    counter = itertools.count()
    heap = []
    for vals, errs, nev, extra in panels:
        totals += vals
        total_err += errs
        evals += nev
        heapq.heappush(heap, (-float(errs.max()), next(counter), vals, errs, extra))

    floor = np.broadcast_to(np.asarray(abs_floor, dtype=float), (m,))

    def converged():
        tol = np.maximum(rel_tol * np.abs(totals), np.maximum(floor, _ABS_FLOOR))
        return bool(np.all(total_err <= tol))

    n_panels = len(panels)
    while not converged():
        if n_panels >= max_panels:
            tol = np.maximum(rel_tol * np.abs(totals), floor)
            worst = int(np.argmax(total_err / np.maximum(tol, _ABS_FLOOR)))
            raise ConvergenceError(
                f"quadrature did not converge after {n_panels} panels "
                f"(component {worst}: error {total_err[worst]:.3e} vs tolerance {tol[worst]:.3e})"
            )
        if not heap:
            break
        _, _, vals, errs, extra = heapq.heappop(heap)
        totals -= vals
        total_err -= errs
        for child_vals, child_errs, nev, child_extra in refine(extra):
            totals += child_vals
            total_err += child_errs
            evals += nev
            heapq.heappush(
                heap,
                (-float(child_errs.max()), next(counter), child_vals, child_errs, child_extra),
            )
            n_panels += 1
        n_panels -= 1
    return totals, total_err, evals


def integrate_cells_1d(fvec, maps: Sequence[AxisMap], rel_tol: float,
                       abs_floor=1e-300, max_panels: int = 4000):
    """Integrate a vector-valued integrand over mapped unit cells.

    ``fvec(x)`` must return shape ``(m, len(x))``.  Returns
    ``(values (m,), errors (m,), evaluations)``.
    """
    seeds = []
    for amap in maps:
        vals, errs, nev = _rule_1d(fvec, amap, 0.0, 1.0)
        seeds.append((vals, errs, nev, (amap, 0.0, 1.0)))

    def refine(extra):
        amap, t0, t1 = extra
        tm = 0.5 * (t0 + t1)
        out = []
        for u0, u1 in ((t0, tm), (tm, t1)):
            vals, errs, nev = _rule_1d(fvec, amap, u0, u1)
            out.append((vals, errs, nev, (amap, u0, u1)))
        return out

    return _adapt(seeds, refine, rel_tol, abs_floor, max_panels)


def integrate_cells_2d(fvec2, cells: Sequence[tuple[AxisMap, AxisMap]], rel_tol: float,
                       abs_floor=1e-300, max_panels: int = 4000):
    """2D analogue of :func:`integrate_cells_1d` over (map_x, map_y) cells.

    ``fvec2(x, y)`` must return shape ``(m, len(x), len(y))`` (or ``(len(x),
    len(y))`` for a single component).
    """
    seeds = []
    for mapx, mapy in cells:
        vals, errs, nev = _rule_2d(fvec2, mapx, mapy, 0.0, 1.0, 0.0, 1.0)
        seeds.append((vals, errs, nev, (mapx, mapy, 0.0, 1.0, 0.0, 1.0)))

    def refine(extra):
        mapx, mapy, tx0, tx1, ty0, ty1 = extra
        txm, tym = 0.5 * (tx0 + tx1), 0.5 * (ty0 + ty1)
        out = []
        for ux0, ux1 in ((tx0, txm), (txm, tx1)):
            for uy0, uy1 in ((ty0, tym), (tym, ty1)):
                vals, errs, nev = _rule_2d(fvec2, mapx, mapy, ux0, ux1, uy0, uy1)
                out.append((vals, errs, nev, (mapx, mapy, ux0, ux1, uy0, uy1)))
        return out

    return _adapt(seeds, refine, rel_tol, abs_floor, max_panels)


# ---------------------------------------------------------------------------
# Public scalar operations
# ---------------------------------------------------------------------------


def _default_maps(domain: Interval) -> list[AxisMap]:
    """Default transforms: t/(1-t) for semi-infinite pieces, tan(pi t/2) for
    doubly infinite domains after a symmetric split at zero."""
    lo, hi = domain.lo, domain.hi
    if math.isinf(lo) and math.isinf(hi):
        return [MirrorMap(TanMap()), TanMap()]
    if math.isinf(hi):
        return [SemiInfiniteMap(lo, 1.0, +1.0)]
    if math.isinf(lo):
        return [SemiInfiniteMap(hi, 1.0, -1.0)]
    return [AffineMap(lo, hi)]


@dataclass(frozen=True)
class TanMap(AxisMap):
    """x = tan(pi t / 2) on (0, inf)."""

    def __call__(self, t):
        ang = 0.5 * math.pi * t
        c = np.cos(ang)
        return np.tan(ang), 0.5 * math.pi / (c * c)


def _scalar_vec(f: Callable[[float], float]):
    def fvec(x):
        try:
            vals = np.asarray(f(x), dtype=float)
            if vals.shape != x.shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.array([float(f(xi)) for xi in x])
        return vals[None, :]

    return fvec


def integrate_1d(f: Callable[[float], float], domain: Interval,
                 rel_tol: float = 1e-10, abs_tol: float = 1e-14,
                 max_intervals: int = 4000) -> QuadResult:
    """Adaptively integrate ``f`` over ``domain`` to the requested tolerance.

    Integrable endpoint power singularities are handled by panel refinement;
    infinite endpoints by the rational/tangent transforms.
    """
    vals, errs, evals = integrate_cells_1d(
        _scalar_vec(f), _default_maps(domain), rel_tol, abs_floor=abs_tol,
        max_panels=max_intervals)
    return QuadResult(float(vals[0]), float(errs[0]), evals)


def integrate_union_1d(f: Callable[[float], float], domain: Interval,
                       r: float, s: float, rel_tol: float = 1e-10,
                       abs_tol: float = 1e-14) -> QuadResult:
    """Integrate over the excised domain (lo, r) u (s, hi); lo <= r <= s <= hi."""
    lo, hi = domain.lo, domain.hi
    if not (lo <= r <= s <= hi):
        raise ParameterError(f"need lo <= r <= s <= hi, got {lo} <= {r} <= {s} <= {hi}")
    pieces = []
    if r > lo:
        pieces.append(Interval(lo, r))
    if hi > s:
        pieces.append(Interval(s, hi))
    if not pieces:
        return QuadResult(0.0, 0.0, 0)
    total, err, evals = 0.0, 0.0, 0
    for piece in pieces:
        res = integrate_1d(f, piece, rel_tol, abs_tol)
        total += res.value
        err += res.abs_error_estimate
        evals += res.evaluations
    return QuadResult(total, err, evals)


def _as_pieces(dom) -> list[Interval]:
    if isinstance(dom, Interval):
        return [dom]
    return list(dom)


def integrate_2d_antisym(g_j, g_k, w, f, domain_lam, domain_mu,
                         rel_tol: float = 1e-9, abs_tol: float = 1e-14,
                         max_panels: int = 4000,
                         pair_integrand=None) -> QuadResult:
    """Antisymmetrised double integral over a product of interval unions.

    Computes ``(1/2) iint w(l)w(m) f(l,m) [g_j(l)g_k(m) - g_k(l)g_j(m)]``.
    The bracket, not the raw product, is what gets evaluated, so the result
    is exactly zero when ``g_j`` and ``g_k`` agree, and the factor ``f`` may
    be singular on lines where the bracket vanishes.  A prepared
    ``pair_integrand(l, m)`` (broadcasting, returning the full product
    including ``w`` and ``f``) may be supplied to replace the default
    evaluation when a numerically cancelled form exists.
    """
    if pair_integrand is None:
        def pair_integrand(lam, mu):
            bracket = g_j(lam) * g_k(mu) - g_k(lam) * g_j(mu)
            return w(lam) * w(mu) * f(lam, mu) * bracket

    def fvec2(x, y):
        lam = x[:, None]
        mu = y[None, :]
        return np.asarray(pair_integrand(lam, mu), dtype=float)[None, :, :]

    total, err, evals = 0.0, 0.0, 0
    for pl in _as_pieces(domain_lam):
        for pm in _as_pieces(domain_mu):
            cells = [(mx, my) for mx in _default_maps(pl) for my in _default_maps(pm)]
            vals, errs, nev = integrate_cells_2d(
                fvec2, cells, rel_tol, abs_floor=abs_tol, max_panels=max_panels)
            total += 0.5 * float(vals[0])
            err += 0.5 * float(errs[0])
            evals += nev
    return QuadResult(total, err, evals)
