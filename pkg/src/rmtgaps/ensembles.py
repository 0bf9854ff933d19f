"""Catalog of ensemble variants: specs, validation, and compiled models.

Six matrix families, each in a correlated (one positive scale per row) and an
uncorrelated flavour.  A builder turns an :class:`EnsembleSpec` into an
:class:`~rmtgaps.engine.EnsembleModel` carrying the family's kernel-segment
evaluators:

====================  ==========  ===========================  ==============
family                domain      correlated structure          uncorrelated
====================  ==========  ===========================  ==============
gauss-wigner          (-inf,inf)  pfaffian, Gaussian columns   determinant
laguerre-wishart      (0,inf)     determinant, exp columns     determinant
cauchy-lorentz-1      (-inf,inf)  pfaffian, even power law     determinant
cauchy-lorentz-2      (0,inf)     determinant, power law       determinant
jacobi-manova         (0,1)       determinant, two routes      determinant
bures-hall            (0,inf)     pfaffian, exp columns        pfaffian
====================  ==========  ===========================  ==============

Scale vectors are rearranged in ascending order internally: the eigenvalue
statistics are invariant under any permutation, and the ascending arrangement
makes the closed-form normalisation products positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import EnsembleModel, make_determinant_model, make_pfaffian_model
from .errors import DegenerateSigmaError, ParameterError
from .quadrature import (AffineMap, AlgebraicTailMap, AxisMap, Interval,
                         MirrorMap, PowerMap, SemiInfiniteMap)
from .specfun import (beta, beta_inc, beta_inc_negarg, erf, gamma, gammaln,
                      gamma_lower, gamma_upper, hyp2f1, appell_f1)

__all__ = [
    "FAMILIES",
    "EnsembleSpec",
    "family_domain",
    "build",
    "build_gauss_wigner",
    "build_laguerre_wishart",
    "build_cauchy_lorentz_i",
    "build_cauchy_lorentz_ii",
    "build_jacobi_manova",
    "build_bures_hall",
]

FAMILIES = (
    "gauss-wigner",
    "laguerre-wishart",
    "cauchy-lorentz-1",
    "cauchy-lorentz-2",
    "jacobi-manova",
    "bures-hall",
)

_DOMAINS = {
    "gauss-wigner": Interval(-math.inf, math.inf),
    "laguerre-wishart": Interval(0.0, math.inf),
    "cauchy-lorentz-1": Interval(-math.inf, math.inf),
    "cauchy-lorentz-2": Interval(0.0, math.inf),
    "jacobi-manova": Interval(0.0, 1.0),
    "bures-hall": Interval(0.0, math.inf),
}

_SIGMA_DEGENERACY = 1e-6  # relative gap below which the HCIZ kernels blow up


@dataclass(frozen=True)
class EnsembleSpec:
    """Full parameterisation of one ensemble variant.

    ``alpha`` is the determinant exponent (laguerre-wishart, cauchy-lorentz-2,
    jacobi-manova, bures-hall), ``beta`` the second jacobi exponent, ``kappa``
    the heavy-tail decay exponent (both cauchy-lorentz variants and correlated
    jacobi-manova).  ``sigma`` holds the n positive scales of a correlated
    variant and must be omitted otherwise.
    """

    family: str
    correlated: bool = False
    n: int = 1
    sigma: Optional[tuple] = None
    alpha: float = 0.0
    beta: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.sigma is not None:
            object.__setattr__(self, "sigma", tuple(float(v) for v in self.sigma))


def family_domain(family: str) -> Interval:
    if family not in _DOMAINS:
        raise ParameterError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return _DOMAINS[family]


def validate_spec(spec: EnsembleSpec) -> None:
    """Raise ParameterError naming the violated constraint, if any."""
    family_domain(spec.family)
    if spec.n < 1:
        raise ParameterError("n >= 1 violated")
    if spec.correlated:
        if spec.sigma is None:
            raise ParameterError("correlated ensembles need a sigma vector")
        if len(spec.sigma) != spec.n:
            raise ParameterError(
                f"sigma length {len(spec.sigma)} does not match n={spec.n}")
        if any(not (s > 0 and math.isfinite(s)) for s in spec.sigma):
            raise ParameterError("sigma entries must be positive and finite")
        srt = sorted(spec.sigma)
        for lo, hi in zip(srt, srt[1:]):
            if hi - lo <= _SIGMA_DEGENERACY * hi:
                raise DegenerateSigmaError(
                    f"sigma values {lo} and {hi} coincide within {_SIGMA_DEGENERACY:g} "
                    "relative: the correlated kernel is a singular limit; perturb them")
    elif spec.sigma is not None:
        raise ParameterError("uncorrelated ensembles carry no sigma vector")

    fam, n, a, b, k = spec.family, spec.n, spec.alpha, spec.beta, spec.kappa
    if fam in ("laguerre-wishart", "bures-hall", "cauchy-lorentz-2") and not a > -1:
        raise ParameterError("alpha > -1 violated")
    if fam == "cauchy-lorentz-1" and not k > n - 0.5:
        raise ParameterError("kappa > n - 1/2 violated")
    if fam == "cauchy-lorentz-2" and not k > 2 * n + a - 1:
        raise ParameterError("kappa > 2n + alpha - 1 violated")
    if fam == "jacobi-manova":
        if not a > -1:
            raise ParameterError("alpha > -1 violated")
        if not b > -1:
            raise ParameterError("beta > -1 violated")
        if spec.correlated:
            if abs(k - (n - 1)) < 1e-12:
                raise ParameterError(
                    "kappa = n - 1 is a singular limit of the correlated "
                    "jacobi-manova kernel; not supported")
            if n > 2 and abs(k - (n - 2)) < 1e-12:
                raise ParameterError(
                    "kappa = n - 2 with n > 2 is a singular limit of the "
                    "correlated jacobi-manova kernel; not supported")


def _sigma_ascending(spec: EnsembleSpec) -> np.ndarray:
    return np.sort(np.asarray(spec.sigma, dtype=float))


def _grade_power(exponent: float) -> float:
    """Panel grading order for an endpoint factor x**exponent, exponent > -1."""
    if exponent >= 0 and float(exponent).is_integer():
        return 1.0
    return float(min(8, max(1, math.ceil(4.0 / (1.0 + exponent)))))


def _jk_grid(n: int):
    j = np.arange(1, n + 1)
    return j[:, None], j[None, :]


def _phi_expm1(z):
    """expm1(z)/z with its removable singularity at z = 0."""
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z, np.expm1(safe) / safe)


def _log1p_over(z):
    """log1p(z)/z with its removable singularity at z = 0."""
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, np.log1p(safe) / safe)


# ---------------------------------------------------------------------------
# Determinant-kind kernels
# ---------------------------------------------------------------------------


class _WeightMomentKernel:
    """Kernel whose entries are moments int la**(j+k-2) w(la) over a segment.

    Subclasses supply ``half_tail(p, x)`` = int_x^inf la**p w(la) dla for
    x >= 0 (with half_tail(p, 0) the half-line value) for an even weight on
    the whole real line.
    """

    def __init__(self, n):
        self.n = n
        self._p = np.arange(0, 2 * n - 1, dtype=float)

    def half_tail(self, p, x):
        raise NotImplementedError

    def _moments(self, a, b):
        """int_a^b la**p w(la) dla for all p, even weight w."""
        p = self._p
        parity = np.where(p % 2 == 0, 1.0, -1.0)
        if a >= 0:
            hi = np.zeros_like(p) if b == math.inf else self.half_tail(p, b)
            return self.half_tail(p, a) - hi
        if b <= 0:
            lo = np.zeros_like(p) if a == -math.inf else self.half_tail(p, -a)
            return parity * (self.half_tail(p, -b) - lo)
        left = np.zeros_like(p) if a == -math.inf else self.half_tail(p, -a)
        right = np.zeros_like(p) if b == math.inf else self.half_tail(p, b)
        zero = self.half_tail(p, 0.0)
        return parity * (zero - left) + (zero - right)

    def seg(self, a, b):
        mom = self._moments(a, b)
        j, k = _jk_grid(self.n)
        return mom[j + k - 2]

    def weight(self, x):
        raise NotImplementedError

    def wfg(self, x):
        j, k = _jk_grid(self.n)
        return self.weight(x) * x ** (j + k - 2.0)


class GaussWignerUncorrelatedKernel(_WeightMomentKernel):
    """Squared-Vandermonde ensemble with weight exp(-la^2)."""

    def half_tail(self, p, x):
        return 0.5 * gamma_upper((p + 1.0) / 2.0, x * x)

    def weight(self, x):
        return math.exp(-x * x)


class CauchyLorentzIUncorrelatedKernel(_WeightMomentKernel):
    """Squared-Vandermonde ensemble with weight (1+la^2)**-kappa."""

    def __init__(self, n, kappa):
        super().__init__(n)
        self.kappa = kappa

    def half_tail(self, p, x):
        a = self.kappa - (p + 1.0) / 2.0
        if x == 0.0:
            return 0.5 * beta((p + 1.0) / 2.0, a)
        return 0.5 * beta_inc_negarg(1.0 / (x * x), a, 1.0 - self.kappa)

    def weight(self, x):
        return (1.0 + x * x) ** (-self.kappa)


class LaguerreWishartCorrelatedKernel:
    """Entries sig_k**(j+alpha) * incomplete-gamma differences."""

    def __init__(self, n, alpha, sigma):
        self.n = n
        self.alpha = alpha
        self.sigma = np.asarray(sigma, dtype=float)

    def seg(self, a, b):
        j, k = _jk_grid(self.n)
        c = j + self.alpha
        sig = self.sigma[None, :]
        pref = sig ** c
        if a == 0.0:
            if b == math.inf:
                return pref * gamma(c)
            return pref * gamma_lower(c, b / sig)
        hi = 0.0 if b == math.inf else gamma_upper(c, b / sig)
        return pref * (gamma_upper(c, a / sig) - hi)

    def wfg(self, x):
        j, _ = _jk_grid(self.n)
        return x ** (j + self.alpha - 1.0) * np.exp(-x / self.sigma[None, :])


class LaguerreWishartUncorrelatedKernel:
    """Entries are incomplete gammas of combined order j+k+alpha-1."""

    def __init__(self, n, alpha):
        self.n = n
        self.alpha = alpha

    def seg(self, a, b):
        j, k = _jk_grid(self.n)
        c = j + k + self.alpha - 1.0
        if a == 0.0:
            if b == math.inf:
                return gamma(c)
            return gamma_lower(c, b)
        hi = 0.0 if b == math.inf else gamma_upper(c, b)
        return gamma_upper(c, a) - hi

    def wfg(self, x):
        j, k = _jk_grid(self.n)
        return x ** (j + k + self.alpha - 2.0) * math.exp(-x)


class _PowerLawSegment:
    """Segments of int x**(c1-1) (1+x)**(bpar-1) on (0, inf), columnwise scaled.

    ``c1`` indexes the power at the origin, ``c2`` the complementary power
    governing the tail; both evaluate through the real negative-argument
    incomplete-beta combination.  The split at x = scale keeps every call a
    difference of same-magnitude positive quantities.
    """

    def __init__(self, c1, c2, bpar):
        self.c1 = np.asarray(c1, dtype=float)
        self.c2 = np.asarray(c2, dtype=float)
        self.bpar = bpar

    def lower(self, u):
        # int_0^u in scaled units
        return beta_inc_negarg(u, self.c1, self.bpar)

    def upper(self, v):
        # int_{1/v}^inf in scaled units (v = scale/x)
        return beta_inc_negarg(v, self.c2, self.bpar)

    def segment(self, ua, ub):
        """Integral between scaled abscissae ua < ub (ub may be inf)."""
        if ua == 0.0 and ub == math.inf:
            return self.lower(1.0) + self.upper(1.0)
        if ub == math.inf:
            return self.upper(1.0 / ua)
        if ub <= 1.0:
            return self.lower(ub) - (self.lower(ua) if ua > 0 else 0.0)
        if ua >= 1.0:
            return self.upper(1.0 / ua) - self.upper(1.0 / ub)
        return (self.lower(1.0) - (self.lower(ua) if ua > 0 else 0.0)
                + self.upper(1.0) - self.upper(1.0 / ub))


class CauchyLorentzIICorrelatedKernel:
    """Power-law columns (1 + la/sig_k)**(n-kappa-1) with weight la**alpha."""

    def __init__(self, n, alpha, kappa, sigma):
        self.n = n
        self.alpha = alpha
        self.kappa = kappa
        self.sigma = np.asarray(sigma, dtype=float)
        j = np.arange(1, n + 1, dtype=float)
        self._seg = _PowerLawSegment(
            c1=j + alpha, c2=kappa - alpha - n + 1.0 - j, bpar=n - kappa)

    def seg(self, a, b):
        out = np.empty((self.n, self.n))
        j = np.arange(1, self.n + 1, dtype=float)
        for kcol, sig in enumerate(self.sigma):
            ua = a / sig
            ub = math.inf if b == math.inf else b / sig
            out[:, kcol] = sig ** (j + self.alpha) * self._seg.segment(ua, ub)
        return out

    def wfg(self, x):
        j, _ = _jk_grid(self.n)
        sig = self.sigma[None, :]
        return x ** (j + self.alpha - 1.0) * (1.0 + x / sig) ** (self.n - self.kappa - 1.0)


class CauchyLorentzIIUncorrelatedKernel:
    """Weight la**alpha (1+la)**-kappa with squared Vandermonde."""

    def __init__(self, n, alpha, kappa):
        self.n = n
        self.alpha = alpha
        self.kappa = kappa
        j, k = _jk_grid(n)
        self._seg = _PowerLawSegment(
            c1=(j + k + alpha - 1.0), c2=(kappa - alpha - j - k + 1.0),
            bpar=1.0 - kappa)

    def seg(self, a, b):
        return self._seg.segment(a, math.inf if b == math.inf else b)

    def wfg(self, x):
        j, k = _jk_grid(self.n)
        return x ** (j + k + self.alpha - 2.0) * (1.0 + x) ** (-self.kappa)


class JacobiUncorrelatedKernel:
    """Weight la**alpha (1-la)**beta on (0,1); incomplete-beta entries."""

    def __init__(self, n, alpha, beta_exp):
        self.n = n
        self.alpha = alpha
        self.beta_exp = beta_exp

    def _c(self):
        j, k = _jk_grid(self.n)
        return j + k + self.alpha - 1.0

    def _lower(self, x):
        # int_0^x
        return beta_inc(x, self._c(), self.beta_exp + 1.0)

    def _upper(self, x):
        # int_x^1, reflected so the power at the moving endpoint stays accurate
        return beta_inc(1.0 - x, self.beta_exp + 1.0, self._c())

    def seg(self, a, b):
        if b <= 0.5:
            lo = self._lower(a) if a > 0 else 0.0
            return self._lower(b) - lo
        if a >= 0.5:
            hi = self._upper(b) if b < 1 else 0.0
            return self._upper(a) - hi
        lo = self._lower(a) if a > 0 else 0.0
        hi = self._upper(b) if b < 1 else 0.0
        return (self._lower(0.5) - lo) + (self._upper(0.5) - hi)

    def wfg(self, x):
        j, k = _jk_grid(self.n)
        return x ** (j + k + self.alpha - 2.0) * (1.0 - x) ** self.beta_exp


class JacobiCorrelatedGeneralKernel:
    """General-exponent correlated kernel on (0,1) via the two-variable
    hypergeometric primitive; the full-segment value uses its Gauss reduction."""

    def __init__(self, n, alpha, beta_exp, kappa, sigma):
        self.n = n
        self.alpha = alpha
        self.beta_exp = beta_exp
        self.kappa = kappa
        self.sigma = np.asarray(sigma, dtype=float)

    def _full(self):
        j = np.arange(1, self.n + 1, dtype=float)[:, None]
        z = 1.0 - 1.0 / self.sigma[None, :]
        return beta(j + self.alpha, self.beta_exp + 1.0) * hyp2f1(
            j + self.alpha, self.kappa - self.n + 1.0,
            j + self.alpha + self.beta_exp + 1.0, z)

    def _primitive(self, x):
        """int_0^x of the column integrand, elementwise over (j, k)."""
        if x == 0.0:
            return np.zeros((self.n, self.n))
        if x == 1.0:
            return self._full()
        out = np.empty((self.n, self.n))
        for jrow in range(self.n):
            a = jrow + 1 + self.alpha
            for kcol, sig in enumerate(self.sigma):
                y = (1.0 - 1.0 / sig) * x
                f1 = appell_f1(a, -self.beta_exp, self.kappa - self.n + 1.0,
                               a + 1.0, x, y)
                out[jrow, kcol] = x ** a / a * f1
        return out

    def seg(self, a, b):
        return self._primitive(b) - self._primitive(a)

    def wfg(self, x):
        j, _ = _jk_grid(self.n)
        sig = self.sigma[None, :]
        return (x ** (j + self.alpha - 1.0) * (1.0 - x) ** self.beta_exp
                * (1.0 + (1.0 / sig - 1.0) * x) ** (self.n - self.kappa - 1.0))


class TransformedKernel:
    """Determinant-kind kernel carried through a monotone change of variables.

    Segments map directly; the pointwise product picks up the jacobian, so the
    transformed densities are densities of the transformed variable.
    """

    def __init__(self, base, forward, dforward):
        self.base = base
        self.n = base.n
        self.forward = forward
        self.dforward = dforward

    def seg(self, a, b):
        return self.base.seg(self.forward(a), self.forward(b))

    def wfg(self, x):
        return self.base.wfg(self.forward(x)) * self.dforward(x)


# ---------------------------------------------------------------------------
# Pfaffian-kind kernels
# ---------------------------------------------------------------------------


class _PfaffianKernelBase:
    """Shared plumbing: pair bookkeeping and axis decompositions."""

    def __init__(self, n):
        self.n = n
        self.pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]

    def pair_vals(self, lam, mu):
        raise NotImplementedError

    def axis_cells(self, a, b):
        raise NotImplementedError

    def border_seg(self, a, b):
        raise NotImplementedError

    def wg(self, x):
        raise NotImplementedError

    def h_matrix(self):
        raise NotImplementedError

    def _assemble_h(self, top, border):
        n = self.n
        dim = n if n % 2 == 0 else n + 1
        h = np.zeros((dim, dim))
        h[:n, :n] = top
        if dim > n:
            h[:n, n] = border
            h[n, :n] = -border
        return h


def _even_axis_cells(a, b, tail_at) -> list[AxisMap]:
    """Axis pieces for an even-weight kernel on the whole real line.

    Negative pieces are built as explicit mirrors of positive ones, so that a
    reflected query performs identical floating-point work.
    """
    if a == -math.inf and b == math.inf:
        return [MirrorMap(tail_at(0.0)), tail_at(0.0)]
    if b == math.inf:
        if a >= 0:
            return [tail_at(a)]
        return [MirrorMap(AffineMap(0.0, -a)), tail_at(0.0)]
    if a == -math.inf:
        if b <= 0:
            return [MirrorMap(tail_at(-b))]
        return [MirrorMap(tail_at(0.0)), AffineMap(0.0, b)]
    if a >= 0:
        return [AffineMap(a, b)]
    if b <= 0:
        return [MirrorMap(AffineMap(-b, -a))]
    return [MirrorMap(AffineMap(0.0, -a)), AffineMap(0.0, b)]


def _positive_axis_cells(a, b, tail_at, origin_grade: float, split_at: float) -> list[AxisMap]:
    """Axis pieces for kernels on (0, inf) with a power factor at the origin."""

    def lower(lo, hi):
        if lo == 0.0 and origin_grade > 1.0:
            return PowerMap(0.0, hi, origin_grade)
        return AffineMap(lo, hi)

    if b == math.inf:
        if a >= split_at:
            return [tail_at(a)]
        return [lower(a, split_at), tail_at(split_at)]
    if b - a <= 0:
        return []
    return [lower(a, b)]


class GaussWignerCorrelatedKernel(_PfaffianKernelBase):
    """Gaussian columns exp(-la^2/sig_j^2) against the odd ratio factor."""

    def __init__(self, n, sigma):
        super().__init__(n)
        self.sigma = np.asarray(sigma, dtype=float)
        self._inv2 = 1.0 / self.sigma ** 2
        self._scale = float(np.max(self.sigma))

    def pair_vals(self, lam, mu):
        lam = np.asarray(lam, dtype=float)
        mu = np.asarray(mu, dtype=float)
        delta = mu * mu - lam * lam
        vsq = (mu - lam) ** 2
        out = []
        for j, k in self.pairs:
            c = self._inv2[j] - self._inv2[k]
            ea = np.exp(-(lam * lam) * self._inv2[j]) * np.exp(-(mu * mu) * self._inv2[k])
            out.append(vsq * c * ea * _phi_expm1(-delta * c))
        return np.stack(out)

    def axis_cells(self, a, b):
        return _even_axis_cells(a, b, lambda x: SemiInfiniteMap(x, self._scale, +1.0))

    def border_seg(self, a, b):
        sig = self.sigma
        lo = -1.0 if a == -math.inf else erf(a / sig)
        hi = 1.0 if b == math.inf else erf(b / sig)
        return 0.5 * math.sqrt(math.pi) * sig * (hi - lo)

    def wg(self, x):
        return np.exp(-(x * x) * self._inv2)

    def h_matrix(self):
        s = self.sigma
        top = (math.pi * np.outer(s, s) * (s[None, :] ** 2 - s[:, None] ** 2)
               / (s[None, :] ** 2 + s[:, None] ** 2))
        return self._assemble_h(top, math.sqrt(math.pi) * s)


class CauchyLorentzICorrelatedKernel(_PfaffianKernelBase):
    """Even power-law columns (1+la^2/sig_j^2)**(-m), m = kappa-n+1."""

    def __init__(self, n, kappa, sigma):
        super().__init__(n)
        self.kappa = kappa
        self.m = kappa - n + 1.0
        self.sigma = np.asarray(sigma, dtype=float)
        self._s2 = self.sigma ** 2
        self._scale = float(np.max(self.sigma))
        self._tail_p = 2.0 * self.m  # per-axis decay of the pair integrand

    def _g(self, x, j):
        return (1.0 + (x * x) / self._s2[j]) ** (-self.m)

    def pair_vals(self, lam, mu):
        lam = np.asarray(lam, dtype=float)
        mu = np.asarray(mu, dtype=float)
        delta = mu * mu - lam * lam
        vsq = (mu - lam) ** 2
        lam2 = lam * lam
        out = []
        for j, k in self.pairs:
            cj = self._s2[j] + lam2
            ck = self._s2[k] + lam2
            # (B-A)/delta, kept finite as mu^2 -> la^2
            psi = self.m * (_log1p_over(delta / cj) / cj - _log1p_over(delta / ck) / ck)
            ea = self._g(lam, j) * self._g(mu, k)
            out.append(vsq * psi * ea * _phi_expm1(-delta * psi))
        return np.stack(out)

    def axis_cells(self, a, b):
        return _even_axis_cells(
            a, b, lambda x: AlgebraicTailMap(x, self._scale, self._tail_p, +1.0))

    def _border_primitive(self, x):
        # int_0^x (1 + t^2/sig^2)^(-m) dt, elementwise over sigma
        if x == 0.0:
            return np.zeros(self.n)
        if x == math.inf:
            return (0.5 * math.sqrt(math.pi) * self.sigma
                    * gamma(self.m - 0.5) / gamma(self.m))
        return x * hyp2f1(0.5, self.m, 1.5, -(x * x) / self._s2)

    def border_seg(self, a, b):
        if a == -math.inf:
            left = -self._border_primitive(math.inf)
        else:
            left = np.sign(a) * self._border_primitive(abs(a))
        if b == math.inf:
            right = self._border_primitive(math.inf)
        else:
            right = np.sign(b) * self._border_primitive(abs(b))
        return right - left

    def wg(self, x):
        return (1.0 + (x * x) / self._s2) ** (-self.m)

    def h_matrix(self):
        m = self.m
        s = self.sigma
        pref = math.pi * gamma(m - 0.5) ** 2 / (2.0 * gamma(m) ** 2)

        def term(sj, sk):
            z = 1.0 - (sj * sj) / (sk * sk)
            return (sj ** (2.0 * m) * sk ** (2.0 - 2.0 * m)
                    * hyp2f1(2.0 * m - 1.0, m + 0.5, 2.0 * m, z))

        top = np.zeros((self.n, self.n))
        for j in range(self.n):
            for k in range(j + 1, self.n):
                v = pref * (term(s[j], s[k]) - term(s[k], s[j]))
                top[j, k] = v
                top[k, j] = -v
        border = math.sqrt(math.pi) * s * gamma(m - 0.5) / gamma(m)
        return self._assemble_h(top, border)


class BuresHallCorrelatedKernel(_PfaffianKernelBase):
    """Exponential columns exp(-la/sig_j) with weight la**alpha on (0, inf)."""

    def __init__(self, n, alpha, sigma):
        super().__init__(n)
        self.alpha = alpha
        self.sigma = np.asarray(sigma, dtype=float)
        self._inv = 1.0 / self.sigma
        self._scale = float(np.max(self.sigma)) * (1.0 + max(alpha, 0.0))
        self._grade = _grade_power(alpha)

    def pair_vals(self, lam, mu):
        lam = np.asarray(lam, dtype=float)
        mu = np.asarray(mu, dtype=float)
        v = mu - lam
        ssum = lam + mu
        ratio = np.where(ssum > 0, v / np.where(ssum > 0, ssum, 1.0), 0.0)
        wprod = (lam * mu) ** self.alpha
        out = []
        for j, k in self.pairs:
            c = self._inv[j] - self._inv[k]
            ea = np.exp(-lam * self._inv[j]) * np.exp(-mu * self._inv[k])
            out.append(wprod * ratio * ea * v * c * _phi_expm1(-v * c))
        return np.stack(out)

    def axis_cells(self, a, b):
        return _positive_axis_cells(
            a, b, lambda x: SemiInfiniteMap(x, self._scale, +1.0),
            self._grade, self._scale)

    def border_seg(self, a, b):
        sig = self.sigma
        c = self.alpha + 1.0
        if a == 0.0:
            lo = np.zeros(self.n)
        else:
            lo = gamma_lower(c, a / sig)
        hi = gamma(c) if b == math.inf else gamma_lower(c, b / sig)
        return sig ** c * (hi - lo)

    def wg(self, x):
        return x ** self.alpha * np.exp(-x * self._inv)

    def h_matrix(self):
        a = self.alpha
        s = self.sigma
        pref = gamma(a + 1.0) ** 2 / 2.0

        def term(sj, sk):
            z = 1.0 - sj / sk
            return sj ** (2.0 * a + 2.0) * hyp2f1(2.0 * a + 2.0, a + 2.0, 2.0 * a + 3.0, z)

        top = np.zeros((self.n, self.n))
        for j in range(self.n):
            for k in range(j + 1, self.n):
                v = pref * (term(s[j], s[k]) - term(s[k], s[j]))
                top[j, k] = v
                top[k, j] = -v
        border = s ** (a + 1.0) * gamma(a + 1.0)
        return self._assemble_h(top, border)


class BuresHallUncorrelatedKernel(_PfaffianKernelBase):
    """Monomial columns la**(j-1) with weight la**alpha e**-la on (0, inf)."""

    def __init__(self, n, alpha):
        super().__init__(n)
        self.alpha = alpha
        self._scale = float(n + max(alpha, 0.0) + 1.0)
        self._grade = _grade_power(alpha)

    def pair_vals(self, lam, mu):
        lam = np.asarray(lam, dtype=float)
        mu = np.asarray(mu, dtype=float)
        v = mu - lam
        ssum = lam + mu
        ratio = np.where(ssum > 0, v / np.where(ssum > 0, ssum, 1.0), 0.0)
        base = (lam * mu) ** self.alpha * np.exp(-lam) * np.exp(-mu) * ratio
        out = []
        for j, k in self.pairs:
            bracket = lam ** j * mu ** k - lam ** k * mu ** j
            out.append(base * bracket)
        return np.stack(out)

    def axis_cells(self, a, b):
        return _positive_axis_cells(
            a, b, lambda x: SemiInfiniteMap(x, self._scale, +1.0),
            self._grade, self._scale)

    def border_seg(self, a, b):
        j = np.arange(1, self.n + 1, dtype=float)
        c = j + self.alpha
        lo = np.zeros(self.n) if a == 0.0 else gamma_lower(c, a)
        hi = gamma(c) if b == math.inf else gamma_lower(c, b)
        return hi - lo

    def wg(self, x):
        j = np.arange(1, self.n + 1, dtype=float)
        return x ** (j + self.alpha - 1.0) * math.exp(-x)

    def h_matrix(self):
        n, a = self.n, self.alpha
        j, k = _jk_grid(n)
        top = ((k - j) / (j + k + 2.0 * a)) * gamma(j + a) * gamma(k + a)
        border = gamma(np.arange(1, n + 1, dtype=float) + a)
        return self._assemble_h(top, border)


# ---------------------------------------------------------------------------
# Closed-form normalisations
# ---------------------------------------------------------------------------


def _pair_product(values, func) -> float:
    out = 1.0
    for jj in range(len(values)):
        for kk in range(jj):
            out *= func(values[jj], values[kk])  # indices jj > kk
    return out


def _norm_gauss_wigner_corr(n, sigma):
    s = np.asarray(sigma, dtype=float)
    return (math.factorial(n) * math.pi ** (n / 2.0) * float(np.prod(s))
            * _pair_product(s, lambda a, b: (a * a - b * b) / (a * a + b * b)))


def _norm_gauss_wigner_uncorr(n):
    return (math.pi ** (n / 2.0) / 2.0 ** (n * (n - 1) / 2.0)
            * math.prod(math.gamma(j + 1) for j in range(1, n + 1)))


def _norm_laguerre_corr(n, alpha, sigma):
    s = np.asarray(sigma, dtype=float)
    vdm = _pair_product(s, lambda a, b: a - b)
    return (math.factorial(n) * vdm
            * math.prod(float(s[j - 1]) ** (alpha + 1) * gamma(j + alpha) for j in range(1, n + 1)))


def _norm_laguerre_uncorr(n, alpha):
    return math.prod(math.gamma(j + 1) * gamma(j + alpha) for j in range(1, n + 1))


def _norm_cl1_corr_unit_kappa(n, sigma):
    s = np.asarray(sigma, dtype=float)
    return (math.factorial(n) * math.pi ** n * float(np.prod(s))
            * _pair_product(s, lambda a, b: (a - b) / (a + b)))


def _norm_cl1_uncorr(n, kappa):
    log = (n * n - 2.0 * kappa * n + n) * math.log(2.0) + n * math.log(math.pi)
    for j in range(1, n + 1):
        log += math.lgamma(j + 1) + float(gammaln(j + 2 * kappa - 2 * n))
        log -= 2.0 * float(gammaln(j + kappa - n))
    return math.exp(log)


def _norm_cl2_corr(n, alpha, kappa, sigma):
    s = np.asarray(sigma, dtype=float)
    vdm = _pair_product(s, lambda a, b: a - b)
    out = math.factorial(n) * vdm
    for j in range(1, n + 1):
        out *= float(s[j - 1]) ** (alpha + 1) * beta(j + alpha, kappa - alpha - n + 1 - j)
    return out


def _norm_cl2_uncorr(n, alpha, kappa):
    log = math.lgamma(n + 1)
    for j in range(1, n + 1):
        log += (math.lgamma(j) + float(gammaln(j + alpha))
                + float(gammaln(kappa - alpha - n - j + 1)) - float(gammaln(kappa - j + 1)))
    return math.exp(log)


def _norm_jacobi_uncorr(n, alpha, beta_exp):
    log = 0.0
    for j in range(1, n + 1):
        log += (math.lgamma(j + 1) + float(gammaln(j + alpha)) + float(gammaln(j + beta_exp))
                - float(gammaln(j + alpha + beta_exp + n)))
    return math.exp(log)


def _norm_bures_corr_half(n, sigma):
    r = np.sqrt(np.asarray(sigma, dtype=float))
    return (math.factorial(n) * math.pi ** (n / 2.0) * float(np.prod(r))
            * _pair_product(r, lambda a, b: (a - b) / (a + b)))


def _norm_bures_uncorr(n, alpha):
    log = (n / 2.0) * math.log(math.pi) - (n * n + 2.0 * alpha * n) * math.log(2.0)
    for j in range(1, n + 1):
        log += (math.lgamma(j + 1) + float(gammaln(j + 2 * alpha + 1))
                - float(gammaln(j + alpha + 0.5)))
    return math.exp(log)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_gauss_wigner(spec: EnsembleSpec, **opts) -> EnsembleModel:
    validate_spec(spec)
    dom = family_domain(spec.family)
    if spec.correlated:
        sig = _sigma_ascending(spec)
        kern = GaussWignerCorrelatedKernel(spec.n, sig)
        return make_pfaffian_model(spec, dom, kern,
                                   closed_norm=_norm_gauss_wigner_corr(spec.n, sig), **opts)
    kern = GaussWignerUncorrelatedKernel(spec.n)
    return make_determinant_model(spec, dom, kern,
                                  closed_norm=_norm_gauss_wigner_uncorr(spec.n), **opts)


def build_laguerre_wishart(spec: EnsembleSpec, **opts) -> EnsembleModel:
    validate_spec(spec)
    dom = family_domain(spec.family)
    sf_closed = pdf_closed = None
    if spec.alpha == 0.0:
        if spec.correlated:
            rate = float(np.sum(1.0 / np.asarray(spec.sigma, dtype=float)))
        else:
            rate = float(spec.n)
        sf_closed = lambda x, r=rate: math.exp(-r * x)
        pdf_closed = lambda x, r=rate: r * math.exp(-r * x)
    if spec.correlated:
        sig = _sigma_ascending(spec)
        kern = LaguerreWishartCorrelatedKernel(spec.n, spec.alpha, sig)
        closed = _norm_laguerre_corr(spec.n, spec.alpha, sig)
    else:
        kern = LaguerreWishartUncorrelatedKernel(spec.n, spec.alpha)
        closed = _norm_laguerre_uncorr(spec.n, spec.alpha)
    return make_determinant_model(spec, dom, kern, closed_norm=closed,
                                  sf_min_closed=sf_closed, pdf_min_closed=pdf_closed,
                                  **opts)


def build_cauchy_lorentz_i(spec: EnsembleSpec, **opts) -> EnsembleModel:
    validate_spec(spec)
    dom = family_domain(spec.family)
    if spec.correlated:
        sig = _sigma_ascending(spec)
        kern = CauchyLorentzICorrelatedKernel(spec.n, spec.kappa, sig)
        closed = None
        if abs(spec.kappa - spec.n) < 1e-12:
            closed = _norm_cl1_corr_unit_kappa(spec.n, sig)
        return make_pfaffian_model(spec, dom, kern, closed_norm=closed, **opts)
    kern = CauchyLorentzIUncorrelatedKernel(spec.n, spec.kappa)
    return make_determinant_model(spec, dom, kern,
                                  closed_norm=_norm_cl1_uncorr(spec.n, spec.kappa), **opts)


def build_cauchy_lorentz_ii(spec: EnsembleSpec, **opts) -> EnsembleModel:
    validate_spec(spec)
    dom = family_domain(spec.family)
    if spec.correlated:
        sig = _sigma_ascending(spec)
        kern = CauchyLorentzIICorrelatedKernel(spec.n, spec.alpha, spec.kappa, sig)
        closed = _norm_cl2_corr(spec.n, spec.alpha, spec.kappa, sig)
    else:
        kern = CauchyLorentzIIUncorrelatedKernel(spec.n, spec.alpha, spec.kappa)
        closed = _norm_cl2_uncorr(spec.n, spec.alpha, spec.kappa)
    return make_determinant_model(spec, dom, kern, closed_norm=closed, **opts)


def build_jacobi_manova(spec: EnsembleSpec, route: Optional[str] = None,
                        **opts) -> EnsembleModel:
    """Compile a jacobi-manova spec.

    Correlated specs on the exponent surface beta = kappa - alpha - 2n default
    to the transformed power-law route (``route="transformed"``); other
    correlated specs use the general two-variable hypergeometric route
    (``route="general"``).  ``route`` forces one, where applicable.
    """
    validate_spec(spec)
    dom = family_domain(spec.family)
    if not spec.correlated:
        kern = JacobiUncorrelatedKernel(spec.n, spec.alpha, spec.beta)
        return make_determinant_model(
            spec, dom, kern,
            closed_norm=_norm_jacobi_uncorr(spec.n, spec.alpha, spec.beta), **opts)

    on_surface = abs(spec.beta - (spec.kappa - spec.alpha - 2 * spec.n)) <= 1e-12
    if route is None:
        route = "transformed" if on_surface else "general"
    if route not in ("transformed", "general"):
        raise ParameterError(f"unknown jacobi route {route!r}")
    sig = _sigma_ascending(spec)
    if route == "transformed":
        if not on_surface:
            raise ParameterError(
                "transformed route requires beta = kappa - alpha - 2n")
        base = CauchyLorentzIICorrelatedKernel(spec.n, spec.alpha, spec.kappa, sig)

        def fwd(x):
            return math.inf if x >= 1.0 else x / (1.0 - x)

        def dfwd(x):
            return 1.0 / (1.0 - x) ** 2

        kern = TransformedKernel(base, fwd, dfwd)
        closed = _norm_cl2_corr(spec.n, spec.alpha, spec.kappa, sig)
        return make_determinant_model(spec, dom, kern, closed_norm=closed, **opts)
    kern = JacobiCorrelatedGeneralKernel(spec.n, spec.alpha, spec.beta, spec.kappa, sig)
    return make_determinant_model(spec, dom, kern, closed_norm=None, **opts)


def build_bures_hall(spec: EnsembleSpec, **opts) -> EnsembleModel:
    validate_spec(spec)
    dom = family_domain(spec.family)
    if spec.correlated:
        sig = _sigma_ascending(spec)
        kern = BuresHallCorrelatedKernel(spec.n, spec.alpha, sig)
        closed = None
        if abs(spec.alpha + 0.5) < 1e-12:
            closed = _norm_bures_corr_half(spec.n, sig)
        return make_pfaffian_model(spec, dom, kern, closed_norm=closed, **opts)
    kern = BuresHallUncorrelatedKernel(spec.n, spec.alpha)
    return make_pfaffian_model(spec, dom, kern,
                               closed_norm=_norm_bures_uncorr(spec.n, spec.alpha), **opts)


_BUILDERS = {
    "gauss-wigner": build_gauss_wigner,
    "laguerre-wishart": build_laguerre_wishart,
    "cauchy-lorentz-1": build_cauchy_lorentz_i,
    "cauchy-lorentz-2": build_cauchy_lorentz_ii,
    "jacobi-manova": build_jacobi_manova,
    "bures-hall": build_bures_hall,
}


def build(spec: EnsembleSpec, **opts) -> EnsembleModel:
    """Compile a spec into an immutable evaluator model."""
    family_domain(spec.family)
    return _BUILDERS[spec.family](spec, **opts)
