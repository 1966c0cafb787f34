"""Special functions and adaptive quadrature for the analytic performance formulas.

Everything here is a pure function of its arguments.  The Gamma-family
functions accept real arguments only; complex support is out of scope.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import mpmath
import numpy as np
from scipy import special as _sp

from .errors import DomainError, NumericError


# ---------------------------------------------------------------------------
# Gamma family


def gamma_fn(a: float) -> float:
    """Gamma function for real ``a``; negative non-integers are supported."""
    a = float(a)
    if not math.isfinite(a):
        raise DomainError(f"gamma_fn: non-finite argument {a!r}")
    if a <= 0 and a == math.floor(a):
        raise DomainError(f"gamma_fn: pole at non-positive integer {a!r}")
    return math.gamma(a)


def rgamma(a: float) -> float:
    """1/Gamma(a), equal to zero at the poles."""
    a = float(a)
    if a <= 0 and a == math.floor(a):
        return 0.0
    return float(_sp.rgamma(a))


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Non-regularized upper incomplete Gamma ``Γ(a, x)`` for a > 0, x ≥ 0."""
    if not (a > 0):
        raise DomainError(f"upper_incomplete_gamma: need a > 0, got {a!r}")
    if not (x >= 0):
        raise DomainError(f"upper_incomplete_gamma: need x >= 0, got {x!r}")
    return float(_sp.gammaincc(a, x)) * math.gamma(a)


def gamma_q(a, x):
    """Regularized upper incomplete Gamma ``Γ(a, x)/Γ(a)``, vectorized."""
    return _sp.gammaincc(a, x)


def gamma_p(a, x):
    """Regularized lower incomplete Gamma, vectorized."""
    return _sp.gammainc(a, x)


def poly_P(a: float, n: int, x: float) -> float:
    """The n-th order polynomial ``sum_k (-1)^k C(n,k) Γ(k+1-a) x^k``."""
    if n < 0 or int(n) != n:
        raise DomainError(f"poly_P: n must be a non-negative integer, got {n!r}")
    total = 0.0
    for k in range(int(n) + 1):
        total += (-1) ** k * math.comb(int(n), k) * gamma_fn(k + 1 - a) * x**k
    return total


# ---------------------------------------------------------------------------
# Confluent hypergeometric and parabolic cylinder functions

_MAX_TERMS = 20000


def _series_1f1(a, b, z, one, eps):
    # Kahan-compensated power series; works for float and mpmath.mpf alike.
    total = one
    comp = one * 0
    term = one
    peak = abs(one)
    n = 0
    while True:
        term = term * (a + n) / (b + n) * z / (n + 1)
        n += 1
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        peak = max(peak, abs(term))
        if term == 0 or (n > abs(a) and abs(term) <= eps * abs(total)):
            return total, peak
        if n >= _MAX_TERMS:
            raise NumericError(
                f"kummer_1f1({float(a)}, {float(b)}, {float(z)}) did not converge "
                f"after {n} terms (last term {float(term):.3e}, sum {float(total):.3e})"
            )


def kummer_1f1(a: float, b: float, z: float, *, dps: int | None = None):
    """Confluent hypergeometric function ``1F1(a; b; z)``.

    Evaluated by its power series.  Negative ``z`` goes through Kummer's
    transformation so the summed terms are of one sign whenever ``b > a > 0``.
    With ``dps`` set, the series runs in mpmath arithmetic at that many
    decimal digits and an ``mpf`` is returned.
    """
    if b <= 0 and b == math.floor(b):
        raise DomainError(f"kummer_1f1: b must not be a non-positive integer, got {b!r}")
    if dps is None:
        if z < 0:
            aa, pref, zz = float(b - a), math.exp(z), float(-z)
        else:
            aa, pref, zz = float(a), 1.0, float(z)
        total, peak = _series_1f1(aa, float(b), zz, 1.0, 1e-17)
        if total != 0 and peak <= 1e4 * abs(total):
            return pref * total
        # alternating series lost too many digits: redo with enough guard digits
        lost = math.log10(peak) - math.log10(abs(total)) if total != 0 else math.log10(peak) + 20
        return float(kummer_1f1(a, b, z, dps=int(25 + max(lost, 0) * 1.5)))
    with mpmath.workdps(dps):
        a_, b_, z_ = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(z)
        eps = mpmath.mpf(10) ** (-dps)
        if z_ < 0:
            return mpmath.exp(z_) * _series_1f1(b_ - a_, b_, -z_, mpmath.mpf(1), eps)[0]
        return _series_1f1(a_, b_, z_, mpmath.mpf(1), eps)[0]


def _pcf_terms(p, z, dps):
    # the two additive terms of exp(z^2/4) D_p(z), without the 2^(p/2) factor
    x = z * z / 2
    if dps is None:
        c1 = math.sqrt(math.pi) * rgamma((1 - p) / 2)
        c2 = math.sqrt(2 * math.pi) * z * rgamma(-p / 2)
        t1 = c1 * kummer_1f1(-p / 2, 0.5, x) if c1 != 0 else 0.0
        t2 = c2 * kummer_1f1((1 - p) / 2, 1.5, x) if c2 != 0 else 0.0
        return t1, t2
    with mpmath.workdps(dps):
        p_, z_ = mpmath.mpf(p), mpmath.mpf(z)
        x_ = z_ * z_ / 2
        c1 = mpmath.sqrt(mpmath.pi) * mpmath.rgamma((1 - p_) / 2)
        c2 = mpmath.sqrt(2 * mpmath.pi) * z_ * mpmath.rgamma(-p_ / 2)
        t1 = c1 * kummer_1f1((-p_) / 2, mpmath.mpf(1) / 2, x_, dps=dps) if c1 != 0 else 0
        t2 = c2 * kummer_1f1((1 - p_) / 2, mpmath.mpf(3) / 2, x_, dps=dps) if c2 != 0 else 0
        return t1, t2


def _pcf_asymptotic(p: float, z: float) -> float | None:
    # large-z expansion of exp(z^2/4) D_p(z) / z^p; None if it cannot reach 1e-16
    s2 = 2.0 * z * z
    term = 1.0
    total = 1.0
    for s in range(200):
        nxt = -term * (-p + 2 * s) * (-p + 2 * s + 1) / ((s + 1) * s2)
        if abs(nxt) >= abs(term) and s > 0:
            return None
        term = nxt
        total += term
        if abs(term) <= 1e-17 * abs(total):
            return total
    return None


_MAX_SERIES_DPS = 400


def _pcf_scaled_any(p: float, z: float):
    """exp(z²/4) D_p(z) as a float or, when that would under/overflow, an mpf."""
    p = float(p)
    z = float(z)
    if not (math.isfinite(p) and math.isfinite(z)):
        raise DomainError(f"parabolic_cylinder_d: non-finite argument p={p!r}, z={z!r}")
    if z > 0 and z * z > 4 * abs(p) + 40:
        series = _pcf_asymptotic(p, z)
        if series is not None:
            logv = p * math.log(z)
            if -700 < logv < 700:
                return math.exp(logv) * series
            with mpmath.workdps(30):
                return mpmath.power(z, p) * series
    scale = 2.0 ** (p / 2)
    t1, t2 = _pcf_terms(p, z, None)
    value = t1 - t2
    big = max(abs(t1), abs(t2))
    result = scale * value
    if math.isfinite(value) and abs(value) >= 1e-3 * big and abs(result) > 1e-290:
        return result
    # cancellation: estimate lost digits from the term size, then retry wider
    lost = z * z / (2 * math.log(10)) + abs(p) + 10
    dps = int(30 + lost)
    while dps <= _MAX_SERIES_DPS:
        t1, t2 = _pcf_terms(p, z, dps)
        with mpmath.workdps(dps):
            value = t1 - t2
            big = max(abs(t1), abs(t2))
            if value != 0 and abs(value) > big * mpmath.mpf(10) ** (-(dps - 20)):
                return +(mpmath.power(2, mpmath.mpf(p) / 2) * value)
        dps *= 2
    # beyond the series' reach
    if p < 0:
        with mpmath.workdps(30):
            return mpmath.exp(_log_pcf_integral(p, z))
    with mpmath.workdps(30):
        zz = mpmath.mpf(z)
        return mpmath.pcfd(p, zz, maxprec=20000) * mpmath.exp(zz * zz / 4)


def _log_pcf_integral(p: float, z: float) -> float:
    """log of exp(z²/4) D_p(z) for p < 0 from its Laplace-type integral.

    ``exp(z²/4) D_p(z) = Γ(-p)^{-1} ∫_0^∞ t^{-p-1} exp(-t²/2 - z t) dt``; the
    integrand is positive, so the quadrature is well conditioned.  It is
    normalized by its value at the maximizer to stay in floating range.
    """
    a = -p - 1.0
    if a > 0:
        tpk = (-z + math.sqrt(z * z + 4 * a)) / 2
    else:
        tpk = max(1e-3, 1.0 / (1.0 + abs(z)))

    def logf(t):
        with np.errstate(divide="ignore"):
            return a * np.log(t) - 0.5 * t * t - z * t

    ref = float(logf(np.array([tpk]))[0])
    spec = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-13, max_subdivisions=4000)
    r = integrate(
        lambda t: np.where(t > 0, np.exp(logf(np.maximum(t, 1e-300)) - ref), 0.0),
        0.0, math.inf, spec, breakpoints=(tpk / 4, tpk / 2, tpk, 2 * tpk, 4 * tpk),
    )
    if not r.converged or not r.value > 0:
        raise NumericError(f"parabolic_cylinder_d({p}, {z}): integral fallback failed")
    return ref + math.log(r.value) - math.lgamma(-p)


def pcf_scaled(p: float, z: float) -> float:
    """``exp(z²/4) · D_p(z)``, which stays O(z^p) for large positive z.

    The defining combination of two ₁F₁ terms cancels catastrophically as z
    grows, so the working precision is raised until the cancellation is
    absorbed; for large z the asymptotic expansion is used instead.  Values
    outside the double range come back as 0 or inf; use ``log_pcf_scaled``
    for those.
    """
    return float(_pcf_scaled_any(p, z))


def log_pcf_scaled(p: float, z: float) -> tuple[int, float]:
    """Sign and natural log of ``|exp(z²/4) D_p(z)|``."""
    v = _pcf_scaled_any(p, z)
    if isinstance(v, float):
        if v == 0:
            return 0, -math.inf
        return (1 if v > 0 else -1), math.log(abs(v))
    if v == 0:
        return 0, -math.inf
    return (1 if v > 0 else -1), float(mpmath.log(abs(v)))


def parabolic_cylinder_d(p: float, z: float) -> float:
    """Parabolic cylinder function ``D_p(z)`` from its ₁F₁ representation.

    When ``Γ((1-p)/2)`` or ``Γ(-p/2)`` sits on a pole the matching term has a
    zero coefficient and is dropped, which yields the Hermite-function values
    at non-negative integer ``p``.
    """
    scaled = pcf_scaled(p, z)
    return scaled * math.exp(-z * z / 4)


# ---------------------------------------------------------------------------
# Adaptive quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    transform: str = "auto"  # "none", "semi_infinite_exp_map" or "auto"

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise ValueError("QuadratureSpec tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("QuadratureSpec.max_subdivisions must be >= 1")
        if self.transform not in ("none", "semi_infinite_exp_map", "auto"):
            raise ValueError(f"unknown quadrature transform {self.transform!r}")


class QuadResult(NamedTuple):
    value: float
    error: float
    converged: bool
    evaluations: int


# Gauss-Kronrod 7/15 nodes on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(g, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    vals = np.asarray(g(mid + half * _NODES), dtype=float)
    if vals.shape != (15,):
        vals = np.broadcast_to(vals, (15,))
    if not np.all(np.isfinite(vals)):
        raise NumericError(f"integrand returned non-finite values on [{lo}, {hi}]")
    k = half * float(np.dot(_KW, vals))
    gs = half * float(np.dot(_GW, vals))
    return k, abs(k - gs)


def integrate(
    f: Callable,
    a: float,
    b: float = math.inf,
    spec: QuadratureSpec | None = None,
    *,
    vectorized: bool = True,
    breakpoints=(),
) -> QuadResult:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    ``b`` may be ``inf``; the half line is then mapped onto ``(0, 1)`` with
    ``t = a + u/(1-u)``.  ``f`` receives numpy arrays unless ``vectorized`` is
    False.  ``breakpoints`` split the domain into pieces integrated separately
    (useful when the mass sits far from the origin).  Failing to meet the
    tolerance within ``spec.max_subdivisions`` returns the best estimate with
    ``converged=False`` instead of raising.
    """
    spec = spec or QuadratureSpec()
    if not vectorized:
        scalar_f = f
        f = lambda t: np.array([scalar_f(float(v)) for v in np.atleast_1d(t)])  # noqa: E731
    cuts = sorted(float(c) for c in breakpoints if a < c < b)
    if cuts:
        edges = [a, *cuts, b]
        parts = [integrate(f, lo, hi, spec) for lo, hi in zip(edges[:-1], edges[1:])]
        return QuadResult(
            math.fsum(r.value for r in parts),
            math.fsum(r.error for r in parts),
            all(r.converged for r in parts),
            sum(r.evaluations for r in parts),
        )
    if math.isinf(a):
        raise DomainError("integrate: lower limit must be finite")
    if b < a:
        r = integrate(f, b, a, spec)
        return QuadResult(-r.value, r.error, r.converged, r.evaluations)
    if b == a:
        return QuadResult(0.0, 0.0, True, 0)

    use_map = math.isinf(b) or spec.transform == "semi_infinite_exp_map"
    if math.isinf(b):
        def g(u):
            # nodes next to u = 1 can round to 1.0; the mapped point is then
            # infinite and its (decaying) contribution is taken as zero
            w = 1.0 - np.asarray(u, dtype=float)
            ok = w > 0
            if ok.all():
                return f(a + u / w) / (w * w)
            out = np.zeros_like(w)
            out[ok] = np.asarray(f(a + u[ok] / w[ok]), dtype=float) / (w[ok] * w[ok])
            return out
        lo, hi = 0.0, 1.0
    elif use_map:
        # finite interval, still compressed: t = a + (b-a) * u
        def g(u):
            return (b - a) * f(a + (b - a) * u)
        lo, hi = 0.0, 1.0
    else:
        g, lo, hi = f, float(a), float(b)

    value, err = _gk15(g, lo, hi)
    heap = [(-err, 0, lo, hi, value, err)]
    total, total_err = value, err
    counter = 1
    evaluations = 15
    while total_err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if counter >= spec.max_subdivisions:
            return QuadResult(total, total_err, False, evaluations)
        _, _, l, h, v, e = heapq.heappop(heap)
        m = 0.5 * (l + h)
        v1, e1 = _gk15(g, l, m)
        v2, e2 = _gk15(g, m, h)
        evaluations += 30
        total += v1 + v2 - v
        total_err += e1 + e2 - e
        heapq.heappush(heap, (-e1, counter, l, m, v1, e1))
        heapq.heappush(heap, (-e2, counter + 1, m, h, v2, e2))
        counter += 2
        if m == l or m == h:
            return QuadResult(total, total_err, False, evaluations)
    # re-sum from the leaves so that round-off from the running updates is dropped
    total = math.fsum(item[4] for item in heap)
    total_err = math.fsum(item[5] for item in heap)
    return QuadResult(total, total_err, True, evaluations)


def integrate_value(f, a, b=math.inf, spec=None, **kw) -> float:
    """``integrate`` returning only the value; raises if the tolerance is missed."""
    r = integrate(f, a, b, spec, **kw)
    if not r.converged:
        raise NumericError(f"quadrature tolerance not met: value={r.value:.6e} err={r.error:.2e}")
    return r.value
