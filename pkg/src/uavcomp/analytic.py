"""Distance laws, Gamma approximations and the coverage / rate formulas.

Two analytic models are offered.

``model="unconditional"`` uses one Gamma law for the desired amplitude sum T
and one for the aggregate interference I, built from unconditional moments
with the interference integrated from the origin.

``model="conditional"`` (the default) conditions on the horizontal distances
of the four serving UAVs.  Given those, T is a sum of four independent terms
and I is a Campbell sum over the annulus beyond the fourth server, so both
are moment-matched to Gamma laws *conditionally* and the final metric is
averaged over the ordered-distance law by tensor Gauss quadrature.  This is
the model that matches Monte-Carlo to within the acceptance tolerances; the
unconditional model is kept as a baseline and for checking that the double
integral and the parabolic-cylinder rate expressions agree.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp
from scipy.linalg import eigh_tridiagonal

from .channel import FadingParams
from .errors import ConfigError, DomainError, NumericError
from .geometry import HeightLaw
from .specialfn import QuadratureSpec, integrate, log_pcf_scaled

_TIGHT = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-11, max_subdivisions=4000)


@dataclass(frozen=True)
class GammaApprox:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0 and math.isfinite(self.shape) and math.isfinite(self.scale)):
            raise NumericError(f"invalid Gamma approximation shape={self.shape} scale={self.scale}")

    @classmethod
    def from_moments(cls, mean: float, var: float) -> "GammaApprox":
        if not var > 0:
            raise NumericError(
                f"non-positive variance {var:.3e} (mean {mean:.3e}); the Gamma fit is out of model"
            )
        return cls(mean * mean / var, var / mean)

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def var(self) -> float:
        return self.shape * self.scale**2

    def cdf(self, x):
        return sp.gammainc(self.shape, np.asarray(x, dtype=float) / self.scale)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self.logpdf(x))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (self.shape - 1) * np.log(x) - x / self.scale - self.shape * math.log(self.scale) - math.lgamma(self.shape)


@dataclass(frozen=True)
class NetworkParams:
    """Network quantities shared by every analytic formula.

    ``density`` is in UAVs per m².  ``outer_radius`` truncates the interference
    field (None means an infinite plane); set it to the Monte-Carlo sampling
    radius when comparing against simulations on a finite disk.
    """

    density: float = 16e-6
    alpha: float = 2.8
    fading: FadingParams = field(default_factory=FadingParams)
    height_law: HeightLaw = field(default_factory=HeightLaw)
    outer_radius: float | None = None
    comp_size: int = 4

    def __post_init__(self):
        if not self.density > 0:
            raise ConfigError(f"density must be positive, got {self.density}")
        if not self.alpha >= 2:
            raise ConfigError(f"alpha must be >= 2, got {self.alpha}")
        if self.outer_radius is not None and not self.outer_radius > 0:
            raise ConfigError("outer_radius must be positive or None")
        if self.comp_size < 1:
            raise ConfigError("comp_size must be >= 1")

    @property
    def lam_pi(self) -> float:
        return self.density * math.pi


# ---------------------------------------------------------------------------
# Distance laws


def nearest_distance_pdf(n: int, params: NetworkParams, r):
    """Density of the horizontal distance to the n-th nearest UAV."""
    if n < 1:
        raise DomainError("rank n must be >= 1")
    r = np.asarray(r, dtype=float)
    lp = params.lam_pi
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = math.log(2) + n * math.log(lp) - math.lgamma(n) + (2 * n - 1) * np.log(r) - lp * r * r
        out = np.where(r > 0, np.exp(logf), 0.0 if n > 1 else 0.0)
    return out if out.ndim else float(out)


def serving_distance_pdf(n: int, params: NetworkParams, x):
    """Density of the slant distance to the n-th horizontally nearest UAV.

    Change of variables ``d = sqrt(r² + h²)`` applied to the ranked horizontal
    law and averaged over the height law:
    ``f(x) = E_h[2 (λπ)^n x (x²−h²)^{n−1} exp(−λπ(x²−h²)) / Γ(n) ; h < x]``.
    """
    lp = params.lam_pi
    law = params.height_law

    def kernel(xv, h):
        s = xv * xv - h * h
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.exp(math.log(2) + n * math.log(lp) - math.lgamma(n) + (n - 1) * np.log(s) - lp * s) * xv
        return np.where(s > 0, val, 0.0) if n > 1 else np.where(s >= 0, val, 0.0)

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    lo, hi = law.bounds
    for k, xv in enumerate(xs):
        if law.kind == "fixed" or lo == hi:
            out[k] = float(kernel(xv, np.array([lo]))[0]) if xv > lo or (n == 1 and xv == lo) else 0.0
            continue
        top = min(xv, hi)
        if top <= lo:
            out[k] = 0.0
            continue
        r = integrate(lambda h: kernel(xv, h), lo, top, QuadratureSpec(abs_tol=1e-300, rel_tol=1e-10))
        out[k] = r.value / (hi - lo)
    return out if np.ndim(x) else float(out[0])


def moment_d_neg(n: int, exponent: float, params: NetworkParams, spec: QuadratureSpec | None = None) -> float:
    """``E[d_n^{-exponent}]`` for the slant distance to the n-th server.

    With ``u = λπ r²`` the ranked horizontal law becomes Gamma(n, 1), so the
    moment is ``E_u E_h[(u/λπ + h²)^{-exponent/2}]``.
    """
    if not exponent > 0:
        raise DomainError("exponent must be positive")
    lp = params.lam_pi
    hn, hw = params.height_law.nodes_weights(48)
    h2 = hn * hn

    def g(u):
        u = np.asarray(u)[:, None]
        base = np.exp(-(exponent / 2) * np.log(u / lp + h2))
        with np.errstate(divide="ignore"):
            logw = (n - 1) * np.log(u) - u - math.lgamma(n)
        return (base @ hw) * np.exp(logw[:, 0])

    r = integrate(g, 0.0, math.inf, spec or _TIGHT)
    return r.value


# ---------------------------------------------------------------------------
# Desired amplitude sum T


def _amp_moments(f: FadingParams) -> tuple[float, float]:
    return f.amplitude_mean(), f.omega


def lemma1_params(params: NetworkParams, *, variant: str = "unconditional", via: str = "closed_form") -> GammaApprox:
    """Gamma law for ``T = Σ d_i^{-α/2} |h_i|`` over the CoMP set.

    ``variant="unconditional"`` uses the closed-form moment expressions, which
    treat the ranked distances as independent and use Ω for the cross
    fading moment.  ``variant="exact"`` uses the correct cross moments
    (E|h|² only on the diagonal, μ_h² off it) and the joint law of the
    ranked distances.  ``via`` picks, for the unconditional variant, either the
    closed ν / θ expressions or plain moment matching; the two are
    algebraically identical and serve as a consistency check.
    """
    if params.comp_size != 4 and variant == "exact":
        raise ConfigError("exact signal moments are implemented for four serving UAVs")
    alpha = params.alpha
    mu, omega = _amp_moments(params.fading)
    if variant == "unconditional":
        k = params.comp_size
        e_half = [moment_d_neg(i, alpha / 2, params) for i in range(1, k + 1)]
        e_full = [moment_d_neg(i, alpha, params) for i in range(1, k + 1)]
        s1 = math.fsum(e_half)
        cross = math.fsum(e_half[i] * e_half[j] for i in range(k) for j in range(k) if i != j)
        bracket = math.fsum(e_full) + cross
        if via == "closed_form":
            m = params.fading.m
            g_ratio = math.exp(math.lgamma(m) - math.lgamma(m + 0.5))
            denom = m * g_ratio**2 * bracket - s1 * s1
            if not denom > 0:
                raise NumericError("signal shape denominator is non-positive")
            nu = s1 * s1 / denom
            theta = math.sqrt(m * omega) * g_ratio / s1 * bracket - s1 / (g_ratio * math.sqrt(m / omega))
            return GammaApprox(nu, theta)
        if via == "moments":
            mean = mu * s1
            var = omega * bracket - mean * mean
            return GammaApprox.from_moments(mean, var)
        raise ConfigError(f"unknown route {via!r}")
    if variant == "exact":
        mean, second = _exact_t_moments(params)
        return GammaApprox.from_moments(mean, second - mean * mean)
    raise ConfigError(f"unknown signal-law variant {variant!r}")


def _uniform_avg(rho2, h2, p):
    """Mean over r² ~ U(0, ρ²) of (r² + h²)^{-p}; broadcasts."""
    if abs(p - 1.0) < 1e-12:
        return np.log1p(rho2 / h2) / rho2
    return ((rho2 + h2) ** (1 - p) - h2 ** (1 - p)) / ((1 - p) * rho2)


def _exact_t_moments(params: NetworkParams) -> tuple[float, float]:
    # condition on the 4th server: the inner three are i.i.d. uniform in r²
    lp = params.lam_pi
    alpha = params.alpha
    mu, omega = _amp_moments(params.fading)
    hn, hw = params.height_law.nodes_weights(48)
    h2 = (hn * hn)[None, :]

    def parts(u):
        rho2 = np.asarray(u)[:, None] / lp
        a1 = _uniform_avg(rho2, h2, alpha / 4) @ hw
        a2 = _uniform_avg(rho2, h2, alpha / 2) @ hw
        b1 = ((rho2 + h2) ** (-alpha / 4)) @ hw
        b2 = ((rho2 + h2) ** (-alpha / 2)) @ hw
        mean = mu * (3 * a1 + b1)
        var = 3 * (omega * a2 - mu * mu * a1 * a1) + (omega * b2 - mu * mu * b1 * b1)
        w = np.asarray(u) ** 3 * np.exp(-np.asarray(u)) / 6.0
        return mean, var, w

    m1 = integrate(lambda u: parts(u)[0] * parts(u)[2], 0.0, math.inf, _TIGHT).value
    m2 = integrate(lambda u: (parts(u)[1] + parts(u)[0] ** 2) * parts(u)[2], 0.0, math.inf, _TIGHT).value
    return m1, m2


def signal_ccdf(approx: GammaApprox, x):
    """CCDF of ``S = T²`` under a Gamma law for T."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("signal_ccdf needs x >= 0")
    out = sp.gammaincc(approx.shape, np.sqrt(x) / approx.scale)
    return out if out.ndim else float(out)


def signal_pdf(approx: GammaApprox, x):
    """Density of ``S = T²`` under a Gamma law for T."""
    x = np.asarray(x, dtype=float)
    nu, th = approx.shape, approx.scale
    with np.errstate(divide="ignore"):
        logf = (nu - 2) / 2 * np.log(x) - np.sqrt(x) / th - math.log(2) - nu * math.log(th) - math.lgamma(nu)
    out = np.where(x > 0, np.exp(logf), 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Aggregate interference I


def lemma2_params(params: NetworkParams) -> GammaApprox:
    """Closed-form interference Gamma law over the whole plane.

    The x-integrals run over ``(0, ∞)``, so the serving UAVs are not
    excluded, and are evaluated by adaptive quadrature for each height node.
    The scale equals Campbell's variance-to-mean ratio, but the shape carries
    an extra factor m/Ω, so the implied mean is m/Ω times Campbell's mean.
    The conditional model does not share this; it uses Campbell moments.
    """
    alpha = params.alpha
    if not alpha > 2:
        raise DomainError("interference integrals diverge for alpha <= 2")
    m, omega = params.fading.m, params.fading.omega
    hn, hw = params.height_law.nodes_weights(48)

    def radial(p):
        vals = []
        for h in hn:
            vals.append(integrate(lambda x: x * (x * x + h * h) ** (-p), 0.0, math.inf, _TIGHT).value)
        return float(np.dot(hw, vals))

    a = radial(alpha / 2)
    b = radial(alpha)
    lam = params.density
    nu = 2 * m * m * math.pi * lam * a * a / ((m + 1) * omega * b)
    theta = (m + 1) * omega * b / (m * a)
    return GammaApprox(nu, theta)


def annulus_interference_moments(params: NetworkParams, rho2, hn=None, hw=None):
    """Mean and variance of I from UAVs with horizontal distance in (ρ, R_out).

    Campbell's theorem with Gamma(m, Ω/m) powers; ``rho2`` may be an array.
    """
    alpha = params.alpha
    m, omega = params.fading.m, params.fading.omega
    if hn is None:
        hn, hw = params.height_law.nodes_weights(48)
    h2 = (hn * hn)[None, :]
    rho2 = np.atleast_1d(np.asarray(rho2, dtype=float))[:, None]

    def prim(p):
        # ∫_ρ^{R} x (x²+h²)^{-p} dx
        inner = (rho2 + h2) ** (1 - p)
        if params.outer_radius is None:
            outer = 0.0
        else:
            outer = (params.outer_radius**2 + h2) ** (1 - p)
        return ((inner - outer) / (2 * (p - 1))) @ hw

    lam = params.density
    mean = 2 * math.pi * lam * omega * prim(alpha / 2)
    var = 2 * math.pi * lam * (m + 1) * omega**2 / m * prim(alpha)
    return mean, var


# ---------------------------------------------------------------------------
# SIR law, coverage and rate for one (T, I) Gamma pair


def sir_pdf(sig: GammaApprox, intf: GammaApprox, z, spec: QuadratureSpec | None = None):
    """Density of ``T²/I`` for independent Gamma T and I, by quadrature.

    With ``x = θ' y`` the inner integral becomes
    ``∫ y^{ν/2+ν'-1} exp(-y - sqrt(θ' z y)/θ) dy``, integrated adaptively.
    """
    nu, th, nup, thp = sig.shape, sig.scale, intf.shape, intf.scale
    spec = spec or QuadratureSpec(abs_tol=1e-300, rel_tol=1e-10)
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.zeros_like(zs)
    kappa = nu / 2 + nup - 1
    # shift by the log of the integrand's peak to keep exp() in range
    for k, zv in enumerate(zs):
        if zv < 0:
            raise DomainError("sir_pdf needs z >= 0")
        if zv == 0:
            out[k] = 0.0 if nu > 2 else (math.inf if nu < 2 else float("nan"))
            continue
        c = math.sqrt(thp * zv) / th
        logpref = (nu - 2) / 2 * math.log(zv) + nu / 2 * math.log(thp) - math.log(2) - nu * math.log(th) - math.lgamma(nu) - math.lgamma(nup)
        if kappa > 0:
            # stationary point of κ ln y − y − c√y, solved as a quadratic in √y
            root = 2 * kappa / (math.sqrt(0.25 * c * c + 4 * kappa) + 0.5 * c)
            ypk = root * root
        else:
            ypk = None  # monotone integrand; scale at the grid maximum
        inner = _log_integral(lambda y: kappa * np.log(y) - y - c * np.sqrt(y), spec, ypk)
        out[k] = math.exp(logpref + inner)
    return out if np.ndim(z) else float(out[0])


def _log_integral(logf, spec, ypk: float | None = None) -> float:
    """log ∫_0^∞ exp(logf(y)) dy, scaled by the integrand's maximum.

    ``ypk`` is the location of the maximum when known; otherwise it is taken
    from a coarse logarithmic grid.  The variable is rescaled to ``w = y/ypk``
    so the mass sits at O(1) whatever the magnitude of ``ypk``.
    """
    if ypk is None:
        grid = np.geomspace(1e-12, 1e6, 800)
        vals = logf(grid)
        ypk = float(grid[int(np.argmax(vals))])
    peak = float(logf(np.array([ypk]))[0])

    def g(w):
        y = np.maximum(w * ypk, 1e-300)
        return np.where(w > 0, np.exp(logf(y) - peak), 0.0)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = integrate(g, 0.0, math.inf, spec, breakpoints=(0.05, 0.25, 1.0, 4.0, 16.0))
    if not r.value > 0:
        raise NumericError("log-integral vanished")
    return peak + math.log(r.value * ypk)


def pair_coverage(sig: GammaApprox, intf: GammaApprox, gamma_th, spec: QuadratureSpec | None = None):
    """Coverage ``P(T² > γ I)`` for a single Gamma pair by adaptive quadrature.

    Integrates the interference density against the regularized upper
    incomplete Gamma of T, in ``u = ln(I/θ')``.  On that scale the integrand
    is smooth, and its mass stays resolvable when a large γ pushes it
    towards I = 0 (near ``u* = 2 ln(ν/c)``), so tail values keep their
    relative accuracy.
    """
    nu, th, nup, thp = sig.shape, sig.scale, intf.shape, intf.scale
    spec = spec or QuadratureSpec(abs_tol=1e-300, rel_tol=1e-10)
    gs = np.atleast_1d(np.asarray(gamma_th, dtype=float))
    out = np.empty_like(gs)
    u_hi = math.log(nup + 40.0 + 10.0 * math.sqrt(nup))
    for k, g in enumerate(gs):
        if not g > 0:
            raise DomainError("coverage threshold must be positive")
        c = math.sqrt(g * thp) / th
        u_star = 2 * math.log(nu / c)
        u_lo = min(u_star, math.log(nup)) - 46.0 / nup - 5.0

        def f(u):
            y = np.exp(u)
            return np.exp(nup * u - y - math.lgamma(nup)) * sp.gammaincc(nu, c * np.exp(0.5 * u))

        cuts = tuple(sorted({min(max(v, u_lo + 1e-9), u_hi - 1e-9) for v in (u_star - 3, u_star, u_star + 3, math.log(nup))}))
        out[k] = min(1.0, max(0.0, integrate(f, u_lo, u_hi, spec, breakpoints=cuts).value))
    return out if np.ndim(gamma_th) else float(out[0])


def _rate_prefactor_log(sig: GammaApprox, intf: GammaApprox) -> float:
    nu, th, nup, thp = sig.shape, sig.scale, intf.shape, intf.scale
    return -(math.log(2) + nu * math.log(th) + nup * math.log(thp) + math.lgamma(nu) + math.lgamma(nup))


def pair_rate_integral(sig: GammaApprox, intf: GammaApprox, spec: QuadratureSpec | None = None) -> float:
    """``E[ln(1 + SIR)]`` as the double integral of ln(1+z) against the SIR pdf."""
    spec = spec or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-10)
    inner_spec = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12)

    def f(z):
        return np.log1p(z) * np.array([sir_pdf(sig, intf, float(v), inner_spec) for v in z])

    return _integrate_log_scale(f, sig, intf, spec)


def _integrate_log_scale(f, sig: GammaApprox, intf: GammaApprox, spec: QuadratureSpec) -> float:
    """``∫_0^∞ f(z) dz`` for an SIR integrand, after ``z = z0·e^{±t}``.

    The SIR density has an algebraic tail ``z^{-ν'-1}``; for small ν' the
    integrand ``ln(1+z) f_SIR(z)`` then decays too slowly for a map onto a
    finite interval, while in ``t`` both tails decay exponentially, at rate
    about ν' above ``z0`` and ν/2 + 1 below it.  Each side is cut where that
    exponential falls under 1e-20 (and before ``z`` leaves the double range).
    """
    z0 = sig.mean**2 / intf.mean
    room_up = 650.0 - max(math.log(z0), 0.0)
    room_down = 650.0 + min(math.log(z0), 0.0)
    t_up = min(room_up, 50.0 / intf.shape + 10.0)
    t_down = min(room_down, 50.0 / (sig.shape / 2 + 1) + 10.0)

    def side(t_max, sign):
        def g(t):
            z = z0 * np.exp(sign * t)
            return f(z) * z

        cuts = tuple(c for c in (0.5, 2.0, 5.0, 12.0, 30.0, 80.0) if c < t_max)
        return integrate(g, 0.0, t_max, spec, breakpoints=cuts).value

    return side(t_up, 1.0) + side(t_down, -1.0)


def pair_rate_pcf(sig: GammaApprox, intf: GammaApprox, spec: QuadratureSpec | None = None) -> float:
    """Ergodic rate via the parabolic-cylinder form of the inner integral.

    Uses ``∫_0^∞ x^{v-1} e^{-βx²-γx} dx = (2β)^{-v/2} Γ(v) e^{γ²/8β} D_{-v}(γ/√(2β))``
    with ``v = ν + 2ν'``.  Relative to the printed single-integral form this
    carries the factor ``2Γ(ν + 2ν')`` produced by the identity.
    """
    nu, th, nup, thp = sig.shape, sig.scale, intf.shape, intf.scale
    v = nu + 2 * nup
    if not (v > 0 and thp > 0):
        raise DomainError("parabolic-cylinder rate needs nu + 2 nu' > 0 and theta' > 0")
    spec = spec or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-10)
    logc = _rate_prefactor_log(sig, intf) - v / 2 * math.log(2 / thp) + math.log(2) + math.lgamma(v)
    k = thp / (2 * th * th)

    def f(z):
        out = np.empty(len(z))
        for i, zv in enumerate(z):
            if zv <= 0:
                out[i] = 0.0
                continue
            sign, logd = log_pcf_scaled(-v, math.sqrt(k * zv))
            out[i] = sign * math.exp(logc + (nu - 2) / 2 * math.log(zv) + logd) * math.log1p(zv) if sign else 0.0
        return out

    return _integrate_log_scale(f, sig, intf, spec)


# ---------------------------------------------------------------------------
# Mixtures of Gamma pairs


def gamma_rule(n: int, shape: float) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss rule for expectations over a Gamma(shape, 1) variable.

    Golub-Welsch on the generalized-Laguerre Jacobi matrix; the weights are
    the squared first eigenvector components, so they sum to one without ever
    forming Γ(shape) (which overflows for the large interference shapes).
    """
    a = shape - 1.0
    k = np.arange(1, n)
    diag = 2 * np.arange(n) + 1 + a
    off = np.sqrt(k * (k + a))
    nodes, vecs = eigh_tridiagonal(diag, off)
    w = vecs[0] ** 2
    return nodes, w / w.sum()


@dataclass(frozen=True)
class GammaPairMixture:
    """A finite mixture of independent (T, I) Gamma pairs.

    Arrays are aligned: component k has probability ``weights[k]``, T law
    Gamma(nu[k], theta[k]) and I law Gamma(nu_i[k], theta_i[k]).
    """

    weights: np.ndarray
    nu: np.ndarray
    theta: np.ndarray
    nu_i: np.ndarray
    theta_i: np.ndarray

    @classmethod
    def single(cls, sig: GammaApprox, intf: GammaApprox) -> "GammaPairMixture":
        one = lambda v: np.array([float(v)])  # noqa: E731
        return cls(one(1.0), one(sig.shape), one(sig.scale), one(intf.shape), one(intf.scale))

    def __len__(self):
        return len(self.weights)

    def _chunks(self, size=256):
        for s in range(0, len(self), size):
            yield slice(s, s + size)

    def amplitude_cdf(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.reshape(-1)
        out = np.zeros_like(flat)
        for sl in self._chunks():
            out += self.weights[sl] @ sp.gammainc(self.nu[sl, None], flat[None, :] / self.theta[sl, None])
        return out.reshape(t.shape)

    def signal_cdf(self, s):
        return self.amplitude_cdf(np.sqrt(np.asarray(s, dtype=float)))

    def interference_cdf(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros_like(flat)
        for sl in self._chunks():
            out += self.weights[sl] @ sp.gammainc(self.nu_i[sl, None], flat[None, :] / self.theta_i[sl, None])
        return out.reshape(x.shape)

    def _y_rule(self, n):
        return {a: gamma_rule(n, a) for a in np.unique(self.nu_i)}

    def coverage(self, gamma_th, n_nodes: int = 64):
        """``P(SIR > γ)`` mixed over components.

        Two Gauss rules are available per component: over I (the T tail
        probability is smooth in I while its cutoff ``y* = (ν/c)²`` lies in
        the bulk of the I law) and over T (accurate once γ is large enough
        that the cutoff drops below the bulk, where the first rule sees a
        step between its smallest nodes, or when ν' < 1).  Each
        (component, γ) uses the one that suits it.
        """
        gs = np.atleast_1d(np.asarray(gamma_th, dtype=float))
        out = np.zeros(len(gs))
        # c[k, g] = sqrt(γ θ'_k) / θ_k ; use the I rule where y* >= 0.1 ν'.
        # Below ν' = 1 the I density is singular at zero and the T rule wins.
        c = np.sqrt(gs[None, :] * self.theta_i[:, None]) / self.theta[:, None]
        use_i = ((self.nu[:, None] / c) ** 2 >= 0.1 * self.nu_i[:, None]) & (self.nu_i[:, None] >= 1.0)
        for a, (y, w) in self._y_rule(n_nodes).items():
            sel = self.nu_i == a
            q = sp.gammaincc(self.nu[sel, None, None], c[sel, :, None] * np.sqrt(y[None, None, :])) @ w
            out += self.weights[sel] @ np.where(use_i[sel], q, 0.0)
        if not use_i.all():
            for a in np.unique(self.nu[~use_i.all(axis=1)]):
                t, w = gamma_rule(n_nodes, a)
                sel = (self.nu == a) & ~use_i.all(axis=1)
                x = (self.theta[sel, None, None] * t[None, None, :]) ** 2 / (gs[None, :, None] * self.theta_i[sel, None, None])
                q = sp.gammainc(self.nu_i[sel, None, None], x) @ w
                out += self.weights[sel] @ np.where(use_i[sel], 0.0, q)
        out = np.clip(out, 0.0, 1.0)
        return out if np.ndim(gamma_th) else float(out[0])

    def sir_cdf(self, z, n_nodes: int = 64):
        z = np.asarray(z, dtype=float)
        return 1.0 - self.coverage(np.maximum(z, 1e-300), n_nodes)

    def rate(self, n_t: int = 40, n_y: int = 64) -> float:
        """``E[ln(1 + T²/I)]`` by tensor Gauss-Laguerre rules in T and I.

        Written as ``E[ln(T² + I)] − E[ln I]`` with the second term exact
        (digamma), so the rule never sees the log singularity of ``1/I`` at
        zero, which matters when the interference shape is below one.
        """
        rules = self._y_rule(n_y)
        total = 0.0
        for k in range(len(self)):
            y, wy = rules[self.nu_i[k]]
            t, wt = gamma_rule(n_t, self.nu[k])
            both = np.log(self.theta[k] ** 2 * t[:, None] ** 2 + self.theta_i[k] * y[None, :])
            e_log_i = float(sp.digamma(self.nu_i[k])) + math.log(self.theta_i[k])
            total += self.weights[k] * (float(wt @ both @ wy) - e_log_i)
        return total

    def rate_by_coverage(self, spec: QuadratureSpec | None = None) -> float:
        """Same rate through ``∫ P(SIR > z)/(1+z) dz``; slower, used as a cross-check."""
        spec = spec or QuadratureSpec(abs_tol=1e-9, rel_tol=1e-8)
        return integrate(lambda z: self.coverage(np.maximum(z, 1e-300)) / (1 + z), 0.0, math.inf, spec).value


@dataclass(frozen=True)
class ConditionalRule:
    """Quadrature sizes for the conditional model."""

    n_outer: int = 24  # fourth-server variable u4 ~ Gamma(4, 1)
    n_inner: int = 6  # each inner server, r² uniform below the fourth
    n_height: int = 40


def conditional_mixture(params: NetworkParams, rule: ConditionalRule | None = None) -> GammaPairMixture:
    """Mixture of Gamma pairs conditioned on the four serving distances.

    With ``u = λπ r²`` the fourth server has ``u4 ~ Gamma(4, 1)`` and, given
    it, the three inner servers are i.i.d. uniform on ``(0, u4)``.  For each
    quadrature node the amplitude sum T is a sum of independent terms whose
    height-and-fading moments are computed exactly, and I has Campbell
    moments over the annulus beyond the fourth server.
    """
    rule = rule or ConditionalRule()
    k = params.comp_size
    lp = params.lam_pi
    alpha = params.alpha
    mu, omega = _amp_moments(params.fading)
    hn, hw = params.height_law.nodes_weights(rule.n_height)
    h2 = hn * hn

    u4, w4 = gamma_rule(rule.n_outer, k)
    s, ws = np.polynomial.legendre.leggauss(rule.n_inner)
    s, ws = 0.5 * (s + 1), 0.5 * ws

    # exchangeable inner servers: sum over multisets with multinomial counts
    combos, cweights = [], []
    for combo in itertools.combinations_with_replacement(range(rule.n_inner), k - 1):
        counts = np.bincount(combo, minlength=rule.n_inner)
        mult = math.factorial(k - 1) / np.prod([math.factorial(c) for c in counts])
        combos.append(combo)
        cweights.append(mult * np.prod(ws[list(combo)]))
    combos = np.array(combos, dtype=int).reshape(len(combos), k - 1)
    cweights = np.array(cweights)

    def hmom(u):
        d2 = np.asarray(u)[..., None] / lp + h2
        return (d2 ** (-alpha / 4)) @ hw, (d2 ** (-alpha / 2)) @ hw

    e_i, v_i = annulus_interference_moments(params, u4 / lp, hn, hw)
    nu_i = e_i**2 / v_i
    th_i = v_i / e_i

    weights, nus, ths, nuis, this = [], [], [], [], []
    for j, uj in enumerate(u4):
        b1, b2 = hmom(uj)
        a1, a2 = hmom(s * uj)  # per inner node
        mean = mu * (a1[combos].sum(1) + b1)
        var = (omega * a2[combos] - mu * mu * a1[combos] ** 2).sum(1) + (omega * b2 - mu * mu * b1**2)
        if np.any(var <= 0):
            raise NumericError("conditional amplitude variance is non-positive")
        weights.append(w4[j] * cweights)
        nus.append(mean**2 / var)
        ths.append(var / mean)
        nuis.append(np.full(len(combos), nu_i[j]))
        this.append(np.full(len(combos), th_i[j]))
    cat = np.concatenate
    return GammaPairMixture(cat(weights), cat(nus), cat(ths), cat(nuis), cat(this))


def unconditional_mixture(params: NetworkParams) -> GammaPairMixture:
    return GammaPairMixture.single(lemma1_params(params), lemma2_params(params))


def coverage_probability(gamma_th, params: NetworkParams, *, model: str = "conditional"):
    """Coverage probability ``P(SIR > γ_th)``; ``gamma_th`` is linear, not dB."""
    gs = np.asarray(gamma_th, dtype=float)
    if np.any(gs <= 0):
        raise DomainError("coverage threshold must be positive")
    if model == "unconditional":
        return pair_coverage(lemma1_params(params), lemma2_params(params), gamma_th)
    if model == "conditional":
        return conditional_mixture(params).coverage(gamma_th)
    raise ConfigError(f"unknown analytic model {model!r}")


def ergodic_rate(params: NetworkParams, form: str = "integral", *, model: str = "conditional") -> float:
    """Ergodic rate in nats.

    For the single-pair unconditional model ``form`` selects the double-integral or
    the parabolic-cylinder expression.  The conditional model evaluates the
    same double integral per mixture component with Gauss-Laguerre rules;
    ``form="pcf"`` there applies the parabolic-cylinder expression per
    component (slow, intended for spot checks).
    """
    if form not in ("integral", "pcf"):
        raise ConfigError(f"unknown rate form {form!r}")
    if model == "unconditional":
        sig, intf = lemma1_params(params), lemma2_params(params)
        return pair_rate_integral(sig, intf) if form == "integral" else pair_rate_pcf(sig, intf)
    if model == "conditional":
        mix = conditional_mixture(params)
        if form == "integral":
            return mix.rate()
        return float(
            sum(
                w * pair_rate_pcf(GammaApprox(a, b), GammaApprox(c, d))
                for w, a, b, c, d in zip(mix.weights, mix.nu, mix.theta, mix.nu_i, mix.theta_i)
            )
        )
    raise ConfigError(f"unknown analytic model {model!r}")
