"""Monte-Carlo estimates of coverage and ergodic rate.

Each trial draws one deployment and one set of fading draws from a Philox
stream keyed by (master seed, trial index).  All serving-set schemes are
evaluated on those same draws (common random numbers), so scheme
comparisons share geometry and fading exactly.  Results do not depend on
how trials are split across worker threads because every statistic is
computed from the per-trial arrays in trial order.
"""

from __future__ import annotations

import csv
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import NetworkParams
from .channel import SirSample
from .errors import ConfigError
from .geometry import EDGE_FACTOR, deploy, select_comp_set
from .rng import trial_generator

PROPOSED = "proposed_delaunay4"
NO_COMP = "no_comp"
_CONV = re.compile(r"^conventional_([1-4])$")
ALL_SCHEMES = (PROPOSED, "conventional_1", "conventional_2", "conventional_3", "conventional_4", NO_COMP)
DEFAULT_GAMMA_DB = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
MAX_RESAMPLES = 100


def scheme_size(scheme: str) -> int:
    if scheme == PROPOSED:
        return 4
    if scheme == NO_COMP:
        return 1
    m = _CONV.match(scheme)
    if m:
        return int(m.group(1))
    raise ConfigError(f"unknown scheme {scheme!r}; expected one of {ALL_SCHEMES}")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class McConfig:
    trials: int = 100_000
    master_seed: int = 0
    network: NetworkParams = field(default_factory=NetworkParams)
    region_radius: float = 3000.0
    scheme: str = PROPOSED
    gamma_db: tuple[float, ...] = DEFAULT_GAMMA_DB
    edge_factor: float = EDGE_FACTOR
    conventional_metric: str = "rx_power"
    threads: int = 1

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must fit in 64 unsigned bits")
        if not self.region_radius > 0:
            raise ConfigError("region_radius must be positive")
        if not self.edge_factor >= 1:
            raise ConfigError("edge_factor must be >= 1")
        scheme_size(self.scheme)
        g = tuple(float(x) for x in self.gamma_db)
        if not g or any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigError("gamma grid must be non-empty and strictly increasing")
        object.__setattr__(self, "gamma_db", g)
        if self.conventional_metric not in ("rx_power", "distance"):
            raise ConfigError("conventional_metric must be 'rx_power' or 'distance'")
        if int(self.threads) < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def gamma_linear(self) -> np.ndarray:
        return db_to_linear(self.gamma_db)


@dataclass(frozen=True)
class MetricEstimate:
    value: float
    std_err: float
    trials_used: int

    def __post_init__(self):
        if not self.std_err >= 0:
            raise ValueError("std_err must be non-negative")


# ---------------------------------------------------------------------------
# Single trial


def _draw(cfg: McConfig, trial: int):
    """Deployment plus fading draws for one trial; resamples tiny deployments."""
    net = cfg.network
    need = max(scheme_size(s) for s in ALL_SCHEMES) + 1
    for attempt in range(MAX_RESAMPLES):
        rng = trial_generator(cfg.master_seed, trial, stream=attempt)
        dep = deploy(net.density, cfg.region_radius, net.height_law, rng, edge_factor=cfg.edge_factor)
        if len(dep) >= need:
            break
    else:
        raise ConfigError(f"deployment never reached {need} UAVs; density too low for the region")
    n = len(dep)
    m, om = net.fading.m, net.fading.omega
    amps = np.sqrt(rng.gamma(m, om / m, size=n))
    pows = rng.gamma(m, om / m, size=n)
    return dep, amps, pows, attempt


def _trial_si(cfg: McConfig, trial: int, schemes, alphas=None):
    """(S, I) per (alpha, scheme) for one shared realization, and the resample count."""
    dep, amps, pows, resampled = _draw(cfg, trial)
    alphas = (cfg.network.alpha,) if alphas is None else alphas
    horiz = np.hypot(dep.planar_points[:, 0], dep.planar_points[:, 1])
    d3 = np.hypot(horiz, dep.heights)
    n = len(d3)
    idx = np.arange(n)
    by_dist = np.lexsort((idx, horiz))
    log_d = np.log(d3)
    S = np.empty((len(alphas), len(schemes)))
    I = np.empty((len(alphas), len(schemes)))
    for a, alpha in enumerate(alphas):
        sig_terms = np.exp(-alpha / 2 * log_d) * amps
        int_terms = np.exp(-alpha * log_d) * pows
        by_rx = None
        for j, s in enumerate(schemes):
            k = scheme_size(s)
            if s in (PROPOSED, NO_COMP):
                serving = by_dist[:k]
            else:
                if by_rx is None:
                    key = d3 if cfg.conventional_metric == "distance" else -(sig_terms**2)
                    by_rx = np.lexsort((idx, key))
                serving = by_rx[:k]
            mask = np.ones(n, dtype=bool)
            mask[serving] = False
            S[a, j] = np.sum(sig_terms[serving]) ** 2
            I[a, j] = np.sum(int_terms[mask])
    return S, I, resampled


def trial_sirs(cfg: McConfig, trial: int, schemes=ALL_SCHEMES) -> tuple[dict[str, SirSample], int]:
    """SIR of every requested scheme on one shared realization, plus the resample count."""
    S, I, resampled = _trial_si(cfg, trial, tuple(schemes))
    S, I = S[0], I[0]
    return {s: SirSample(float(S[j]), float(I[j]), float(S[j] / I[j])) for j, s in enumerate(schemes)}, resampled


def serving_set(cfg: McConfig, trial: int, scheme: str) -> tuple[int, ...]:
    """Indices of the UAVs serving the UE in a trial (for inspection and tests)."""
    dep, amps, pows, _ = _draw(cfg, trial)
    k = scheme_size(scheme)
    if scheme in (PROPOSED, NO_COMP):
        return select_comp_set(dep, size=k).uav_indices
    d3 = np.hypot(np.hypot(dep.planar_points[:, 0], dep.planar_points[:, 1]), dep.heights)
    key = d3 if cfg.conventional_metric == "distance" else -(d3 ** (-cfg.network.alpha) * amps**2)
    return tuple(int(i) for i in np.lexsort((np.arange(len(d3)), key))[:k])


def run_trial(cfg: McConfig, trial_index: int) -> SirSample:
    """SIR for ``cfg.scheme`` in trial ``trial_index``; deterministic per (seed, index)."""
    return trial_sirs(cfg, trial_index, (cfg.scheme,))[0][cfg.scheme]


# ---------------------------------------------------------------------------
# Batches


@dataclass
class McSamples:
    """Per-trial S and I arrays for each scheme, in trial order."""

    signal: dict[str, np.ndarray]
    interference: dict[str, np.ndarray]
    resampled_trials: int

    @property
    def trials(self) -> int:
        return len(next(iter(self.signal.values())))

    def sir(self, scheme: str) -> np.ndarray:
        return self.signal[scheme] / self.interference[scheme]


def _chunk(cfg: McConfig, schemes, alphas, lo: int, hi: int):
    S = np.empty((len(alphas), len(schemes), hi - lo))
    I = np.empty_like(S)
    extra = 0
    for t in range(lo, hi):
        S[:, :, t - lo], I[:, :, t - lo], r = _trial_si(cfg, t, schemes, alphas)
        extra += r > 0
    return S, I, extra


def simulate_alphas(cfg: McConfig, alphas, schemes=None, *, chunk_size: int = 2000) -> dict[float, McSamples]:
    """Run all trials once and evaluate every path-loss exponent on the same draws."""
    schemes = tuple(schemes or (cfg.scheme,))
    alphas = tuple(float(a) for a in alphas)
    for s in schemes:
        scheme_size(s)
    if not alphas or any(a < 2 for a in alphas):
        raise ConfigError("path-loss exponents must be >= 2")
    bounds = [(lo, min(lo + chunk_size, cfg.trials)) for lo in range(0, cfg.trials, chunk_size)]
    work = lambda b: _chunk(cfg, schemes, alphas, *b)  # noqa: E731
    if cfg.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=int(cfg.threads)) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    S = np.concatenate([p[0] for p in parts], axis=2)
    I = np.concatenate([p[1] for p in parts], axis=2)
    extra = int(sum(p[2] for p in parts))
    return {
        alpha: McSamples({s: S[a, j] for j, s in enumerate(schemes)}, {s: I[a, j] for j, s in enumerate(schemes)}, extra)
        for a, alpha in enumerate(alphas)
    }


def simulate(cfg: McConfig, schemes=None, *, chunk_size: int = 2000) -> McSamples:
    """Run all trials for the given schemes (default: ``cfg.scheme`` only)."""
    alpha = cfg.network.alpha
    return simulate_alphas(cfg, (alpha,), schemes, chunk_size=chunk_size)[float(alpha)]


def coverage_from_sir(sir, gamma_linear) -> list[MetricEstimate]:
    sir = np.asarray(sir, dtype=float)
    n = len(sir)
    srt = np.sort(sir)
    out = []
    for g in np.atleast_1d(gamma_linear):
        p = (n - np.searchsorted(srt, g, side="right")) / n
        out.append(MetricEstimate(float(p), math.sqrt(p * (1 - p) / n), n))
    return out


def rate_from_sir(sir) -> MetricEstimate:
    x = np.log1p(np.asarray(sir, dtype=float))
    n = len(x)
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MetricEstimate(float(np.mean(x)), se, n)


def estimate_coverage(cfg: McConfig, samples: McSamples | None = None) -> list[MetricEstimate]:
    """``P(SIR > γ)`` at every grid threshold, with binomial standard errors."""
    samples = samples or simulate(cfg)
    return coverage_from_sir(samples.sir(cfg.scheme), cfg.gamma_linear)


def estimate_rate(cfg: McConfig, samples: McSamples | None = None) -> MetricEstimate:
    samples = samples or simulate(cfg)
    return rate_from_sir(samples.sir(cfg.scheme))


# ---------------------------------------------------------------------------
# Histograms


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def integral(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


def empirical_pdf(samples, bins=50, range=None, log_bins: bool = False) -> Histogram:
    """Normalized histogram of a sample stream.

    ``log_bins`` spaces the edges geometrically, which suits heavy-tailed
    SIR samples.  All-equal samples give a single narrow bin.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if len(x) < 2:
        raise ValueError("empirical_pdf needs at least two samples")
    lo, hi = (float(np.min(x)), float(np.max(x))) if range is None else map(float, range)
    if hi <= lo:
        w = max(abs(lo), 1.0) * 1e-9
        edges = np.array([lo - w / 2, lo + w / 2])
        return Histogram(edges, np.array([1.0 / w]))
    if log_bins:
        if lo <= 0:
            raise ValueError("log-spaced bins need positive samples")
        edges = np.geomspace(lo, hi, int(bins) + 1)
    else:
        edges = np.linspace(lo, hi, int(bins) + 1)
    counts, edges = np.histogram(x, bins=edges)
    density = counts / (counts.sum() * np.diff(edges))
    return Histogram(edges, density)


def ks_distance(samples, cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# ---------------------------------------------------------------------------
# CSV output


def write_coverage_csv(path, rows) -> None:
    """``rows``: iterable of (scheme, alpha, density_per_m2, m, gamma_db, MetricEstimate)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "alpha", "lambda_per_km2", "m", "gamma_db", "gamma_linear", "coverage", "std_err", "trials"])
        for scheme, alpha, dens, m, gdb, est in rows:
            w.writerow([scheme, f"{alpha:g}", f"{dens * 1e6:g}", f"{m:g}", f"{gdb:g}", f"{db_to_linear(gdb):.9g}",
                        f"{est.value:.9g}", f"{est.std_err:.9g}", est.trials_used])


def write_rate_csv(path, rows) -> None:
    """``rows``: iterable of (scheme, alpha, density_per_m2, m, MetricEstimate)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "alpha", "lambda_per_km2", "m", "rate_nats", "std_err", "trials"])
        for scheme, alpha, dens, m, est in rows:
            w.writerow([scheme, f"{alpha:g}", f"{dens * 1e6:g}", f"{m:g}", f"{est.value:.9g}", f"{est.std_err:.9g}", est.trials_used])
