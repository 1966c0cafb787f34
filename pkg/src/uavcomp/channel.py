"""Nakagami-m fading draws and SIR assembly for one deployment.

Transmit powers are normalized to one and thermal noise is neglected, so the
SIR is a pure ratio of path-loss-weighted fading terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NoInterferenceError
from .geometry import CompSet, Deployment
from .rng import as_generator


@dataclass(frozen=True)
class FadingParams:
    m: float = 2.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.m >= 0.5:
            raise ConfigError(f"fading.m must be >= 0.5, got {self.m}")
        if not self.omega > 0:
            raise ConfigError(f"fading.omega must be positive, got {self.omega}")

    def amplitude_mean(self) -> float:
        """E[|h|] for the Nakagami amplitude."""
        return math.exp(math.lgamma(self.m + 0.5) - math.lgamma(self.m)) * math.sqrt(self.omega / self.m)


@dataclass(frozen=True)
class SirSample:
    signal_power: float
    interference_power: float
    sir: float

    def __post_init__(self):
        if self.signal_power < 0 or not self.interference_power > 0:
            raise ValueError("SirSample needs S >= 0 and I > 0")


def sample_nakagami_amplitude(p: FadingParams, rng_seed=None, size=None):
    """Amplitude draws ``sqrt(Gamma(m, Ω/m))``; a scalar when ``size`` is None."""
    rng = as_generator(rng_seed)
    return np.sqrt(rng.gamma(p.m, p.omega / p.m, size=size))


def sample_interference_power(p: FadingParams, rng_seed=None, size=None):
    """Post-beamforming interference power ``|g|² ~ Gamma(m, Ω/m)``."""
    rng = as_generator(rng_seed)
    return rng.gamma(p.m, p.omega / p.m, size=size)


def slant_distances(dep: Deployment, ue_xyz=(0.0, 0.0, 0.0)) -> np.ndarray:
    ue = np.asarray(ue_xyz, dtype=float)
    diff = dep.positions - ue
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def sir_from_draws(d3, alpha, serving, amplitudes, powers) -> SirSample:
    """Assemble S, I and SIR from distances and given fading draws.

    ``serving`` holds indices of the cooperating UAVs; every other UAV
    interferes.  ``amplitudes`` and ``powers`` are indexed like ``d3`` so the
    same draws can be reused across serving-set choices.
    """
    d3 = np.asarray(d3, dtype=float)
    mask = np.zeros(len(d3), dtype=bool)
    mask[list(serving)] = True
    if mask.all():
        raise NoInterferenceError("every UAV is serving; interference is undefined")
    s = float(np.sum(d3[mask] ** (-alpha / 2) * np.asarray(amplitudes)[mask])) ** 2
    i = float(np.sum(d3[~mask] ** (-alpha) * np.asarray(powers)[~mask]))
    return SirSample(s, i, s / i)


def compute_sir(
    dep: Deployment,
    comp: CompSet,
    ue_xyz,
    alpha: float,
    fading: FadingParams,
    rng_seed=None,
) -> SirSample:
    """SIR at ``ue_xyz`` with ``comp`` serving jointly and all others interfering."""
    if alpha < 2:
        raise ConfigError(f"path-loss exponent must be >= 2, got {alpha}")
    rng = as_generator(rng_seed)
    n = len(dep)
    if n <= len(comp.uav_indices):
        raise NoInterferenceError("deployment has no UAV outside the CoMP set")
    amps = sample_nakagami_amplitude(fading, rng, size=n)
    pows = sample_interference_power(fading, rng, size=n)
    return sir_from_draws(slant_distances(dep, ue_xyz), alpha, comp.uav_indices, amps, pows)
