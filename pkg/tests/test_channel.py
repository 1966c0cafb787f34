import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavcomp.channel import (
    FadingParams,
    compute_sir,
    sample_interference_power,
    sample_nakagami_amplitude,
    sir_from_draws,
    slant_distances,
)
from uavcomp.errors import ConfigError, NoInterferenceError
from uavcomp.geometry import Deployment, select_comp_set


class TestNakagami:
    def test_rayleigh_power(self):
        x = sample_nakagami_amplitude(FadingParams(1.0, 1.0), 1, size=100_000)
        assert abs(np.mean(x**2) - 1.0) < 0.01

    def test_amplitude_mean(self):
        x = sample_nakagami_amplitude(FadingParams(2.0, 1.0), 2, size=200_000)
        closed = math.gamma(2.5) / math.gamma(2.0) * math.sqrt(0.5)
        assert closed == pytest.approx(0.9400, abs=5e-4)
        assert abs(x.mean() - closed) < 0.005
        assert FadingParams(2.0, 1.0).amplitude_mean() == pytest.approx(closed, rel=1e-14)

    def test_deterministic(self):
        p = FadingParams()
        assert np.array_equal(sample_nakagami_amplitude(p, 5, size=10), sample_nakagami_amplitude(p, 5, size=10))

    def test_scalar_when_size_omitted(self):
        assert np.ndim(sample_nakagami_amplitude(FadingParams(), 0)) == 0

    @pytest.mark.parametrize("m, omega", [(0.4, 1.0), (2.0, 0.0), (2.0, -1.0)])
    def test_invalid(self, m, omega):
        with pytest.raises(ConfigError):
            FadingParams(m, omega)


class TestInterferencePower:
    def test_moments(self):
        g = sample_interference_power(FadingParams(2.0, 1.0), 3, size=1_000_000)
        assert abs(g.mean() - 1.0) < 0.01
        assert abs(np.mean(g**2) - 1.5) < 0.03

    def test_exponential_variance(self):
        g = sample_interference_power(FadingParams(1.0, 1.0), 4, size=400_000)
        assert g.var() == pytest.approx(1.0, rel=0.02)

    def test_scale_family(self):
        a = sample_interference_power(FadingParams(2.0, 1.0), 9, size=50)
        b = sample_interference_power(FadingParams(2.0, 2.0), 9, size=50)
        assert np.allclose(b, 2 * a, rtol=1e-14)


class TestSir:
    def test_unit_case(self):
        s = sir_from_draws([1.0, 1.0], 2.8, [0], [1.0, 7.0], [3.0, 1.0])
        assert (s.signal_power, s.interference_power, s.sir) == (1.0, 1.0, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(2.0, 5.0), st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
    def test_distance_scaling(self, alpha, k, seed):
        rng = np.random.default_rng(seed)
        d = rng.uniform(50, 3000, 9)
        amps, pows = rng.random(9) + 0.1, rng.random(9) + 0.1
        a = sir_from_draws(d, alpha, [0, 1, 2, 3], amps, pows)
        b = sir_from_draws(k * d, alpha, [0, 1, 2, 3], amps, pows)
        assert b.signal_power == pytest.approx(a.signal_power * k ** (-alpha), rel=1e-10)
        assert b.interference_power == pytest.approx(a.interference_power * k ** (-alpha), rel=1e-10)
        assert b.sir == pytest.approx(a.sir, rel=1e-10)

    def test_hand_built_deployment(self):
        pts = np.array([[30.0, 40.0], [-60.0, 0.0], [0.0, 100.0], [120.0, -50.0], [300.0, 400.0], [-500.0, 0.0]])
        hs = np.array([100.0, 80.0, 200.0, 150.0, 60.0, 120.0])
        dep = Deployment(pts, hs, 1000.0, float("nan"))
        amps = [0.9, 1.1, 0.7, 1.3, 0.5, 0.8]
        pows = [1.2, 0.4, 2.0, 0.6, 1.5, 0.9]
        alpha = 2.8
        comp = select_comp_set(dep)
        assert comp.uav_indices == (0, 1, 2, 3)
        # straightforward summation written out term by term
        d = [math.sqrt(x * x + y * y + h * h) for (x, y), h in zip(pts, hs)]
        t = sum(d[i] ** (-alpha / 2) * amps[i] for i in range(4))
        interference = d[4] ** (-alpha) * pows[4] + d[5] ** (-alpha) * pows[5]
        got = sir_from_draws(slant_distances(dep), alpha, comp.uav_indices, amps, pows)
        assert got.signal_power == pytest.approx(t * t, rel=1e-13)
        assert got.interference_power == pytest.approx(interference, rel=1e-13)

    def test_no_interferers(self):
        with pytest.raises(NoInterferenceError):
            sir_from_draws([1.0, 2.0], 3.0, [0, 1], [1, 1], [1, 1])

    def test_compute_sir_checks(self):
        pts = np.array([[1.0, 0], [2, 0], [3, 0], [4, 0], [5, 0]])
        dep = Deployment(pts, np.full(5, 100.0), 100.0, float("nan"))
        comp = select_comp_set(dep)
        with pytest.raises(ConfigError):
            compute_sir(dep, comp, (0, 0, 0), 1.5, FadingParams())
        a = compute_sir(dep, comp, (0, 0, 0), 3.0, FadingParams(), 7)
        b = compute_sir(dep, comp, (0, 0, 0), 3.0, FadingParams(), 7)
        assert a == b
        four = Deployment(pts[:4], np.full(4, 100.0), 100.0, float("nan"))
        with pytest.raises(NoInterferenceError):
            compute_sir(four, select_comp_set(four), (0, 0, 0), 3.0, FadingParams(), 7)
