import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import erf

from abmlab._kernel import bridge_hit_time
from abmlab.estimates import chi2_goodness_of_fit
from abmlab.rng import DEFAULT_SEED, RngStream, resolve_seed, stream_id_for
from abmlab.stochastic import (
    NonPositiveDt,
    PairLaw,
    bridge_cross_prob,
    gaussian,
    gaussians,
    invgauss_samples,
    noncolliding_pair,
    noncolliding_pair_density,
    noncolliding_pairs,
    normal_cdf,
    normal_interval,
    pair_meeting_time,
    pair_meeting_times,
    pair_survival_prob,
)


def brute_bridge_touch(a, b, dt, n_paths, n_sub, rng):
    """Fraction of discretised rate-2 bridges from a to b that reach 0."""
    s = np.linspace(0, dt, n_sub + 1)
    w = np.cumsum(rng.standard_normal((n_paths, n_sub)) * math.sqrt(2 * dt / n_sub), axis=1)
    w = np.hstack([np.zeros((n_paths, 1)), w])
    bridge = a + (b - a) * s / dt + w - w[:, -1:] * s / dt
    return np.mean(bridge.min(axis=1) <= 0)


class TestRng:
    def test_same_key_same_sequence(self):
        a = RngStream(7, 11).generator.random(100)
        b = RngStream(7, 11).generator.random(100)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_uncorrelated(self):
        a = RngStream(7, stream_id_for("x", 0)).generator.standard_normal(100_000)
        b = RngStream(7, stream_id_for("x", 1)).generator.standard_normal(100_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(a.size)

    def test_stream_ids_distinct(self):
        ids = {stream_id_for("exp", r) for r in range(10_000)}
        assert len(ids) == 10_000

    def test_seed_resolution(self, monkeypatch):
        monkeypatch.delenv("ABMLAB_SEED", raising=False)
        assert resolve_seed() == DEFAULT_SEED == 0x5EED
        monkeypatch.setenv("ABMLAB_SEED", "123")
        assert resolve_seed() == 123
        assert resolve_seed(9) == 9

    def test_counter_advances(self):
        s = RngStream(1, 2)
        c0 = s.counter
        s.generator.random(64)
        assert s.counter > c0

    def test_spawn_is_deterministic(self):
        s = RngStream(3, 4)
        assert s.spawn("a").stream_id == RngStream(3, 4).spawn("a").stream_id
        assert s.spawn("a").stream_id != s.spawn("b").stream_id


class TestGaussian:
    def test_moments(self, make_stream):
        z = gaussians(make_stream("gauss"), 1_000_000)
        assert abs(z.mean()) < 0.004
        assert abs(z.var() - 1) < 0.005

    def test_scalar(self, make_stream):
        assert isinstance(gaussian(make_stream("g1")), float)

    def test_determinism(self, make_stream):
        np.testing.assert_array_equal(gaussians(make_stream("d"), 10), gaussians(make_stream("d"), 10))

    def test_normal_cdf_tail(self):
        # relative accuracy in the far tail
        np.testing.assert_allclose(normal_cdf(-30.0), stats.norm.sf(30.0), rtol=1e-12)
        np.testing.assert_allclose(normal_interval(20.0, 21.0), stats.norm.sf(20) - stats.norm.sf(21), rtol=1e-10)


class TestBridgeCross:
    def test_examples(self):
        assert bridge_cross_prob(0, 1, 1) == 1
        assert bridge_cross_prob(1, -0.5, 1) == 1
        assert bridge_cross_prob(1, 1, 1) == pytest.approx(math.exp(-1))
        assert bridge_cross_prob(1, 1, 1e-6) < 1e-300

    def test_non_positive_dt(self):
        with pytest.raises(NonPositiveDt):
            bridge_cross_prob(1, 1, 0)
        with pytest.raises(NonPositiveDt):
            bridge_cross_prob(1, 1, -1)

    def test_against_brute_force(self, make_stream):
        # a fine discrete bridge misses some touches, so it sits slightly below the exact value
        rng = make_stream("bridge-bf").generator
        p = brute_bridge_touch(1.0, 1.0, 1.0, 20_000, 2000, rng)
        se = math.sqrt(p * (1 - p) / 20_000)
        exact = math.exp(-1)
        assert exact - 0.02 < p <= exact + 3 * se

    @given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(1.01, 3))
    def test_monotone_in_ab_over_dt(self, a, b, dt, k):
        assert bridge_cross_prob(a * k, b, dt) <= bridge_cross_prob(a, b, dt)

    def test_hit_time_law(self, make_stream):
        # conditional hit time of the rate-2 bridge versus the fine-grid first touch
        g = make_stream("hit").generator
        a, b, dt = 0.6, 0.8, 1.0
        samples = np.array([bridge_hit_time(a, b, dt, g) for _ in range(20_000)])
        assert np.all((samples > 0) & (samples < dt))
        # exact density of the hit time given a touch: first passage of a to 0, then 0 to b
        def dens(s):
            f1 = a / math.sqrt(4 * math.pi * s**3) * math.exp(-a * a / (4 * s))
            r = dt - s
            f2 = math.exp(-b * b / (4 * r)) / math.sqrt(4 * math.pi * r)
            return f1 * f2

        norm = integrate.quad(dens, 0, dt)[0]
        edges = np.linspace(0, dt, 21)
        expected = np.array([integrate.quad(dens, lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:])]) / norm
        observed = np.histogram(samples, edges)[0]
        _, p, _ = chi2_goodness_of_fit(observed, expected * samples.size)
        assert p > 0.01


class TestPairLaw:
    def test_examples(self):
        assert pair_survival_prob(t=1, d=0) == 0
        assert pair_survival_prob(PairLaw(1, 1)) == pytest.approx(0.5205, abs=1e-4)
        assert pair_survival_prob(t=1, d=1) == pytest.approx(2 * stats.norm.cdf(1 / math.sqrt(2)) - 1, rel=1e-14)
        assert PairLaw(1, 1).survival == pair_survival_prob(t=1, d=1)

    def test_small_d(self):
        eps = 1e-4
        assert pair_survival_prob(t=1, d=2 * eps) / (2 * eps) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-6)

    @given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(1.01, 3))
    def test_monotone(self, t, d, k):
        assert pair_survival_prob(t=t, d=d * k) >= pair_survival_prob(t=t, d=d)
        assert pair_survival_prob(t=t * k, d=d) <= pair_survival_prob(t=t, d=d)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            PairLaw(0, 1)
        with pytest.raises(ValueError):
            PairLaw(1, -1)

    def test_meeting_time_cdf(self, make_stream):
        tau = pair_meeting_times(1.0, make_stream("tau"), 100_000)
        p = np.mean(tau > 1)
        se = math.sqrt(p * (1 - p) / tau.size)
        assert abs(p - pair_survival_prob(t=1, d=1)) < 3 * se
        ks = stats.kstest(tau, lambda s: 1 - erf(1 / (2 * np.sqrt(s))))
        assert ks.pvalue > 0.01

    def test_meeting_time_scalar_and_small_d(self, make_stream):
        assert pair_meeting_time(1.0, make_stream("t1")) > 0
        tau = pair_meeting_times(1e-3, make_stream("t2"), 10_000)
        assert np.median(tau) < 1e-4

    def test_meeting_time_scaling(self, make_stream):
        a = pair_meeting_times(1.0, make_stream("s1"), 50_000)
        b = pair_meeting_times(3.0, make_stream("s2"), 50_000) / 9
        assert stats.ks_2samp(a, b).pvalue > 0.01

    def test_invgauss_matches_scipy(self, make_stream):
        for mu, lam in [(0.5, 2.0), (3.0, 0.1), (1e4, 1.0)]:
            x = invgauss_samples(mu, lam, make_stream(f"ig{mu}"), 20_000)
            ref = stats.invgauss(mu / lam, scale=lam)
            assert stats.kstest(x, ref.cdf).pvalue > 0.01


class TestNonColliding:
    def test_density_examples(self):
        assert noncolliding_pair_density(0, 0, 1) == 0
        assert noncolliding_pair_density(1, -1, 1) == 0
        assert noncolliding_pair_density(-1, 1, 1) == pytest.approx(math.exp(-1) / math.sqrt(math.pi))

    @given(st.floats(-4, 4), st.floats(-4, 4), st.floats(0.1, 4))
    def test_density_symmetry(self, y1, y2, t):
        assert noncolliding_pair_density(y1, y2, t) == pytest.approx(noncolliding_pair_density(-y2, -y1, t))

    def test_normalised(self):
        for t in (0.5, 1.0, 2.0):
            r = 12 * math.sqrt(t)
            val, err = integrate.dblquad(lambda y2, y1: noncolliding_pair_density(y1, y2, t), -r, r,
                                         lambda y1: y1, lambda y1: r, epsabs=1e-10)
            assert abs(val - 1) < 1e-6

    def test_sorted_output(self, make_stream):
        y1, y2 = noncolliding_pair(1.0, make_stream("nc"))
        assert y1 < y2
        y = noncolliding_pairs(1.0, make_stream("nc2"), 1000)
        assert np.all(y[:, 0] < y[:, 1])

    def test_decomposition(self, make_stream):
        y = noncolliding_pairs(2.0, make_stream("dec"), 100_000)
        s = (y[:, 0] + y[:, 1]) / math.sqrt(2)
        r = (y[:, 1] - y[:, 0]) / math.sqrt(2)
        assert stats.kstest(s, stats.norm(scale=math.sqrt(2)).cdf).pvalue > 0.01
        assert stats.kstest(r, stats.rayleigh(scale=math.sqrt(2)).cdf).pvalue > 0.01
        assert abs(stats.spearmanr(s, r)[0]) < 4 / math.sqrt(s.size)
