import math

import numpy as np
import pytest
from scipy import integrate

from abmlab.configurations import DensityProfile, constant_profile, indicator_profile
from abmlab.density import (
    DensityQuery,
    density1_quadrature,
    density_maximal_mc,
    density_mc,
    density_n_dual_mc,
    gaussian_density,
    homogeneous_density,
    q_estimate,
    thinned_density_formula,
    thinned_density_mc,
)
from abmlab.estimates import verdict
from abmlab.stochastic import pair_survival_prob

HALF = 1 / (2 * math.sqrt(math.pi))
STEP = indicator_profile(-math.inf, 0.0)


def brute_density1(u, t, x):
    """Plain 2-D adaptive quadrature of the one-point formula, split at the profile breakpoints."""
    r = 12 * math.sqrt(t)
    cuts = sorted({-r, r, *[b - x for b in u.breakpoints if -r < b - x < r]})

    def f(y2, y1):
        w = abs(y2 - y1) * math.exp(-(y1 * y1 + y2 * y2) / (2 * t))
        return u(x + y1) * (1 - u(x + y2)) * w

    total = 0.0
    for a1, b1 in zip(cuts[:-1], cuts[1:]):
        for a2, b2 in zip(cuts[:-1], cuts[1:]):
            # split the |y2 - y1| kink when the cells overlap
            if a1 == a2:
                total += integrate.dblquad(f, a1, b1, lambda y1: a2, lambda y1: y1, epsabs=1e-11)[0]
                total += integrate.dblquad(f, a1, b1, lambda y1: y1, lambda y1: b2, epsabs=1e-11)[0]
            else:
                total += integrate.dblquad(f, a1, b1, a2, b2, epsabs=1e-11)[0]
    return total / (2 * math.pi * t * t)


class TestClosedForms:
    @pytest.mark.parametrize("lam", [0.1, 0.25, 0.5, 0.9])
    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_homogeneous(self, lam, t):
        for x in (-3.0, 0.0, 1.7):
            assert abs(density1_quadrature(constant_profile(lam), t, x) - homogeneous_density(lam, t)) < 1e-6

    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_step(self, t):
        for x in (-1.0, 0.0, 1.0, 2.5):
            assert abs(density1_quadrature(STEP, t, x) - gaussian_density(x, t)) < 1e-6

    def test_half_value(self):
        assert homogeneous_density(0.5, 1.0) == pytest.approx(HALF)
        assert homogeneous_density(0.5, 1.0) == pytest.approx(0.28209, abs=1e-5)

    def test_homogeneous_maximal_at_half(self):
        vals = {lam: density1_quadrature(constant_profile(lam), 1.0, 0.0) for lam in (0.1, 0.25, 0.5)}
        assert max(vals, key=vals.get) == 0.5

    def test_class_invariant(self):
        u = DensityProfile((-1.0, 0.5), (0.2, 0.8, 0.4))
        assert density1_quadrature(u, 1.0, 0.3) == pytest.approx(density1_quadrature(u.complement(), 1.0, 0.3), abs=1e-9)

    def test_mixture_exceeds_half(self):
        eps = 0.05
        u = DensityProfile((0.0,), (1 - eps, eps))
        assert density1_quadrature(u, 1.0, 0.0) > HALF

    @pytest.mark.parametrize("x", [-0.7, 0.0, 0.4])
    def test_against_brute_quadrature(self, x):
        u = DensityProfile((-1.0, 0.0, 0.5), (0.1, 0.9, 0.3, 0.6))
        assert density1_quadrature(u, 1.0, x) == pytest.approx(brute_density1(u, 1.0, x), abs=1e-7)

    def test_translation(self):
        u = constant_profile(0.3)
        assert density1_quadrature(u, 1.0, 0.0) == pytest.approx(density1_quadrature(u, 1.0, 7.5), abs=1e-9)


class TestQuery:
    def test_defaults(self):
        q = DensityQuery(constant_profile(0.5), 1.0, (0.0,))
        assert q.eps == (0.4, 0.2, 0.1)
        q2 = DensityQuery(constant_profile(0.5), 1.0, (0.0, 0.5))
        assert max(q2.eps) < 0.25

    def test_validation(self):
        with pytest.raises(ValueError):
            DensityQuery(constant_profile(0.5), 1.0, (1.0, 0.0))
        with pytest.raises(ValueError):
            DensityQuery(constant_profile(0.5), 1.0, (0.0, 0.5), eps=(0.3,))
        with pytest.raises(ValueError):
            DensityQuery(constant_profile(0.5), -1.0, (0.0,))


class TestMonteCarlo:
    def test_zero_class(self, make_stream):
        q = DensityQuery(constant_profile(0), 1.0, (0.0,))
        r = density_mc(q, make_stream("z"), 20)
        assert r.mean == 0 and r.std_error == 0
        assert thinned_density_formula(constant_profile(0), 1.0, (0.0,), stream=make_stream("z2"), replicas=100).mean == 0

    def test_step_forward(self, make_stream):
        q = DensityQuery(STEP, 1.0, (0.0,))
        r = density_mc(q, make_stream("sf"), 20_000)
        assert abs(r.mean - gaussian_density(0.0, 1.0)) < 0.05 * gaussian_density(0.0, 1.0)

    def test_per_eps_rows(self, make_stream):
        q = DensityQuery(STEP, 1.0, (0.5,))
        r = density_mc(q, make_stream("rows"), 200)
        rows = r.rows(q)
        assert len(rows) == len(q.eps) + 1
        assert rows[-1]["epsilon"] == 0.0
        assert set(rows[0]) == {"x", "t", "epsilon", "estimate", "std_error", "replicas", "route"}

    def test_dual_n2_product(self, make_stream):
        q = DensityQuery(constant_profile(0.5), 1.0, (0.0, 5.0))
        r = density_n_dual_mc(q, make_stream("n2"), 40_000, conditional=True)
        assert abs(r.mean - HALF**2) < 0.10 * HALF**2

    def test_dual_conditional_matches_marks(self, make_stream):
        q = DensityQuery(constant_profile(0.3), 1.0, (0.0,))
        a = density_n_dual_mc(q, make_stream("dm"), 10_000)
        b = density_n_dual_mc(q, make_stream("dc"), 10_000, conditional=True)
        assert verdict(a.per_eps[0], b.per_eps[0]).passed

    def test_maximal_monotone_in_eps(self, make_stream):
        r = density_maximal_mc((0.0,), 1.0, (0.4, 0.2, 0.1), make_stream("mono"), 10_000)
        probs = [e.mean * 4 * eps for e, eps in zip(r.per_eps, r.eps)]
        ses = [e.std_error * 4 * eps for e, eps in zip(r.per_eps, r.eps)]
        assert all(a >= b - 3 * math.hypot(sa, sb) for a, b, sa, sb in zip(probs, probs[1:], ses, ses[1:]))
        # exact value of the separation probability for one pair
        for e, eps in zip(r.per_eps, r.eps):
            exact = pair_survival_prob(t=1.0, d=2 * eps) / (4 * eps)
            assert abs(e.mean - exact) <= 3 * e.std_error

    def test_q_matches_pair_survival(self, make_stream):
        r = q_estimate((0.0,), 1.0, (0.4, 0.2, 0.1), make_stream("q1"), 40_000)
        for e, eps in zip(r.per_eps, r.eps):
            assert abs(e.mean - pair_survival_prob(t=1.0, d=2 * eps) / (2 * eps)) <= 3 * e.std_error

    def test_q_grows_with_spread(self, make_stream):
        eps = (0.2,)
        near_ = q_estimate((0.0, 0.6), 1.0, eps, make_stream("qa"), 20_000)
        far = q_estimate((0.0, 1.2), 1.0, eps, make_stream("qb"), 20_000)
        assert far.mean > near_.mean

    def test_thinned_formula_constant(self, make_stream):
        for lam in (0.2, 0.5):
            r = thinned_density_formula(constant_profile(lam), 1.0, (0.0,), stream=make_stream("tf"), replicas=1000)
            assert r.mean == pytest.approx(lam * (1 - lam) / math.sqrt(math.pi), rel=1e-12)

    def test_thinned_formula_n2_runs(self, make_stream):
        r = thinned_density_formula(constant_profile(0.5), 1.0, (0.0, 2.0), stream=make_stream("tf2"), replicas=200)
        assert all(a > 0 for a in r.info["accepted"])
        assert r.mean > 0

    def test_thinned_halves_step(self, make_stream):
        q = DensityQuery(STEP, 1.0, (0.3,))
        full = density_mc(q, make_stream("full"), 10_000)
        half = thinned_density_mc(q, make_stream("half"), 10_000)
        assert verdict(half.extrapolated.scaled(2.0), full.extrapolated).passed

    def test_translation_equivariance(self, make_stream):
        a = density_n_dual_mc(DensityQuery(constant_profile(0.3), 1.0, (0.0,)), make_stream("ta"), 10_000, conditional=True)
        b = density_n_dual_mc(DensityQuery(constant_profile(0.3), 1.0, (3.7,)), make_stream("tb"), 10_000, conditional=True)
        assert verdict(a.extrapolated, b.extrapolated).passed


def test_gaussian_density_normalised():
    x = np.linspace(-10, 10, 20001)
    assert integrate.trapezoid(gaussian_density(x, 1.3), x) == pytest.approx(1.0, abs=1e-9)
