import math

import numpy as np
import pytest
from scipy import stats

from abmlab.configurations import DensityProfile, constant_profile, indicator_profile
from abmlab.duality import (
    DualityQuery,
    Identity,
    closed_form_match,
    closed_form_moment,
    lhs_moment,
    lhs_parity,
    rhs_match,
    rhs_moment,
)
from abmlab.estimates import EstimateWithCI, extrapolate, extrapolation_weights, run_replicas, verdict
from abmlab.particles import StepScheme
from abmlab.rng import RngStream, stream_id_for

FAST = StepScheme(1 / 128)
STEP = indicator_profile(-math.inf, 0.0)


def near(est: EstimateWithCI, value: float, k: float = 3.0) -> bool:
    return abs(est.mean - value) <= k * est.std_error


class TestQuery:
    def test_validation(self):
        with pytest.raises(ValueError):
            DualityQuery(constant_profile(0.5), 1.0, (1.0, 0.0))
        with pytest.raises(ValueError):
            DualityQuery(constant_profile(0.5), 1.0, (0.0,), "MATCH")
        with pytest.raises(ValueError):
            DualityQuery(constant_profile(0.5), 0.0, (0.0,))

    def test_mesh_default(self):
        q = DualityQuery(constant_profile(0.5), 1.0, (0.0, 0.5, 2.0), "MOMENT")
        assert q.effective_mesh == 0.5 / 64
        assert q.identity is Identity.MOMENT
        start, h = q.forward_start()
        assert start.is_two_valued and h == 0.5 / 64


class TestMoment:
    def test_constant_one(self, make_stream):
        q = DualityQuery(constant_profile(1), 1.0, (0.0, 1.0), scheme=FAST)
        for fn in (lhs_moment, rhs_moment):
            est = fn(q, make_stream("one"), 50)
            assert est.mean == 1 and est.std_error == 0

    def test_constant_zero(self, make_stream):
        est = rhs_moment(DualityQuery(constant_profile(0), 1.0, (0.0, 1.0), scheme=FAST), make_stream("z"), 50)
        assert est.mean == 0 and est.std_error == 0

    def test_step_single_point(self, make_stream):
        est = lhs_moment(DualityQuery(STEP, 1.0, (0.0,), scheme=FAST), make_stream("sp"), 10_000)
        assert near(est, 0.5)

    def test_closed_form_value(self):
        # lambda * c + lambda^2 * (1 - c) with c = 1 - erf(1/2)
        assert closed_form_moment(0.5, 1.0, 1.0) == pytest.approx(0.369875, abs=5e-6)

    def test_rhs_against_closed_form(self, make_stream):
        q = DualityQuery(constant_profile(0.5), 1.0, (0.0, 1.0), scheme=FAST)
        assert near(rhs_moment(q, make_stream("rm"), 20_000), closed_form_moment(0.5, 1.0, 1.0))

    def test_lattice_lhs_against_rhs(self, make_stream):
        q = DualityQuery(constant_profile(0.5), 1.0, (0.0, 1.0), mesh=1 / 16, scheme=StepScheme(1 / 256))
        v = verdict(lhs_moment(q, make_stream("lm"), 3000), rhs_moment(q, make_stream("rm2"), 3000))
        assert v.passed


class TestParity:
    def test_zero_class(self, make_stream):
        est = lhs_parity(DualityQuery(constant_profile(0), 1.0, (0.0, 1.0), "PARITY"), make_stream("p0"), 10)
        assert est.mean == 1.0

    def test_step_interval(self, make_stream):
        a, b, t = -0.5, 1.0, 1.0
        q = DualityQuery(STEP, t, (a, b), "PARITY", scheme=FAST)
        expected = 1 - (stats.norm.cdf(b / math.sqrt(t)) - stats.norm.cdf(a / math.sqrt(t)))
        assert near(lhs_parity(q, make_stream("si"), 10_000), expected)

    def test_class_invariance(self, make_stream):
        u = DensityProfile((0.0, 0.7), (1, 0, 1))
        q1 = DualityQuery(u, 0.5, (-0.2, 0.9), "PARITY", scheme=FAST)
        q2 = DualityQuery(u.complement(), 0.5, (-0.2, 0.9), "PARITY", scheme=FAST)
        assert verdict(lhs_parity(q1, make_stream("ci1"), 4000), lhs_parity(q2, make_stream("ci2"), 4000)).passed
        w = constant_profile(0.3)
        q3 = DualityQuery(w, 0.5, (-0.2, 0.9), "MATCH", scheme=FAST)
        q4 = DualityQuery(w.complement(), 0.5, (-0.2, 0.9), "MATCH", scheme=FAST)
        assert verdict(rhs_match(q3, make_stream("ci3"), 4000), rhs_match(q4, make_stream("ci4"), 4000)).passed

    def test_mesh_refinement(self, make_stream):
        def at(h, label):
            q = DualityQuery(constant_profile(0.5), 0.5, (0.0, 1.0), "PARITY", mesh=h, scheme=StepScheme(1 / 256))
            return lhs_parity(q, make_stream(label), 2000)

        assert verdict(at(1 / 16, "m1"), at(1 / 32, "m2"), alpha=0.0027).passed


class TestMatch:
    def test_closed_form(self, make_stream):
        q = DualityQuery(constant_profile(0.5), 1.0, (0.0, 1.0), "MATCH", scheme=FAST)
        assert closed_form_match(0.5, 1.0, 1.0) == pytest.approx(0.73975, abs=5e-6)
        assert near(rhs_match(q, make_stream("cf"), 20_000), closed_form_match(0.5, 1.0, 1.0))

    def test_paths_agree_two_valued(self, make_stream):
        q = DualityQuery(STEP, 1.0, (-0.5, 0.3, 0.8, 2.0), "BORDER", scheme=FAST)
        a = rhs_match(q, make_stream("pa"), 6000, path="marks")
        b = rhs_match(q, make_stream("pb"), 6000, path="direct")
        c = rhs_match(q, make_stream("pc"), 6000, path="conditional")
        assert verdict(a, b).passed and verdict(a, c).passed

    def test_paths_agree_fractional(self, make_stream):
        u = DensityProfile((0.0,), (0.2, 0.7))
        q = DualityQuery(u, 1.0, (-0.5, 0.3, 0.8, 2.0), "MATCH", scheme=FAST)
        assert verdict(rhs_match(q, make_stream("fa"), 6000), rhs_match(q, make_stream("fb"), 6000, path="conditional")).passed
        with pytest.raises(ValueError):
            rhs_match(q, make_stream("fc"), 10, path="direct")

    def test_close_points_approach_one(self):
        vals = [closed_form_match(0.5, d, 1.0) for d in (1.0, 0.1, 0.01, 1e-4)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(1.0, abs=1e-4)


class TestVerdict:
    def test_identical_pass(self):
        a = EstimateWithCI(0.5, 0.01, 100)
        assert verdict(a, a).passed

    def test_far_apart_fail(self):
        v = verdict(EstimateWithCI(0.5, 0.001, 100), EstimateWithCI(0.6, 0.001, 100))
        assert not v.passed
        assert v.z == pytest.approx(-70.71, abs=0.01)

    def test_zero_se(self):
        assert verdict(EstimateWithCI.exact(1.0), EstimateWithCI.exact(1.0)).passed
        assert not verdict(EstimateWithCI.exact(1.0), EstimateWithCI.exact(0.9)).passed

    def test_bonferroni(self):
        a, b = EstimateWithCI(0.0, 1.0, 10), EstimateWithCI(2.8, 0.0, 10)
        assert not verdict(a, b, 0.01).passed
        assert verdict(a, b, 0.01, comparisons=10).passed

    def test_calibration(self):
        # 100 null comparisons between independent Bernoulli estimators of the same law
        fails = 0
        for k in range(100):
            x = RngStream(11, stream_id_for("cal-a", k)).generator.random(2000) < 0.7
            y = RngStream(11, stream_id_for("cal-b", k)).generator.random(2000) < 0.7
            fails += not verdict(EstimateWithCI.from_samples(x), EstimateWithCI.from_samples(y)).passed
        # Binomial(100, 0.01): P(fails > 5) < 1e-3
        assert fails <= 5

    def test_report_schema(self):
        d = verdict(EstimateWithCI(0.5, 0.1, 10), EstimateWithCI(0.4, 0.1, 10)).to_dict()
        assert set(d) == {"lhs", "rhs", "z", "alpha", "pass"}
        assert set(d["lhs"]) == {"mean", "se", "n"}


class TestEstimates:
    def test_standard_error(self):
        x = np.arange(10.0)
        e = EstimateWithCI.from_samples(x)
        assert e.std_error == pytest.approx(x.std(ddof=1) / math.sqrt(10))

    def test_extrapolation_weights(self):
        np.testing.assert_allclose(extrapolation_weights([0.4, 0.2, 0.1]), [-0.5, 0.5, 1.0], atol=1e-12)
        # exact on linear functions
        eps = np.array([0.3, 0.15, 0.075])
        assert extrapolation_weights(eps) @ (2.0 + 5.0 * eps) == pytest.approx(2.0)

    def test_extrapolate_shared(self):
        eps = [0.4, 0.2, 0.1]
        samples = np.column_stack([np.full(5, 1.0 + e) for e in eps])
        est = extrapolate([], eps, samples)
        assert est.mean == pytest.approx(1.0) and est.std_error == pytest.approx(0.0, abs=1e-12)

    def test_run_replicas_thread_invariant(self):
        fn = lambda s: float(s.generator.standard_normal())  # noqa: E731
        a = run_replicas(fn, 64, "ri", 3, threads=1)
        b = run_replicas(fn, 64, "ri", 3, threads=8)
        assert a == b
