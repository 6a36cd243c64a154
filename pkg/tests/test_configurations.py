import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from abmlab.configurations import (
    LINE,
    BadAlpha,
    DensityClass,
    DensityProfile,
    DiscreteConfig,
    NotTwoValued,
    OddCountOnTorus,
    TestFunction,
    Torus,
    class_equiv,
    class_from_config,
    class_pairing_gap,
    constant_profile,
    entrance_family,
    hat_function,
    indicator_profile,
    interface_of,
    lattice_profile,
    vague_limit_check,
    vague_pairing,
)
from abmlab.io import dumps

sorted_points = st.lists(st.integers(-400, 400), min_size=0, max_size=12, unique=True).map(
    lambda v: tuple(sorted(x / 8 for x in v))
)


def brute_pairing(u, phi, n=400_001):
    lo, hi = phi.nodes[0], phi.nodes[-1]
    x = np.linspace(float(lo), float(hi), n)
    y = np.asarray(u(x), float) * phi(x)
    return float(trapezoid(y, x))


class TestDiscreteConfig:
    def test_sorted_required(self):
        with pytest.raises(ValueError):
            DiscreteConfig([1.0, 0.0])
        with pytest.raises(ValueError):
            DiscreteConfig([0.0, 0.0])

    def test_torus_range(self):
        DiscreteConfig([0.0, 9.5], Torus(10))
        with pytest.raises(ValueError):
            DiscreteConfig([0.0, 10.0], Torus(10))

    def test_equality(self):
        assert DiscreteConfig([0, 1]) == DiscreteConfig([0.0, 1.0])
        assert DiscreteConfig([0, 1]) != DiscreteConfig([0, 1], Torus(2))


class TestDensityProfile:
    def test_canonical_merge(self):
        u = DensityProfile((0.0, 1.0, 2.0), (0, 1, 1, 0))
        assert u.breakpoints == (0.0, 2.0)
        assert u.values == (0, 1, 0)
        assert u == indicator_profile(0.0, 2.0)

    def test_value_range(self):
        with pytest.raises(ValueError):
            DensityProfile((0.0,), (0.5, 1.5))

    def test_right_continuous(self):
        u = indicator_profile(0.0, 1.0)
        np.testing.assert_array_equal(u(np.array([-1e-12, 0.0, 0.5, 1.0])), [0, 1, 1, 0])

    def test_torus_wrap(self):
        u = DensityProfile((1.0, 3.0), (1, 0), Torus(4))
        np.testing.assert_array_equal(u(np.array([0.5, 1.0, 2.0, 3.5, 4.5, -1.0])), [0, 1, 1, 0, 0, 0])

    def test_two_valued(self):
        assert indicator_profile(0, 1).is_two_valued
        assert not constant_profile(0.5).is_two_valued

    @given(st.lists(st.sampled_from([0, 0.25, 0.5, 1]), min_size=1, max_size=8), st.data())
    def test_dict_round_trip_bit_exact(self, vals, data):
        bps = sorted(data.draw(st.lists(st.floats(-50, 50, allow_nan=False), min_size=len(vals) - 1,
                                        max_size=len(vals) - 1, unique=True)))
        u = DensityProfile(tuple(bps), tuple(vals))
        v = DensityProfile.from_dict(json.loads(dumps(u.to_dict())))
        assert v == u
        assert all(a.hex() == b.hex() for a, b in zip(map(float, u.breakpoints), map(float, v.breakpoints)))


class TestInterface:
    def test_examples(self):
        assert interface_of(indicator_profile(0, 1)) == DiscreteConfig([0, 1])
        assert len(interface_of(constant_profile(0))) == 0
        with pytest.raises(NotTwoValued):
            interface_of(constant_profile(0.3))

    def test_lattice_profile_interfaces(self):
        # 1 on [k/n, (k + lam)/n) gives the lattice Z/n + {0, lam/n}
        n, lam = 8, Fraction(1, 4)
        u = lattice_profile(constant_profile(lam), Fraction(1, n), (0, 2))
        expected = sorted({Fraction(k, n) for k in range(0, 16)} | {Fraction(k, n) + lam / n for k in range(0, 16)})
        assert list(interface_of(u).positions) == expected

    def test_class_from_config_examples(self):
        assert class_from_config(DiscreteConfig([0.0]), 1) == indicator_profile(-math.inf, 0.0)
        assert class_from_config(DiscreteConfig([]), 0) == constant_profile(0)
        u = class_from_config(DiscreteConfig([0.0, 1.0, 2.0]), 0)
        assert u == DensityProfile((0.0, 1.0, 2.0), (0, 1, 0, 1))

    def test_odd_torus(self):
        with pytest.raises(OddCountOnTorus):
            class_from_config(DiscreteConfig([1.0, 2.0, 3.0], Torus(5)), 0)

    @given(sorted_points, st.sampled_from([0, 1]))
    def test_round_trip(self, pts, left):
        u = class_from_config(DiscreteConfig(list(pts)), left)
        assert interface_of(u) == DiscreteConfig(list(pts))
        assert class_from_config(interface_of(u), int(u.values[0])) == u

    @given(sorted_points, st.sampled_from([0, 1]))
    def test_complement_same_interface(self, pts, left):
        u = class_from_config(DiscreteConfig(list(pts)), left)
        assert interface_of(u) == interface_of(u.complement())

    @given(sorted_points.filter(lambda p: len(p) % 2 == 0), st.sampled_from([0, 1]))
    def test_torus_round_trip(self, pts, left):
        L = 120.0
        pos = [p + 60 for p in pts]
        x = DiscreteConfig(pos, Torus(L))
        u = class_from_config(x, left)
        assert interface_of(u) == x
        assert u(0.0) == left


class TestDensityClass:
    def test_representatives(self):
        assert DensityClass(constant_profile(Fraction(7, 10))).representative == constant_profile(Fraction(3, 10))
        assert DensityClass(constant_profile(0.7)) == DensityClass(constant_profile(0.3))
        r = DensityClass(indicator_profile(-math.inf, 0)).representative
        assert r.values[0] == 0

    @given(st.lists(st.sampled_from([0, 0.1, 0.5, 0.9, 1]), min_size=1, max_size=6))
    def test_complement_equivalent(self, vals):
        u = DensityProfile(tuple(float(k) for k in range(len(vals) - 1)), tuple(vals))
        assert class_equiv(u, u.complement())


class TestEntranceFamily:
    def test_lattice(self):
        assert list(entrance_family("lattice", 2, (0, 1)).positions) == [0, 0.5, 1]

    def test_quarter(self):
        assert list(entrance_family("quarter", 1, (0, 2)).positions) == [0, 0.25, 1, 1.25, 2]

    def test_paired(self):
        x = entrance_family("paired", 10, (0, 0.5), alpha=2, exact=True)
        assert list(x.positions) == [Fraction(v, 100) for v in (0, 1, 10, 11, 20, 21, 30, 31, 40, 41, 50)]
        np.testing.assert_allclose(entrance_family("paired", 10, (0, 0.5), alpha=2).positions,
                                   [0, 0.01, 0.1, 0.11, 0.2, 0.21, 0.3, 0.31, 0.4, 0.41, 0.5], atol=1e-15)

    def test_bad_alpha(self):
        with pytest.raises(BadAlpha):
            entrance_family("paired", 4, (0, 1), alpha=1.0)

    def test_poisson_needs_stream(self, make_stream):
        with pytest.raises(ValueError):
            entrance_family("poisson", 4, (0, 1))
        x = entrance_family("poisson", 50, (0, 10), stream=make_stream("poisson"))
        assert abs(len(x) - 500) < 5 * math.sqrt(500)


class TestPairing:
    def test_examples(self):
        phi = hat_function()
        assert vague_pairing(constant_profile(0), phi) == 0
        assert vague_pairing(constant_profile(1), phi) == 1

    def test_end_heights(self):
        with pytest.raises(ValueError):
            TestFunction((0, 1), (1, 0))

    @settings(max_examples=40)
    @given(sorted_points, st.sampled_from([0, 1]), st.floats(-2, 2), st.floats(0.3, 3))
    def test_against_brute_force(self, pts, left, c, w):
        u = class_from_config(DiscreteConfig(list(pts)), left)
        phi = hat_function(c, w)
        np.testing.assert_allclose(float(vague_pairing(u, phi)), brute_pairing(u, phi), atol=2e-5)

    @given(sorted_points, st.floats(-2, 2), st.floats(0.3, 3), st.floats(0.1, 3), st.floats(0.1, 3))
    def test_linear_in_phi(self, pts, c, w, a, b):
        u = class_from_config(DiscreteConfig(list(pts)), 0)
        f, g = hat_function(c, w, a), hat_function(c + 0.5, w, b)
        nodes = sorted(set(f.nodes) | set(g.nodes))
        fg = TestFunction(tuple(nodes), tuple(float(f(x) + g(x)) for x in nodes))
        assert vague_pairing(u, fg) == pytest.approx(vague_pairing(u, f) + vague_pairing(u, g), abs=1e-12)

    @given(sorted_points, st.sampled_from([0, 1]))
    def test_monotone_in_u(self, pts, left):
        u = class_from_config(DiscreteConfig(list(pts)), left)
        bigger = DensityProfile(u.breakpoints, tuple(max(v, 0.5) for v in u.values))
        phi = hat_function(0, 2)
        assert vague_pairing(u, phi) <= vague_pairing(bigger, phi)

    def test_exact_fraction(self):
        x = entrance_family("lattice", 3, (-2, 2), exact=True)
        p = vague_pairing(class_from_config(x, 0), hat_function(0, 1))
        assert isinstance(p, Fraction)


class TestVagueLimit:
    def test_lattice_rate(self):
        phi = hat_function()
        rep = vague_limit_check("lattice", phi, Fraction(1, 2), range(1, 65))
        assert rep.final_gap <= phi.integral() / (2 * 64)

    def test_quarter_converges(self):
        phi = hat_function()
        rep = vague_limit_check("quarter", phi, Fraction(1, 4), range(1, 65))
        assert rep.final_gap <= phi.integral() / 64

    def test_paired_rate_one_over_n(self):
        phi = hat_function()
        rep = vague_limit_check("paired", phi, 0, [8, 16, 32, 64], alpha=2)
        for n, g in zip(rep.ns, rep.gaps):
            assert g == pytest.approx(float(phi.integral()) / n, rel=0.05)

    def test_gap_uses_class(self):
        phi = hat_function()
        u = constant_profile(Fraction(3, 4))
        assert class_pairing_gap(u, phi, Fraction(1, 4)) == 0

    def test_increasing_required(self):
        with pytest.raises(ValueError):
            vague_limit_check("lattice", hat_function(), 0.5, [4, 2])
