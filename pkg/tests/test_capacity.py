import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.special import gamma, lambertw

from uhopplus.capacity import (
    BoundPair,
    CapacityInputs,
    cap_fraction,
    capacity_lower_bound,
    is_memory_code,
    lambert_w0,
    lambert_w0_of_exp,
    mhm_capacity_lower_bound,
    optimal_capacity_bounds,
    radius_from_separation,
    separation_sandwich,
    separation_threshold,
    well_separated,
)
from uhopplus.errors import (
    DegenerateRadiusError,
    HopfieldError,
    IndexOutOfRangeError,
    InvalidLogArgumentError,
    OutOfDomainError,
)
from uhopplus.kernel import FeatureMap
from uhopplus.patterns import PatternSet
from uhopplus.spherical import cross_polytope_code, polygon_code, simplex_code


def _circle(degrees):
    a = np.radians(degrees)
    return PatternSet(np.stack([np.cos(a), np.sin(a)]))


def fixed_point_capacity(d_phi, beta, p, r):
    """Independent oracle for C = b / W0(exp(a + ln b)) without any Lambert W.

    W0(y) = w means w e^w = y; with w = b / C the defining equation becomes
    (b / C) * exp(b / C) = b * exp(a), i.e. b / C = ln C + a. Solved for u = ln C.
    """
    a = 4.0 / (d_phi - 1) * (math.log(abs(2 * (math.sqrt(p) - 1)) / r) + 1.0)
    b = 4.0 * beta / (5.0 * (d_phi - 1))
    u = brentq(lambda u: b * math.exp(-u) - u - a, -700.0, 700.0, xtol=1e-15, rtol=1e-15)
    return math.sqrt(p) * math.exp(u * (d_phi - 1) / 4)


class TestLambertW:
    def test_known_values(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)
        assert lambert_w0(1.0) == pytest.approx(0.5671432904, abs=1e-10)
        assert lambert_w0(-1 / math.e) == pytest.approx(-1.0, abs=1e-7)

    def test_bisection_oracle(self):
        w = brentq(lambda w: w * math.exp(w) - 1.0, 0.0, 1.0, xtol=1e-16)
        assert lambert_w0(1.0) == pytest.approx(w, abs=1e-14)

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomainError):
            lambert_w0(-0.5)

    def test_round_trip_grid(self):
        xs = np.concatenate([-1 / math.e + np.logspace(-9, np.log10(1 / math.e), 200), np.logspace(-12, 6, 400)])
        for x in xs:
            w = lambert_w0(x)
            assert w >= -1.0
            assert abs(w * math.exp(w) - x) <= 1e-10 * max(1.0, abs(x))

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(-1 / math.e + 1e-9, 1e12))
    def test_matches_scipy(self, x):
        assert lambert_w0(x) == pytest.approx(lambertw(x).real, rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("y", [-5.0, 0.0, 3.0, 499.0, 500.0, 1e4, 1e8])
    def test_of_exp(self, y):
        w = lambert_w0_of_exp(y)
        # w + ln w = y is the log form of w e^w = e^y
        assert w + math.log(w) == pytest.approx(y, rel=1e-13, abs=1e-12)


class TestCapacityBound:
    def test_independent_oracle(self):
        res = capacity_lower_bound(CapacityInputs(64, 1.0, 0.999, 0.5))
        assert res.bound == pytest.approx(fixed_point_capacity(64, 1.0, 0.999, 0.5), rel=1e-9)
        assert res.flags == ["log_argument_sign_guarded"]
        assert res.raw_log_argument < 0

    def test_unguarded_raises(self):
        with pytest.raises(InvalidLogArgumentError):
            capacity_lower_bound(CapacityInputs(64, 1.0, 0.999, 0.5), guard_sign=False)

    def test_radius_monotonicity_pair(self):
        lo = capacity_lower_bound(CapacityInputs(16, 2.0, 0.9, 0.2)).bound
        hi = capacity_lower_bound(CapacityInputs(16, 2.0, 0.9, 0.4)).bound
        assert hi >= lo

    def test_identity_case_equals_mhm(self):
        assert mhm_capacity_lower_bound(8, 3.0, 0.95, 0.3) == capacity_lower_bound(CapacityInputs(8, 3.0, 0.95, 0.3))

    def test_json_keys(self):
        obj = capacity_lower_bound(CapacityInputs(8, 3.0, 0.95, 0.3)).to_json()
        assert {"bound", "a", "b", "C", "flags"} <= set(obj)

    def test_huge_log_bound_is_finite_in_log(self):
        res = capacity_lower_bound(CapacityInputs(10_000, 1e6, 0.5, 1.0))
        assert math.isfinite(res.log_bound)

    @pytest.mark.parametrize(
        "args", [(1, 1.0, 0.5, 0.5), (4, 0.0, 0.5, 0.5), (4, 1.0, 1.0, 0.5), (4, 1.0, 0.0, 0.5), (4, 1.0, 0.5, 0.0)]
    )
    def test_invalid_inputs(self, args):
        with pytest.raises(HopfieldError):
            CapacityInputs(*args)

    @settings(max_examples=100, deadline=None)
    @given(
        d_phi=st.integers(2, 500),
        beta=st.floats(0.01, 100),
        p=st.floats(0.01, 0.999),
        r=st.floats(0.01, 1.0),
        factor=st.floats(1.0, 3.0),
    )
    def test_monotone_in_radius_and_beta(self, d_phi, beta, p, r, factor):
        base = capacity_lower_bound(CapacityInputs(d_phi, beta, p, r)).log_bound
        assert capacity_lower_bound(CapacityInputs(d_phi, beta, p, min(r * factor, 1.0))).log_bound >= base - 1e-12
        assert capacity_lower_bound(CapacityInputs(d_phi, beta * factor, p, r)).log_bound >= base - 1e-12


class TestWellSeparation:
    def test_radius_relation(self):
        assert radius_from_separation(2.0) == pytest.approx(1.0)
        assert radius_from_separation(1.5) == pytest.approx(math.sqrt(0.75))

    def test_antipodal_beta_one(self):
        xi = _circle([0, 180])
        assert separation_threshold(2, 1.0, 1.0) == pytest.approx(math.log(2))
        assert well_separated(xi, None, 1.0, 0)
        assert is_memory_code(xi, None, 1.0)

    def test_near_duplicate(self):
        xi = _circle([0, math.degrees(1e-3)])
        assert not well_separated(xi, None, 1.0, 0)

    def test_antipodal_small_beta(self):
        assert separation_threshold(2, 1.0, 0.1) == pytest.approx(10 * math.log(2))
        assert not well_separated(_circle([0, 180]), None, 0.1, 1)

    def test_triangle(self):
        xi = _circle([0, 120, 240])
        assert separation_threshold(3, math.sqrt(0.75), 2.0) == pytest.approx(0.5 * math.log(4 / math.sqrt(0.75)))
        assert is_memory_code(xi, FeatureMap.identity(2, output_normalize=True), 2.0)

    def test_duplicate_is_degenerate(self):
        with pytest.raises(DegenerateRadiusError):
            is_memory_code(_circle([0, 0, 90]), None, 1.0)

    def test_strict_variant_adds_two_r(self):
        assert separation_threshold(3, 0.5, 2.0, strict=True) == pytest.approx(separation_threshold(3, 0.5, 2.0) + 1.0)
        # the strict check is harder to pass
        xi = _circle([0, 120, 240])
        assert is_memory_code(xi, None, 2.0) and not is_memory_code(xi, None, 2.0, strict=True)

    def test_index_range(self):
        with pytest.raises(IndexOutOfRangeError):
            well_separated(_circle([0, 180]), None, 1.0, 2)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_monotone_in_beta(self, n):
        xi = polygon_code(n).as_patterns()
        flags = [is_memory_code(xi, None, b) for b in np.logspace(-2, 3, 40)]
        first = flags.index(True)
        assert all(flags[first:])

    @pytest.mark.parametrize("code", [simplex_code(3), cross_polytope_code(3), polygon_code(6)], ids=["simplex", "cross", "hexagon"])
    def test_optimal_codes_are_memory_codes_at_large_beta(self, code):
        assert is_memory_code(code.as_patterns(), FeatureMap.identity(code.dim, output_normalize=True), 50.0)


class TestSeparationSandwich:
    @staticmethod
    def _gamma_oracle(m, d):
        lower = 0.5 * (math.sqrt(math.pi) / m * gamma((d + 1) / 2) / gamma(d / 2 + 1)) ** (2 / (d - 1))
        upper = 2 * (2 * math.sqrt(math.pi) / m * gamma((d + 1) / 2) / gamma(d / 2)) ** (1 / (d - 1))
        return lower, upper

    @pytest.mark.parametrize("m,d", [(4, 3), (6, 3), (2, 2), (10, 5), (100, 20)])
    def test_matches_gamma_formula(self, m, d):
        pair = separation_sandwich(m, d)
        lower, upper = self._gamma_oracle(m, d)
        assert pair.lower == pytest.approx(lower, rel=1e-12)
        assert pair.upper == pytest.approx(upper, rel=1e-12)

    def test_tetrahedron_values(self):
        # Gamma(2) = 1, Gamma(5/2) = 3 sqrt(pi) / 4, Gamma(3/2) = sqrt(pi) / 2
        pair = separation_sandwich(4, 3)
        assert pair.lower == pytest.approx(0.5 * (math.sqrt(math.pi) / 4 / (3 * math.sqrt(math.pi) / 4)))
        assert pair.upper == pytest.approx(2 * (2 * math.sqrt(math.pi) / 4 / (math.sqrt(math.pi) / 2)) ** 0.5)
        assert pair.contains(4 / 3)

    def test_octahedron(self):
        assert separation_sandwich(6, 3).contains(1.0)

    def test_antipodal_below_upper(self):
        assert 2.0 <= separation_sandwich(2, 2).upper

    def test_large_dimension_no_overflow(self):
        pair = separation_sandwich(1000, 10_000)
        assert math.isfinite(pair.lower) and math.isfinite(pair.upper)

    def test_bound_pair_ordering(self):
        with pytest.raises(HopfieldError):
            BoundPair(2.0, 1.0)
        assert BoundPair(1.0, 3.0).gap == 2.0


class TestOptimalCapacity:
    def test_reference_value(self):
        est = optimal_capacity_bounds(2, math.pi / 3)
        assert est.lower == pytest.approx(math.sqrt(4 * math.pi) * 0.5 / (math.sqrt(3) / 2))
        assert est.lower == pytest.approx(2.046, abs=1e-3)

    def test_near_right_angle(self):
        assert optimal_capacity_bounds(4, 1.57).lower < 1e-2

    def test_exponential_ratio(self):
        ups = [optimal_capacity_bounds(d, math.pi / 3).upper for d in range(2, 12)]
        np.testing.assert_allclose(np.array(ups[1:]) / ups[:-1], 2 / math.sqrt(3), rtol=1e-12)

    def test_labelled_estimate(self):
        assert optimal_capacity_bounds(5, 0.7).to_json()["label"] == "asymptotic estimate"

    def test_exact_cap_fraction(self):
        # a hemisphere is half the sphere; on S^1 a cap of angle theta is theta/pi of the circle
        assert cap_fraction(7, math.pi / 2) == pytest.approx(0.5)
        assert cap_fraction(2, 0.3) == pytest.approx(0.3 / math.pi)
        # on S^2 the cap area fraction is (1 - cos theta) / 2
        assert cap_fraction(3, 0.8) == pytest.approx((1 - math.cos(0.8)) / 2)

    @pytest.mark.parametrize("theta", [0.0, math.pi / 2, 2.0])
    def test_theta_range(self, theta):
        with pytest.raises(HopfieldError):
            optimal_capacity_bounds(3, theta)
