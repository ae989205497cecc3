import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_lab.constants import (
    J_LOWER_BOUND,
    check_J_methods,
    integral_I,
    integral_J,
    integral_simplex_check,
    integral_simplex_check_mc,
    j_integrand,
    li2,
    perimeter_factor,
    theoretical_constants,
)
from lorentz_lab.errors import DomainError
from lorentz_lab.estimators import DiffusionMatrix
from lorentz_lab.geometry import BilliardTable, Disk


class TestLi2:
    def test_zero(self):
        assert li2(0.0) == 0.0

    def test_one_is_pi2_over_6(self):
        assert abs(li2(1.0) - math.pi**2 / 6) < 1e-14

    def test_half(self):
        assert abs(li2(0.5) - (math.pi**2 / 12 - math.log(2) ** 2 / 2)) < 1e-14

    def test_minus_one(self):
        assert abs(li2(-1.0) + math.pi**2 / 12) < 1e-14

    def test_domain_errors(self):
        for bad in (1.0000001, -1.5, math.nan):
            with pytest.raises(DomainError):
                li2(bad)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-1.0, 1.0))
    def test_agrees_with_scipy_spence(self, x):
        assert abs(li2(x) - scipy.special.spence(1.0 - x)) < 5e-15

    def test_slow_series_oracle_on_reflection_branch(self):
        # brute summation of 10^6 terms vs the identity-based evaluation
        rng = np.random.default_rng(12)
        ks = np.arange(1, 1_000_001, dtype=np.float64)
        for x in rng.uniform(0.5, 1.0, 100):
            direct = float(np.sum(x**ks / ks**2))
            assert abs(direct - li2(x)) < 1e-10


class TestIntegralI:
    def test_closed_form_value(self):
        _, closed = integral_I()
        assert closed == pytest.approx(
            math.pi**2 / 12 + 0.25 - 1.5 * math.log(2), abs=0
        )
        assert closed == pytest.approx(0.03274626, abs=5e-9)

    def test_quadrature_matches_closed_form(self):
        quad, closed = integral_I()
        assert abs(quad - closed) < 1e-8


class TestSimplexCheck:
    def test_cubature_value(self):
        assert abs(integral_simplex_check() - 0.5) < 1e-8

    def test_monte_carlo_oracle(self):
        val, err = integral_simplex_check_mc(10**8, seed=5)
        assert abs(val - 0.5) < 3.0 * err
        assert err < 1e-4


class TestIntegralJ:
    def test_centroid_spot_value(self):
        assert j_integrand(1 / 6, 1 / 6, 1 / 6) == pytest.approx(6.0, abs=0)

    def test_methods_agree(self):
        (jc, ec), (jm, em) = check_J_methods(target_err=1e-4, seed=3)
        assert abs(jc - jm) <= 3.0 * math.hypot(ec, em)
        assert em <= 1.2e-4

    def test_exceeds_positivity_bound(self):
        j, _ = integral_J("cubature", 1e-6)
        assert j > J_LOWER_BOUND
        assert J_LOWER_BOUND == pytest.approx((math.pi**2 / 6 - 1) / 2, abs=0)

    def test_stable_under_refinement(self):
        j1, _ = integral_J("cubature", 2e-6)
        j2, _ = integral_J("cubature", 1e-6)
        assert abs(j1 - j2) < 2e-6

    def test_target_preconditions(self):
        with pytest.raises(ValueError):
            integral_J("cubature", 1e-7)
        with pytest.raises(ValueError):
            integral_J("monte-carlo", 1e-5)
        with pytest.raises(ValueError):
            integral_J("trapezoid")


def _identity_sigma():
    return DiffusionMatrix(
        sigma2=np.eye(2), stderr=np.zeros((2, 2)), method="literal"
    )


class TestTheoreticalConstants:
    def test_single_obstacle_reduces_to_inverse_pi(self, small_disk_table):
        rep = theoretical_constants(small_disk_table, _identity_sigma(), (1.2, 0.0))
        assert rep.c0 == pytest.approx(1.0 / math.pi, rel=1e-14)

    def test_default_perimeter_factor(self, table):
        assert perimeter_factor(table) == pytest.approx(25.0 / 49.0, rel=1e-14)

    def test_factor_scale_invariance(self):
        a = BilliardTable(
            [Disk(center=(0.0, 0.0), radius=0.4), Disk(center=(0.5, 0.5), radius=0.3)]
        )
        b = BilliardTable(
            [Disk(center=(0.0, 0.0), radius=0.2), Disk(center=(0.5, 0.5), radius=0.15)]
        )
        assert perimeter_factor(a) == pytest.approx(perimeter_factor(b), rel=1e-14)

    def test_report_invariants(self, table):
        rep = theoretical_constants(table, _identity_sigma(), (1.2, 1e-5))
        assert rep.c1 == rep.c0 / 2
        assert rep.c == pytest.approx(
            rep.c0**2 * (1 + 2 * rep.J - math.pi**2 / 6), rel=1e-14
        )
        assert rep.c > 0
        assert rep.c_err > 0 or rep.c0_err == 0

    def test_error_propagation_scales(self, table):
        noisy = DiffusionMatrix(
            sigma2=np.eye(2), stderr=0.01 * np.ones((2, 2)), method="empirical"
        )
        quiet = DiffusionMatrix(
            sigma2=np.eye(2), stderr=0.001 * np.ones((2, 2)), method="empirical"
        )
        r_noisy = theoretical_constants(table, noisy, (1.2, 0.0))
        r_quiet = theoretical_constants(table, quiet, (1.2, 0.0))
        assert r_noisy.c0_err == pytest.approx(10 * r_quiet.c0_err, rel=1e-9)
