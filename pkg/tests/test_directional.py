import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from wmdld.directional import (K_MAX, DldParams, QuadratureSpec, bessel_like_integral,
                               concentration_ratio, directional_distance, dld_norm_coeff,
                               dld_pdf, importance_weight, sample_dld, solve_concentration)
from wmdld.sparsify import axial_angles

from oracles import integral_I, random_rotation, sphere_grid

# frozen from oracles.integral_I (adaptive Simpson, tol 1e-13)
I2_15 = 0.0003886673981244948
RATIO2_15 = 0.06731572435648357
C2_15 = 7.465292506420022
# frozen from oracles.circle_cap_probability(50, 10)
CAP_50_10DEG = 0.9998272148345844


def unit(deg):
    return np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg))])


class TestIntegral:
    def test_analytic_values(self):
        assert bessel_like_integral(0, 0.0) == pytest.approx(1.0, rel=1e-14)
        assert bessel_like_integral(1, 0.0) == pytest.approx(2 / math.pi, rel=1e-14)

    def test_against_simpson_oracle(self):
        assert bessel_like_integral(2, 15.0) == pytest.approx(I2_15, rel=1e-9)
        assert integral_I(2, 15.0) == pytest.approx(I2_15, rel=1e-12)

    @pytest.mark.parametrize("D", [0, 1, 2, 3])
    @pytest.mark.parametrize("k", [0.5, 30.0, 199.0, 250.0, 1000.0])
    def test_target_error_across_regimes(self, D, k):
        assert bessel_like_integral(D, k) == pytest.approx(integral_I(D, k), rel=1e-10)

    def test_negative_k(self):
        with pytest.raises(ValueError):
            bessel_like_integral(0, -1.0)

    def test_quadrature_spec_floor(self):
        with pytest.raises(ValueError):
            QuadratureSpec(node_count=32)


class TestNormCoeff:
    def test_analytic(self):
        assert dld_norm_coeff(2, 0.0) == pytest.approx(1 / math.pi, rel=1e-14)
        assert dld_norm_coeff(3, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)

    def test_k15(self):
        assert dld_norm_coeff(2, 15.0) == pytest.approx(C2_15, rel=1e-9)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            dld_norm_coeff(1, 1.0)


class TestPdf:
    def test_values(self):
        m = unit(30)
        p = DldParams(m, 15.0, 2)
        c = dld_norm_coeff(2, 15.0)
        assert dld_pdf(m, p) == pytest.approx(c, rel=1e-14)
        assert dld_pdf(unit(120), p) == pytest.approx(c * math.exp(-15), rel=1e-12)
        assert dld_pdf(unit(77), DldParams(m, 0.0, 2)) == pytest.approx(1 / math.pi)

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            dld_pdf(np.array([1.0, 0.1]), DldParams(unit(0), 1.0, 2))

    @given(st.floats(-180, 180), st.floats(0, 100), st.integers(0, 2**31))
    def test_antipodal_symmetry(self, deg, k, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal(3)
        m /= np.linalg.norm(m)
        x = rng.standard_normal(3)
        x /= np.linalg.norm(x)
        p = DldParams(m, k, 3)
        assert dld_pdf(x, p) == dld_pdf(-x, p)

    @pytest.mark.parametrize("D", [2, 3])
    def test_rotated_normalization(self, D):
        rng = np.random.default_rng(D)
        Q = random_rotation(D, rng)
        pts, w = sphere_grid(D, n_polar=200)
        p = DldParams(Q @ np.eye(D)[-1], 15.0, D)
        assert w @ dld_pdf(pts @ Q.T, p) == pytest.approx(2.0, abs=2e-3)


class TestDistanceAndWeight:
    def test_distance(self):
        m = unit(10)
        assert directional_distance(m, m) == pytest.approx(0.0, abs=1e-7)
        assert directional_distance(unit(100), m) == pytest.approx(1.0)
        assert directional_distance(unit(40), m) == pytest.approx(0.5)

    def test_weight(self):
        m = unit(10)
        assert importance_weight(m, m) == pytest.approx(0.5)
        assert importance_weight(unit(100), m) == pytest.approx(0.0, abs=1e-15)
        assert importance_weight(unit(40), m) == pytest.approx(0.25)

    @given(st.floats(-360, 360), st.floats(-360, 360))
    def test_distance_properties(self, a, b):
        x, m = unit(a), unit(b)
        d = directional_distance(x, m)
        assert 0.0 <= d <= 1.0
        assert d == pytest.approx(directional_distance(m, x), abs=1e-15)
        assert d == pytest.approx(directional_distance(-x, m), abs=1e-15)
        w = importance_weight(x, m)
        assert 0.0 <= w <= 0.5


class TestSolver:
    def test_zero(self):
        assert solve_concentration(2 / math.pi, 2) == 0.0
        assert solve_concentration(0.9, 2) == 0.0

    def test_round_trip_k15(self):
        assert concentration_ratio(15.0, 2) == pytest.approx(RATIO2_15, rel=1e-10)
        assert solve_concentration(RATIO2_15, 2) == pytest.approx(15.0, abs=1e-6)

    def test_saturation(self):
        k, saturated = solve_concentration(1e-6, 2, full_output=True)
        assert k == K_MAX and saturated

    @pytest.mark.parametrize("rhs", [1.5, 0.0, -0.1, 1.0])
    def test_domain(self, rhs):
        with pytest.raises(ValueError):
            solve_concentration(rhs, 2)

    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_residual(self, D):
        for rhs in [0.5 * concentration_ratio(0.0, D), 0.01, 0.2]:
            k = solve_concentration(rhs, D)
            assert abs(concentration_ratio(k, D) - rhs) <= 1e-8


class TestSampler:
    def test_deterministic(self):
        p = DldParams(unit(20), 10.0, 2)
        assert np.array_equal(sample_dld(p, 500, 3), sample_dld(p, 500, 3))

    def test_unit_norm(self):
        x = sample_dld(DldParams(np.eye(4)[0], 5.0, 4), 1000, 0)
        np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)

    def test_uniform_when_k_zero(self):
        x = sample_dld(DldParams(unit(0), 0.0, 2), 20000, 11)
        counts, _ = np.histogram(axial_angles(x), bins=18, range=(-90, 90))
        assert stats.chisquare(counts).pvalue > 0.01

    def test_concentrated(self):
        x = sample_dld(DldParams(unit(35), 50.0, 2), 20000, 5)
        off = np.degrees(np.arcsin(directional_distance(x, unit(35))))
        frac = np.mean(off < 10.0)
        assert frac >= 0.95
        # binomial tolerance around the oracle probability
        assert abs(frac - CAP_50_10DEG) < 5 * math.sqrt(CAP_50_10DEG * (1 - CAP_50_10DEG) / 20000) + 1e-4

    def test_estimator_consistency(self):
        x = sample_dld(DldParams(unit(-40), 15.0, 2), 50_000, 2024)
        rhs = float(np.mean(directional_distance(x, unit(-40))))
        assert 13.5 <= solve_concentration(rhs, 2) <= 16.5
