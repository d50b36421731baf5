import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qplab.cocycle import CocycleParams
from qplab.dynamics import MultiShift, SkewShift, Torus2Point, standard_frequencies, torus_distance
from qplab.potential import FourierSeries2, constant_series, gevrey_series
from qplab.subharmonic import (
    LEBlockSource,
    ThresholdRule,
    birkhoff_average,
    deviation_measure_curve,
    fejer_bound_check,
    fejer_kernel,
    fejer_kernel_direct,
    fourier_birkhoff_identity,
    r2_phases,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class TestFejerKernel:
    def test_integer_t(self):
        assert fejer_kernel(7, 3.0) == pytest.approx(1.0, abs=1e-12)

    def test_single_term(self):
        for t in (0.0, 0.3, 0.77):
            assert fejer_kernel(1, t) == pytest.approx(1.0, abs=1e-14)

    def test_two_terms_half(self):
        # direct two-term sum: (1 + e^{i pi}) / 2 = 0
        assert abs(fejer_kernel(2, 0.5)) <= 1e-14

    @given(n=st.integers(1, 10**4), t=st.floats(-2, 2))
    @settings(max_examples=300, deadline=None)
    def test_closed_form_vs_direct(self, n, t):
        if torus_distance(t) < 1e-6 or n > 2000:
            n = min(n, 2000)
        if torus_distance(t) < 1e-6:
            return
        assert abs(fejer_kernel(n, t) - fejer_kernel_direct(n, t)) <= 1e-10

    def test_near_integer_fallback(self):
        t = 1e-9
        n = 50
        assert fejer_kernel(n, t) == pytest.approx(fejer_kernel_direct(n, t), abs=1e-12)


class TestFejerBound:
    def test_at_zero(self):
        chk = fejer_bound_check(5, 0.0)
        assert chk.value_abs == pytest.approx(1.0)
        assert chk.bound == 1.0
        assert chk.ok

    def test_saturated_bound(self):
        chk = fejer_bound_check(10, 0.05)
        assert chk.bound == 1.0
        assert chk.ok

    def test_golden_and_random(self, rng):
        assert fejer_bound_check(100, GOLDEN).ok
        for _ in range(10**4):
            n = int(rng.integers(1, 10**4))
            assert fejer_bound_check(n, float(rng.uniform(-3, 3))).ok


class TestBirkhoffAverage:
    def test_constant(self, skew_golden):
        u = constant_series(2.5)
        assert birkhoff_average(u, Torus2Point(0.1, 0.9), skew_golden, 17) == pytest.approx(2.5)

    def test_single_term_is_value_at_x(self, cos_sum, skew_golden):
        x = Torus2Point(0.3, 0.8)
        assert birkhoff_average(cos_sum, x, skew_golden, 1) == pytest.approx(cos_sum.eval(x))

    def test_equidistribution_diagonal_mode(self, shift_pair):
        # u = cos(2 pi (x1 + x2)) has mean 0; the n-shift average is bounded
        # by |K_n(w1 + w2)| which is ~7e-4 at n = 10^4 for this pair
        u = FourierSeries2({(1, 1): 0.5, (-1, -1): 0.5})
        avg = birkhoff_average(u, Torus2Point(0.2, 0.7), shift_pair, 10**4)
        assert abs(avg) <= 0.01


class TestFourierBirkhoffIdentity:
    def test_constant_gap_zero(self, shift_pair):
        rep = fourier_birkhoff_identity(constant_series(1.3), shift_pair, Torus2Point(0.4, 0.1), 12)
        assert rep.gap <= 1e-14

    def test_cosine_small_n(self, cos_x1, shift_pair, rng):
        for _ in range(5):
            x = Torus2Point(rng.random(), rng.random())
            rep = fourier_birkhoff_identity(cos_x1, shift_pair, x, 7)
            assert rep.gap <= 1e-12

    def test_random_series_gap(self, shift_pair, rng):
        u = gevrey_series(2.0, 1.0, degree=6, seed=9)  # 85 terms
        for _ in range(5):
            x = Torus2Point(rng.random(), rng.random())
            rep = fourier_birkhoff_identity(u, shift_pair, x, 50)
            assert rep.gap <= 1e-9

    def test_rejects_skew(self, cos_x1, skew_golden):
        with pytest.raises(TypeError):
            fourier_birkhoff_identity(cos_x1, skew_golden, Torus2Point(0.1, 0.2), 5)


class TestDeviationCurve:
    def test_constant_source_zero_fractions(self, shift_pair):
        curve = deviation_measure_curve(
            constant_series(4.2), shift_pair, [10, 100], ThresholdRule(c=0.1, tau=0.0), 1000
        )
        assert curve.fractions() == [0.0, 0.0]
        assert curve.non_increasing()

    def test_cosine_shift_decay(self, cos_x1):
        t = standard_frequencies()["golden-pair"]
        curve = deviation_measure_curve(
            cos_x1, t, [100, 1000, 10_000], ThresholdRule(c=0.1, tau=0.0), 1000
        )
        assert curve.non_increasing()
        assert curve.fractions()[-1] == 0.0
        assert curve.mean_mode == "analytic"

    def test_le_blocks_trend(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.7)
        curve = deviation_measure_curve(
            LEBlockSource(p, 20), skew_golden, [50, 100, 200], ThresholdRule(), 1000
        )
        assert curve.non_increasing()
        assert curve.mean_mode == "sample"
        rows = curve.to_csv_rows()
        assert len(rows) == 3 and rows[0][3] == 1000

    def test_scales_must_increase(self, cos_x1, shift_pair):
        with pytest.raises(ValueError):
            deviation_measure_curve(cos_x1, shift_pair, [100, 100], ThresholdRule(), 1000)

    def test_sampler_determinism(self):
        a = r2_phases(100, seed=5)
        b = r2_phases(100, seed=5)
        c = r2_phases(100, seed=6)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        assert not np.array_equal(a[0], c[0])
        # reasonable uniformity of the low-discrepancy set
        x1, x2 = r2_phases(4096, seed=0)
        assert abs(x1.mean() - 0.5) < 0.02 and abs(x2.mean() - 0.5) < 0.02
