import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qplab.dynamics import (
    DiophantineParams,
    MultiShift,
    SkewShift,
    Torus2Point,
    check_diophantine,
    iterate,
    standard_frequencies,
    torus_distance,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def compose(x, t, n):
    for _ in range(n):
        x = t.apply(x)
    return x


class TestIterate:
    def test_skew_one_step(self):
        got = iterate(Torus2Point(0.2, 0.3), SkewShift(0.5), 1)
        assert got.as_tuple() == pytest.approx((0.5, 0.8), abs=1e-15)

    def test_zero_steps_is_identity(self):
        x = Torus2Point(0.37, 0.91)
        for t in (SkewShift(GOLDEN), MultiShift(0.3, 0.7)):
            assert iterate(x, t, 0) is x

    def test_skew_closed_form_matches_composition(self):
        # brute-force composition oracle
        t = SkewShift(math.sqrt(2.0) - 1.0)
        x = Torus2Point(0.1, 0.2)
        assert iterate(x, t, 7).distance(compose(x, t, 7)) <= 1e-12

    @pytest.mark.parametrize("n", [1, 13, 257, 10_000])
    def test_closed_form_vs_composition_long(self, n, skew_golden, shift_pair):
        x = Torus2Point(0.123456, 0.654321)
        for t in (skew_golden, shift_pair):
            assert iterate(x, t, n).distance(compose(x, t, n)) <= 1e-10

    @given(
        x1=st.floats(0, 1, exclude_max=True),
        x2=st.floats(0, 1, exclude_max=True),
        m=st.integers(0, 3000),
        n=st.integers(0, 3000),
    )
    @settings(max_examples=60, deadline=None)
    def test_flow_property(self, x1, x2, m, n):
        t = SkewShift(GOLDEN)
        x = Torus2Point(x1, x2)
        left = iterate(x, t, m + n)
        right = iterate(iterate(x, t, m), t, n)
        assert left.distance(right) <= 1e-10

    def test_large_n_exactness(self):
        # n(n-1)/2 exceeds 2^53 territory is avoided at desk scale, but the
        # integer-arithmetic path must still beat plain double products.
        t = SkewShift(GOLDEN)
        x = Torus2Point(0.0, 0.0)
        n = 10**6
        got = iterate(x, t, n)
        tri = n * (n - 1) // 2
        num, den = GOLDEN.as_integer_ratio()
        exact1 = float((tri * num) % den) / den
        exact2 = float((n * num) % den) / den
        assert torus_distance(got.x1 - exact1) <= 1e-15
        assert torus_distance(got.x2 - exact2) <= 1e-15


class TestTorusDistance:
    @pytest.mark.parametrize("t,expected", [(0.5, 0.5), (0.9, 0.1), (3.0, 0.0)])
    def test_examples(self, t, expected):
        assert torus_distance(t) == pytest.approx(expected, abs=1e-15)

    @given(st.floats(-100, 100))
    @settings(max_examples=200, deadline=None)
    def test_periodic_and_symmetric(self, t):
        d = torus_distance(t)
        assert 0.0 <= d <= 0.5
        assert torus_distance(-t) == d
        assert torus_distance(t + 1.0) == pytest.approx(d, abs=1e-12)


class TestDiophantine:
    def test_rational_frequency_fails(self):
        rep = check_diophantine(SkewShift(1.0 / 3.0), DiophantineParams(0.1, 10))
        assert not rep.holds
        assert rep.worst_l[0] == 3
        assert rep.worst_margin <= 0
        assert rep.worst_value == pytest.approx(0.0, abs=1e-15)

    def test_golden_holds_with_cf_oracle(self):
        # independent oracle: all partial quotients of the golden mean are 1,
        # so ||q w|| >= 1 / (q (a_max + 2)) = 1/(3q) for every q >= 1
        num, den = GOLDEN.as_integer_ratio()
        acc = 0
        for q in range(1, 10**4 + 1):
            acc = (acc + num) % den
            dist = min(acc, den - acc) / den
            assert dist >= 1.0 / (3.0 * q)
            assert dist > 0.05 / (q * math.log(1 + q) ** 2)
        rep = check_diophantine(SkewShift(GOLDEN), DiophantineParams(0.05, 10**4))
        assert rep.holds

    def test_multi_pair_holds(self):
        t = MultiShift(math.sqrt(2) - 1, math.sqrt(3) - 1)
        rep = check_diophantine(t, DiophantineParams(0.01, 200, exponent_a=3.0))
        assert rep.holds
        # exhaustive exact-arithmetic oracle on a smaller box
        n1, d1 = t.omega1.as_integer_ratio()
        n2, d2 = t.omega2.as_integer_ratio()
        for l1 in range(-50, 51):
            for l2 in range(-50, 51):
                k = abs(l1) + abs(l2)
                if k == 0 or k > 50:
                    continue
                num = l1 * n1 * d2 + l2 * n2 * d1
                den = d1 * d2
                r = num % den
                dist = min(r, den - r) / den
                assert dist > 0.01 / k**3

    def test_report_rows_schema(self):
        rep = check_diophantine(SkewShift(GOLDEN), DiophantineParams(0.05, 100))
        rows = rep.to_csv_rows()
        assert rows and all(len(r) == 4 for r in rows)
        label, value, bound, margin = rows[0]
        assert isinstance(label, str)
        assert margin == pytest.approx(value - bound)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            DiophantineParams(0.0, 10)
        with pytest.raises(ValueError):
            DiophantineParams(0.1, 10, exponent_a=2.0)
        with pytest.raises(ValueError):
            DiophantineParams(0.1, 0)


def test_standard_frequencies():
    presets = standard_frequencies()
    assert presets["golden"] == SkewShift((math.sqrt(5) - 1) / 2)
    assert presets["sqrt2"] == SkewShift(math.sqrt(2) - 1)
    assert presets["pair"] == MultiShift(math.sqrt(2) - 1, math.sqrt(3) - 1)
    assert isinstance(presets["golden-pair"], MultiShift)
