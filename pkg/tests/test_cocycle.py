import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qplab import kernels
from qplab.cocycle import (
    CocycleParams,
    OverflowRegimeError,
    ScaledProduct,
    almost_invariance_defect,
    avalanche_residual,
    finite_le,
    mean_finite_le,
    orbit_blocks,
    scaling_factor,
    sl2_log_norm,
    step_matrix,
    transfer_product,
    transfer_product_det_audit,
    trotter_gap,
)
from qplab.dynamics import MultiShift, SkewShift, Torus2Point, standard_frequencies
from qplab.potential import constant_series, cosine_sum, cosine_x1, gevrey_series

X0 = Torus2Point(0.123, 0.456)


class TestStepMatrix:
    def test_zero_coupling_rotation(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        m = step_matrix(X0, p)
        assert np.allclose(m, [[0.0, -1.0], [1.0, 0.0]], atol=0)

    def test_constant_potential(self, skew_golden):
        p = CocycleParams(constant_series(1.0), skew_golden, 2.0, 1.0)
        assert np.allclose(step_matrix(X0, p), [[1.0, -1.0], [1.0, 0.0]], atol=0)

    def test_cosine_zero(self, cos_x1, skew_golden):
        p = CocycleParams(cos_x1, skew_golden, 10.0, 0.0)
        m = step_matrix(Torus2Point(0.25, 0.9), p)
        assert np.allclose(m, [[0.0, -1.0], [1.0, 0.0]], atol=1e-14)

    def test_unit_determinant(self, cos_sum, skew_golden, rng):
        p = CocycleParams(cos_sum, skew_golden, 7.3, -1.2)
        for _ in range(50):
            m = step_matrix(Torus2Point(rng.random(), rng.random()), p)
            assert abs(np.linalg.det(m) - 1.0) <= 1e-14


class TestTransferProduct:
    def test_rotation_norm_one(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        for n in (1, 17, 400):
            sp = transfer_product(X0, p, n)
            assert abs(sp.log_norm()) <= 1e-12

    def test_single_factor(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 3.0, 0.5)
        sp = transfer_product(X0, p, 1)
        expected = step_matrix(skew_golden.apply(X0), p)
        assert np.allclose(sp.mat * math.exp(sp.log_scale), expected, rtol=1e-14)

    def test_matches_extended_precision_product(self, cos_sum, skew_golden):
        # oracle: 200-bit direct product over the same orbit values
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.7)
        n = 40
        sp = transfer_product(X0, p, n)
        vals = kernels.orbit_values(cos_sum, skew_golden, X0.x1, X0.x2, n)
        with gmpy2.context(precision=200):
            m = [gmpy2.mpfr(1), gmpy2.mpfr(0), gmpy2.mpfr(0), gmpy2.mpfr(1)]
            for v in vals:
                t = gmpy2.mpfr(10.0) * gmpy2.mpfr(float(v)) - gmpy2.mpfr(0.7)
                m = [t * m[0] - m[2], t * m[1] - m[3], m[0], m[1]]
            scale = gmpy2.exp(gmpy2.mpfr(sp.log_scale))
            for got, exact in zip(sp.mat.ravel(), m):
                rel = abs(gmpy2.mpfr(float(got)) - exact / scale) / max(
                    abs(exact / scale), gmpy2.mpfr(1e-30)
                )
                assert float(rel) <= 1e-9

    def test_block_consistency(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.7)
        n = 100
        whole = transfer_product(X0, p, 2 * n)
        second = transfer_product(skew_golden.iterate(X0, n), p, n)
        first = transfer_product(X0, p, n)
        combined = second.matmul(first)
        assert combined.log_scale + sl2_log_norm(combined.mat) == pytest.approx(
            whole.log_norm(), rel=1e-8
        )
        scale = math.exp(combined.log_scale - whole.log_scale)
        assert np.allclose(combined.mat * scale, whole.mat, rtol=1e-8, atol=1e-10)

    def test_norm_at_least_one(self, cos_sum, shift_pair, rng):
        p = CocycleParams(cos_sum, shift_pair, 3.7, 1.1)
        for _ in range(25):
            x = Torus2Point(rng.random(), rng.random())
            n = int(rng.integers(1, 300))
            assert finite_le(x, p, n) >= -1e-9

    def test_det_audit_long_product(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.3)
        audit = transfer_product_det_audit(X0, p, 10**6)
        assert audit.relative_error <= 1e-8
        assert audit.segments > 10**5


class TestFiniteLE:
    def test_zero_coupling_is_zero(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        for n in (1, 10, 1000):
            assert finite_le(X0, p, n) == pytest.approx(0.0, abs=1e-12)

    def test_constant_matrix_spectral_radius(self, skew_golden):
        # closed form: for v = 1, E = 0 the matrix is constant with largest
        # eigenvalue (lam + sqrt(lam^2 - 4)) / 2
        p = CocycleParams(constant_series(1.0), skew_golden, 10.0, 0.0)
        target = math.log((10.0 + math.sqrt(96.0)) / 2.0)
        assert finite_le(X0, p, 200) == pytest.approx(target, abs=1e-3)

    def test_mean_zero_coupling(self, cos_sum, shift_pair):
        p = CocycleParams(cos_sum, shift_pair, 0.0, 0.0)
        m = mean_finite_le(p, 50, 8)
        assert m.mean == pytest.approx(0.0, abs=1e-12)
        assert m.stddev == pytest.approx(0.0, abs=1e-12)

    def test_phase_independent_cocycle(self, skew_golden):
        p = CocycleParams(constant_series(1.0), skew_golden, 10.0, 0.0)
        m = mean_finite_le(p, 60, 8)
        assert m.stddev <= 1e-12

    def test_positivity_direction(self, cos_x1, rng):
        # large-coupling lower bound, small-grid version of the sweep check
        t = standard_frequencies()["golden-pair"]
        p = CocycleParams(cos_x1, t, 10.0, 0.0)
        m = mean_finite_le(p, 100, 16)
        assert m.mean >= 0.25 * math.log(10.0)


class TestAlmostInvariance:
    def test_zero_coupling(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        assert almost_invariance_defect(X0, p, 100).defect == pytest.approx(0.0, abs=1e-12)

    def test_constant_potential(self, skew_golden):
        p = CocycleParams(constant_series(1.0), skew_golden, 5.0, 0.2)
        assert almost_invariance_defect(X0, p, 100).defect <= 1e-10

    def test_bound_holds_samples(self, cos_sum, skew_golden, rng):
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.7)
        for _ in range(100):
            x = Torus2Point(rng.random(), rng.random())
            rep = almost_invariance_defect(x, p, 500)
            assert rep.defect <= rep.bound
            assert rep.bound == pytest.approx(2.0 * p.scale / 500)


class TestScalingFactor:
    def test_values(self):
        assert scaling_factor(0.0, 1.0) == pytest.approx(math.log(4.0))
        assert scaling_factor(10.0, 1.0) == pytest.approx(math.log(24.0))

    def test_one_step_norms_within_scale(self, cos_sum, skew_golden, rng):
        lam = 10.0
        b = cos_sum.sup_norm_bound()
        s = scaling_factor(lam, b)
        lo, hi = -2.0 - lam * b, 2.0 + lam * b
        for _ in range(10**4):
            e = rng.uniform(lo, hi)
            p = CocycleParams(cos_sum, skew_golden, lam, e)
            x = Torus2Point(rng.random(), rng.random())
            m = step_matrix(x, p)
            assert sl2_log_norm(m) <= s


class TestTrotterGap:
    def test_exact_truncation_zero_gap(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 2.0, 0.5)
        rep = trotter_gap(X0, p, 5, 10)
        assert rep.gap == 0.0
        assert rep.sup_diff == 0.0

    def test_single_factor(self, skew_golden):
        v = gevrey_series(2.0, 1.0, degree=8, seed=2)
        p = CocycleParams(v, skew_golden, 2.0, 0.1)
        n_tilde = 3
        rep = trotter_gap(X0, p, 1, n_tilde)
        y = skew_golden.apply(X0)
        direct = abs(p.coupling) * abs(v.eval(y) - v.truncate(n_tilde).eval(y))
        assert rep.gap == pytest.approx(direct, rel=1e-12, abs=1e-15)
        assert rep.gap <= rep.bound

    def test_bound_holds_random_phases(self, skew_golden, rng):
        v = gevrey_series(2.0, 1.0, degree=8, seed=2)
        p = CocycleParams(v, skew_golden, 2.0, 0.4)
        for _ in range(100):
            x = Torus2Point(rng.random(), rng.random())
            rep = trotter_gap(x, p, 10, 3)
            assert rep.gap <= rep.bound

    def test_overflow_regime_rejected(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 1e100, 0.0)
        with pytest.raises(OverflowRegimeError):
            trotter_gap(X0, p, 10, 3)


class TestAvalanche:
    def test_two_blocks_identity(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.7)
        rep = avalanche_residual(orbit_blocks(X0, p, 15, 2))
        assert rep.residual <= 1e-12

    def test_commuting_diagonal(self):
        mu = 100.0
        blocks = [np.diag([mu, 1.0 / mu]) for _ in range(10)]
        rep = avalanche_residual(blocks, mu=mu)
        assert rep.residual <= 1e-12
        assert rep.hyp_ok
        assert rep.ok

    def test_orbit_blocks_bound(self, cos_sum, skew_golden, rng):
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.7)
        n_blocks = 50
        hyp_count = 0
        for _ in range(20):
            x = Torus2Point(rng.random(), rng.random())
            rep = avalanche_residual(orbit_blocks(x, p, 20, n_blocks))
            if rep.hyp_ok:
                hyp_count += 1
                assert rep.ok, f"residual {rep.residual} above c_ap*n/mu"
        assert hyp_count >= 18  # >= 90 percent of sampled phases

    def test_requires_two_blocks(self):
        with pytest.raises(ValueError):
            avalanche_residual([np.eye(2)])


class TestAgainstNumpyFallback:
    """The numba and numpy code paths must agree to near machine precision."""

    def test_le_batch_paths_agree(self, cos_sum, skew_golden):
        x1 = np.linspace(0.05, 0.95, 13)
        x2 = np.linspace(0.02, 0.9, 13)
        lam, e, n = 10.0, 0.7, 60
        fl1, fl2, re, im = kernels.series_tables(cos_sum)
        kind, w1, w2 = kernels.transform_code(skew_golden)
        got_np = kernels._le_batch_np(x1, x2, kind, w1, w2, fl1, fl2, re, im, lam, e, n)
        got = kernels.le_batch(cos_sum, skew_golden, x1, x2, lam, e, n)
        assert np.allclose(got, got_np, rtol=1e-10, atol=1e-12)

    def test_orbit_values_paths_agree(self, cos_sum, shift_pair):
        x1 = np.array([0.1, 0.4, 0.8])
        x2 = np.array([0.3, 0.6, 0.05])
        fl1, fl2, re, im = kernels.series_tables(cos_sum)
        kind, w1, w2 = kernels.transform_code(shift_pair)
        a = kernels.orbit_values_batch(cos_sum, shift_pair, x1, x2, 50)
        b = kernels._orbit_vals_np(x1, x2, kind, w1, w2, fl1, fl2, re, im, 50)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-13)
