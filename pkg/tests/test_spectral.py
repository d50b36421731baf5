import math

import numpy as np
import pytest

from qplab import kernels
from qplab.cocycle import CocycleParams
from qplab.dynamics import Torus2Point
from qplab.potential import constant_series, cosine_sum
from qplab.spectral import (
    NearEigenvalueError,
    build_box,
    det_transfer_identity,
    eigen_decay_report,
    green_function,
    spectrum_interval,
)

X0 = Torus2Point(0.123, 0.456)


class TestBuildBox:
    def test_single_site(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 3.0, 0.0)
        box = build_box(X0, p, 1)
        y = skew_golden.apply(X0)
        assert box.diag[0] == pytest.approx(3.0 * cos_sum.eval(y), rel=1e-14)

    def test_constant_potential(self, skew_golden):
        p = CocycleParams(constant_series(1.0), skew_golden, 3.0, 0.0)
        box = build_box(X0, p, 8)
        assert np.allclose(box.diag, 3.0)

    def test_free_box_eigenvalues_closed_form(self, cos_sum, skew_golden):
        # Dirichlet Laplacian box: eigenvalues -2 cos(pi k / (N+1))
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        n = 48
        box = build_box(X0, p, n)
        eigs, _ = box.eigensystem(want_vectors=False)
        expected = np.sort(-2.0 * np.cos(np.pi * np.arange(1, n + 1) / (n + 1)))
        assert np.abs(eigs - expected).max() <= 1e-10


class TestEigensolver:
    def test_against_lapack_oracle(self, rng):
        for n in (2, 3, 16, 100):
            diag = rng.normal(size=n) * 3.0
            off = rng.normal(size=n - 1)
            d, z = kernels.tql2(diag, off)
            h = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
            oracle = np.linalg.eigvalsh(h)
            scale = max(1.0, np.abs(oracle).max())
            assert np.abs(d - oracle).max() <= 1e-12 * scale
            # residuals and orthonormality
            res = h @ z - z * d
            assert np.abs(res).max() <= 1e-10 * scale
            assert np.abs(z.T @ z - np.eye(n)).max() <= 1e-10

    def test_values_only_path(self, rng):
        diag = rng.normal(size=32)
        off = rng.normal(size=31)
        d, z = kernels.tql2(diag, off, want_vectors=False)
        assert z is None
        h = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        assert np.abs(d - np.linalg.eigvalsh(h)).max() <= 1e-11


class TestDetTransferIdentity:
    def test_single_site(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 5.0, 0.7)
        rep = det_transfer_identity(X0, p, 1)
        y = skew_golden.apply(X0)
        assert rep.det_values[0] == pytest.approx(5.0 * cos_sum.eval(y) - 0.7, rel=1e-12)
        assert rep.det_values[1] == pytest.approx(-1.0)
        assert rep.det_values[2] == pytest.approx(1.0)
        assert rep.det_values[3] == pytest.approx(0.0, abs=0)
        assert rep.max_gap <= 1e-12

    def test_free_box_chebyshev(self, cos_sum, skew_golden):
        # lam = 0, E = 0: the product is the rotation power J^4 = I and the
        # free-box determinants follow D_n = -D_{n-2}, D_0 = 1, D_1 = 0
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        rep = det_transfer_identity(X0, p, 4)
        assert rep.det_values == pytest.approx((1.0, 0.0, 0.0, 1.0), abs=1e-12)
        assert rep.max_gap <= 1e-12

    def test_moderate_coupling_gap(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 5.0, 0.7)
        rep = det_transfer_identity(X0, p, 12)
        assert rep.max_gap <= 1e-9
        assert not rep.overflow

    def test_gap_up_to_n60(self, cos_sum, skew_golden, rng):
        p = CocycleParams(cos_sum, skew_golden, 10.0, 0.7)
        for _ in range(6):
            x = Torus2Point(rng.random(), rng.random())
            n = int(rng.integers(2, 61))
            rep = det_transfer_identity(x, p, n)
            if not rep.overflow:
                assert rep.max_gap <= 1e-8


class TestGreenFunction:
    def test_single_site(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 3.0, 0.4)
        g = green_function(X0, p, 1)
        y = skew_golden.apply(X0)
        assert g.matrix[0, 0] == pytest.approx(1.0 / (3.0 * cos_sum.eval(y) - 0.4), rel=1e-12)

    def test_free_box_3x3_oracle(self, cos_sum, skew_golden):
        # dense-inverse oracle for the shifted free box
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.5)
        g = green_function(X0, p, 3)
        h = np.array([[-0.5, -1.0, 0.0], [-1.0, -0.5, -1.0], [0.0, -1.0, -0.5]])
        assert np.allclose(g.matrix, np.linalg.inv(h), rtol=1e-12, atol=1e-14)

    def test_near_eigenvalue_rejected(self, cos_sum, skew_golden):
        # E = 0 is an eigenvalue of the free 3-site box
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        with pytest.raises(NearEigenvalueError):
            green_function(X0, p, 3)

    def test_identity_and_cramer(self, cos_sum, skew_golden, rng):
        for _ in range(5):
            x = Torus2Point(rng.random(), rng.random())
            e = float(rng.uniform(-12, 12))
            p = CocycleParams(cos_sum, skew_golden, 10.0, e)
            try:
                g = green_function(x, p, 40)
            except NearEigenvalueError:
                continue
            box = build_box(x, p, 40)
            resid = np.abs((box.dense() - e * np.eye(40)) @ g.matrix - np.eye(40)).max()
            assert resid <= 1e-8
            assert g.cramer_ok
            assert len(g.cramer_pairs) == 20


class TestSpectrumInterval:
    def test_free_interval(self):
        assert spectrum_interval(0.0, 1.0) == (-2.0, 2.0)

    def test_scaled_interval(self):
        assert spectrum_interval(10.0, 1.0) == (-12.0, 12.0)

    def test_eigenvalues_inside_for_random_configs(self, cos_sum, skew_golden, rng):
        b = cos_sum.sup_norm_bound()
        for _ in range(100):
            lam = float(rng.uniform(-10, 10))
            lo, hi = spectrum_interval(lam, b)
            x = Torus2Point(rng.random(), rng.random())
            p = CocycleParams(cos_sum, skew_golden, lam, 0.0)
            box = build_box(x, p, 24)
            eigs, _ = box.eigensystem(want_vectors=False)
            assert eigs.min() >= lo - 1e-9 and eigs.max() <= hi + 1e-9


class TestEigenDecay:
    def test_free_box_delocalized(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 0.0, 0.0)
        rep = eigen_decay_report(X0, p, 128)
        assert abs(rep.median_gamma()) <= 0.05
        assert rep.median_r2() <= 0.3

    def test_strong_coupling_localized(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 1000.0, 0.0)
        rep = eigen_decay_report(X0, p, 128)
        gammas = [d.gamma_fit for d in rep.pairs]
        frac_large = np.mean([g >= 3.0 for g in gammas])
        assert frac_large >= 0.9

    def test_report_shape(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 50.0, 0.0)
        rep = eigen_decay_report(X0, p, 64)
        assert len(rep.pairs) == 64
        eigs = [d.eigenvalue for d in rep.pairs]
        assert eigs == sorted(eigs)
        rows = rep.to_csv_rows()
        assert len(rows[0]) == 6
        # localized states have near-zero tail mass
        assert np.median([d.tail_mass for d in rep.pairs]) <= 1e-6

    def test_minimum_size(self, cos_sum, skew_golden):
        p = CocycleParams(cos_sum, skew_golden, 1.0, 0.0)
        with pytest.raises(ValueError):
            eigen_decay_report(X0, p, 8)
