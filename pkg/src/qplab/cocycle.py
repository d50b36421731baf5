"""Transfer-matrix cocycles: scaled products, finite-scale exponents, almost
invariance, truncation perturbation bounds, and the avalanche residual.

The one-step matrix at phase y is [[lam*v(y) - E, -1], [1, 0]], and the
N-step product multiplies factors at T^1 x, ..., T^N x (factor index growing
to the left). Products are renormalized by the max entry magnitude after
every factor, with the extracted scale accumulated as a natural log, so
``ScaledProduct`` holds N up to 10**6 without overflow and reconstructs
det = 1 in the log domain.

For energies inside [-2 - |lam| B, 2 + |lam| B] every factor satisfies
||A|| <= 2 |lam| B + 4 =: exp(S), and S is the scale used by the almost
invariance bound 2 S / N and the truncation (Trotter-style) bound
N |lam| e^{(N-1) S} sup|v - v_trunc|.

The avalanche residual compares log||A_n ... A_1|| against the telescoping
sum of block and pair-block log norms. For strongly hyperbolic blocks the
residual is of order n / mu with mu the smallest block norm, far below what
double arithmetic on log norms of size ~10^3 can resolve, so the residual
is evaluated in multi-precision (gmpy2) on the exact double inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import gmpy2
import numpy as np

from . import kernels
from .dynamics import Torus2Point, Transform
from .potential import FourierSeries2

__all__ = [
    "CocycleParams",
    "ScaledProduct",
    "MeanLE",
    "AlmostInvariance",
    "TrotterGap",
    "AvalancheReport",
    "OverflowRegimeError",
    "step_matrix",
    "transfer_product",
    "finite_le",
    "mean_finite_le",
    "almost_invariance_defect",
    "scaling_factor",
    "trotter_gap",
    "avalanche_residual",
    "orbit_blocks",
    "sl2_log_norm",
    "half_cell_grid",
]


class OverflowRegimeError(RuntimeError):
    """Raised when an unrenormalized product would leave double range."""


def sl2_norm(m: np.ndarray) -> float:
    """Largest singular value of a 2x2 matrix, in closed form."""
    a, b, c, d = float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])
    p = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = max(p * p - 4.0 * det * det, 0.0)
    return math.sqrt(0.5 * (p + math.sqrt(disc)))


def sl2_log_norm(m: np.ndarray) -> float:
    return math.log(sl2_norm(m))


@dataclass(frozen=True)
class CocycleParams:
    """Potential, dynamics, coupling and energy for one cocycle.

    sup_bound defaults to the coefficient-sum majorant of the potential,
    which dominates sup|v| (and equals it for the cosine presets); it feeds
    the scale S = log(2 |lam| B + 4).
    """

    potential: FourierSeries2
    transform: Transform
    coupling: float
    energy: float
    sup_bound: float | None = None

    @property
    def b_sup(self) -> float:
        if self.sup_bound is not None:
            return self.sup_bound
        return self.potential.sup_norm_bound()

    @property
    def scale(self) -> float:
        return scaling_factor(self.coupling, self.b_sup)


def scaling_factor(coupling: float, b_sup: float) -> float:
    """S with ||A|| <= e^S for all phases and |E| <= 2 + |coupling| b_sup."""
    if b_sup < 0:
        raise ValueError("b_sup must be >= 0")
    return math.log(2.0 * abs(coupling) * b_sup + 4.0)


def step_matrix(x: Torus2Point, p: CocycleParams) -> np.ndarray:
    """One-step matrix [[lam v(x) - E, -1], [1, 0]] at the given phase."""
    t = p.coupling * p.potential.eval(x) - p.energy
    return np.array(((t, -1.0), (1.0, 0.0)))


@dataclass(frozen=True)
class ScaledProduct:
    """2x2 product in scaled form: value = mat * exp(log_scale)."""

    mat: np.ndarray
    log_scale: float

    def log_norm(self) -> float:
        return self.log_scale + sl2_log_norm(self.mat)

    def det_log_defect(self) -> float:
        """log|det| of the reconstructed product; 0 for an exact SL2 product.

        Only meaningful while log_scale is small (roughly <= 15): for strongly
        hyperbolic products the scaled matrix is near rank-1 and its double
        determinant is pure cancellation noise. Use det_audit for long
        products.
        """
        det = float(self.mat[0, 0] * self.mat[1, 1] - self.mat[0, 1] * self.mat[1, 0])
        if det == 0.0:
            return -math.inf
        return math.log(abs(det)) + 2.0 * self.log_scale

    def reconstructed_det(self) -> float:
        det = float(self.mat[0, 0] * self.mat[1, 1] - self.mat[0, 1] * self.mat[1, 0])
        defect = self.det_log_defect()
        return math.copysign(math.exp(defect), det) if math.isfinite(defect) else 0.0

    def entries(self) -> np.ndarray:
        """Unscaled entries; overflows for log_scale beyond ~709."""
        return self.mat * math.exp(self.log_scale)

    def matmul(self, right: "ScaledProduct") -> "ScaledProduct":
        m = self.mat @ right.mat
        s = float(np.abs(m).max())
        if s == 0.0:
            return ScaledProduct(m, -math.inf)
        return ScaledProduct(m / s, self.log_scale + right.log_scale + math.log(s))


def transfer_product(x: Torus2Point, p: CocycleParams, n: int) -> ScaledProduct:
    """Scaled product of the n transfer factors along the orbit of x."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b, c, d, ls = kernels.product_scaled(
        p.potential, p.transform, x.x1, x.x2, p.coupling, p.energy, n
    )
    return ScaledProduct(np.array(((a, b), (c, d))), ls)


@dataclass(frozen=True)
class DetAudit:
    """Segmented determinant-drift measurement of a long scaled product.

    log_defect sums log|det| + 2 log_scale over segments short enough that
    the segment determinant is far above double rounding; |log_defect| is the
    measurable relative drift of det(M_n) away from 1 (the end matrix alone
    cannot resolve it once the product is strongly hyperbolic).
    """

    product: ScaledProduct
    log_defect: float
    segments: int

    @property
    def relative_error(self) -> float:
        return abs(math.expm1(self.log_defect))


def transfer_product_det_audit(
    x: Torus2Point, p: CocycleParams, n: int, seg_ls_max: float = 4.0
) -> DetAudit:
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b, c, d, ls, defect, nseg = kernels.product_det_audit(
        p.potential, p.transform, x.x1, x.x2, p.coupling, p.energy, n, seg_ls_max
    )
    return DetAudit(ScaledProduct(np.array(((a, b), (c, d))), ls), defect, nseg)


def finite_le(x: Torus2Point, p: CocycleParams, n: int) -> float:
    """(1/n) log ||M_n(x)||; nonnegative up to rounding since det M_n = 1."""
    return transfer_product(x, p, n).log_norm() / n


@dataclass(frozen=True)
class MeanLE:
    mean: float
    stddev: float
    grid_n: int
    n: int


def half_cell_grid(grid_n: int, offset: tuple[float, float] | None = None):
    """Phase grid {(i/g + o1, j/g + o2)}; default offset is half a cell."""
    if offset is None:
        offset = (0.5 / grid_n, 0.5 / grid_n)
    u = np.arange(grid_n) / grid_n
    x1, x2 = np.meshgrid(u + offset[0], u + offset[1], indexing="ij")
    return x1.ravel() % 1.0, x2.ravel() % 1.0


def mean_finite_le(
    p: CocycleParams,
    n: int,
    phase_grid_n: int,
    offset: tuple[float, float] | None = None,
) -> MeanLE:
    """Phase average of the finite-scale exponent over a shifted uniform grid.

    The default half-cell offset avoids lattice resonances with rational test
    frequencies. Values are computed into a fixed array order and reduced in
    that order, independent of the backend's thread count.
    """
    if phase_grid_n < 4:
        raise ValueError("phase_grid_n must be >= 4")
    x1, x2 = half_cell_grid(phase_grid_n, offset)
    le = kernels.le_batch(p.potential, p.transform, x1, x2, p.coupling, p.energy, n)
    return MeanLE(float(le.mean()), float(le.std()), phase_grid_n, n)


@dataclass(frozen=True)
class AlmostInvariance:
    defect: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.defect <= self.bound


def almost_invariance_defect(x: Torus2Point, p: CocycleParams, n: int) -> AlmostInvariance:
    """|L_n(x) - L_n(Tx)| against its uniform bound 2 S / n."""
    defect = abs(finite_le(x, p, n) - finite_le(p.transform.apply(x), p, n))
    return AlmostInvariance(defect, 2.0 * p.scale / n)


@dataclass(frozen=True)
class TrotterGap:
    gap: float
    bound: float
    sup_diff: float

    @property
    def ok(self) -> bool:
        return self.gap <= self.bound


def trotter_gap(
    x: Torus2Point, p: CocycleParams, n: int, n_tilde: int, sup_grid_n: int = 256
) -> TrotterGap:
    """|| M_n - M~_n || for the degree-n_tilde truncation, with its bound.

    The bound is n |lam| e^{(n-1)S} sup|v - v_trunc| (sup over a grid); the
    gap is the spectral norm of the direct difference of unrenormalized
    products, valid while n*S <= 600 keeps everything in double range.
    """
    s = p.scale
    if n * s > 600.0:
        raise OverflowRegimeError(f"n * S = {n * s:.1f} > 600; reduce n")
    trunc = p.potential.truncate(n_tilde)
    m_full = kernels.product_raw(p.potential, p.transform, x.x1, x.x2, p.coupling, p.energy, n)
    m_trunc = kernels.product_raw(trunc, p.transform, x.x1, x.x2, p.coupling, p.energy, n)
    gap = sl2_norm(m_full - m_trunc)
    diff_grid = p.potential.eval_grid(sup_grid_n) - trunc.eval_grid(sup_grid_n)
    sup_diff = float(np.abs(diff_grid).max())
    bound = n * abs(p.coupling) * math.exp((n - 1) * s) * sup_diff
    return TrotterGap(gap, bound, sup_diff)


# -- avalanche principle -------------------------------------------------------


@dataclass(frozen=True)
class AvalancheReport:
    """Residual of the block-telescoping identity and its hypothesis check.

    residual = |log||A_n...A_1|| + sum_{j=2}^{n-1} log||A_j||
               - sum_{j=1}^{n-1} log||A_{j+1} A_j|||
    hyp_ok requires min_j ||A_j|| >= mu >= n and pair-defect <= (1/2) log mu.
    When hyp_ok, ok records residual <= c_ap * n / mu (compared in extended
    precision; the float bound field may underflow to 0 for huge mu).
    """

    residual: float
    hyp_ok: bool
    bound: float
    ok: bool | None
    mu_log: float
    n_blocks: int
    c_ap: float


def _to_mpfr_matrix(block) -> list:
    if isinstance(block, ScaledProduct):
        scale = gmpy2.exp(gmpy2.mpfr(block.log_scale))
        m = block.mat
    else:
        scale = gmpy2.mpfr(1)
        m = np.asarray(block, dtype=np.float64)
    return [
        gmpy2.mpfr(float(m[0, 0])) * scale,
        gmpy2.mpfr(float(m[0, 1])) * scale,
        gmpy2.mpfr(float(m[1, 0])) * scale,
        gmpy2.mpfr(float(m[1, 1])) * scale,
    ]


def _mpfr_log_norm(m: list):
    a, b, c, d = m
    p = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = p * p - 4 * det * det
    if disc < 0:
        disc = gmpy2.mpfr(0)
    return gmpy2.log((p + gmpy2.sqrt(disc)) / 2) / 2


def _mpfr_matmul(l: list, r: list) -> list:
    return [
        l[0] * r[0] + l[1] * r[2],
        l[0] * r[1] + l[1] * r[3],
        l[2] * r[0] + l[3] * r[2],
        l[2] * r[1] + l[3] * r[3],
    ]


def avalanche_residual(
    blocks: Sequence,
    mu: float | None = None,
    c_ap: float = 10.0,
    precision_bits: int = 256,
) -> AvalancheReport:
    """Evaluate the telescoping residual for a chain of 2x2 blocks.

    Blocks may be ScaledProduct values or plain 2x2 arrays; A_1 is
    ``blocks[0]`` and the full product is A_n ... A_1. mu defaults to the
    measured smallest block norm. All norms, logs and the full product are
    computed with gmpy2 at ``precision_bits`` so that residuals of order
    n/mu are resolved even when mu is astronomically large.
    """
    n = len(blocks)
    if n < 2:
        raise ValueError("need at least 2 blocks")
    with gmpy2.context(precision=precision_bits):
        ms = [_to_mpfr_matrix(b) for b in blocks]
        log_norms = [_mpfr_log_norm(m) for m in ms]
        pair_log_norms = [_mpfr_log_norm(_mpfr_matmul(ms[j + 1], ms[j])) for j in range(n - 1)]
        full = ms[0]
        for j in range(1, n):
            full = _mpfr_matmul(ms[j], full)
        log_full = _mpfr_log_norm(full)
        residual = abs(log_full + sum(log_norms[1:-1]) - sum(pair_log_norms))

        log_mu = min(log_norms) if mu is None else gmpy2.log(gmpy2.mpfr(mu))
        hyp_ok = bool(log_mu >= math.log(n)) and all(ln >= log_mu for ln in log_norms)
        if hyp_ok:
            for j in range(n - 1):
                if log_norms[j + 1] + log_norms[j] - pair_log_norms[j] > log_mu / 2:
                    hyp_ok = False
                    break
        ok = None
        bound = c_ap * n * gmpy2.exp(-log_mu)
        if hyp_ok:
            ok = bool(residual <= bound)
        return AvalancheReport(
            residual=float(residual),
            hyp_ok=hyp_ok,
            bound=float(bound),
            ok=ok,
            mu_log=float(log_mu),
            n_blocks=n,
            c_ap=c_ap,
        )


def orbit_blocks(x: Torus2Point, p: CocycleParams, n0: int, count: int) -> list[ScaledProduct]:
    """count scale-n0 blocks M_{n0}(T^{(j-1) n0} x), j = 1..count."""
    out = []
    base = x
    for _ in range(count):
        out.append(transfer_product(base, p, n0))
        base = p.transform.iterate(base, n0)
    return out
