"""Finite-box spectral diagnostics for the orbit Hamiltonian.

The box at phase x and size N is the symmetric tridiagonal matrix with
diagonal lam * v(T^n x), n = 1..N, off-diagonals -1, and Dirichlet ends.
Its eigenvalues live in [-2 - |lam| B, 2 + |lam| B] (Gershgorin with
B >= sup|v|).

The transfer product and the box determinants are two routes to the same
numbers: the product M_N equals the 2x2 matrix of determinants

    [ det(H_N(x) - E)      -det(H_{N-1}(Tx) - E) ]
    [ det(H_{N-1}(x) - E)  -det(H_{N-2}(Tx) - E) ]

with det of the empty box = 1 (and the size -1 convention 0 for N = 1).
``det_transfer_identity`` checks this with LU-pivoted determinants as the
independent path; the three-term determinant recurrence IS the transfer
recursion and is used only where an independent check is not needed (the
scaled log-determinant for Green's function bounds).

Eigenpairs come from an in-repo implicit-shift QL routine (kernels.tql2);
tests cross-check it against LAPACK. Eigenvector decay rates are fitted by
least squares on log|psi| vs distance from the peak, skipping the 3 sites
nearest the peak, a 3-site boundary margin, and anything below the 1e-12
noise floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import kernels
from .cocycle import CocycleParams, transfer_product
from .dynamics import Torus2Point
from .potential import FourierSeries2

__all__ = [
    "BoxHamiltonian",
    "build_box",
    "spectrum_interval",
    "DetTransferIdentity",
    "det_transfer_identity",
    "GreenFunction",
    "NearEigenvalueError",
    "green_function",
    "EigenpairDiagnostic",
    "LocalizationReport",
    "eigen_decay_report",
]

NOISE_FLOOR = 1e-12
CENTER_EXCLUSION = 3
BOUNDARY_MARGIN = 3


@dataclass(frozen=True)
class BoxHamiltonian:
    """Dirichlet restriction to n = 1..N: diag lam*v(T^n x), off-diagonals -1."""

    diag: np.ndarray
    size: int

    def dense(self) -> np.ndarray:
        h = np.diag(self.diag)
        idx = np.arange(self.size - 1)
        h[idx, idx + 1] = -1.0
        h[idx + 1, idx] = -1.0
        return h

    def eigensystem(self, want_vectors: bool = True):
        off = -np.ones(self.size - 1) if self.size > 1 else np.empty(0)
        return kernels.tql2(self.diag, off, want_vectors=want_vectors)


def build_box(x: Torus2Point, p: CocycleParams, n: int) -> BoxHamiltonian:
    if n < 1:
        raise ValueError("box size must be >= 1")
    vals = kernels.orbit_values(p.potential, p.transform, x.x1, x.x2, n)
    return BoxHamiltonian(p.coupling * vals, n)


def spectrum_interval(coupling: float, b_sup: float) -> tuple[float, float]:
    """[-2 - |lam| B, 2 + |lam| B]; contains every box eigenvalue when
    B >= sup|v|."""
    r = 2.0 + abs(coupling) * b_sup
    return (-r, r)


# -- determinant / transfer identity ------------------------------------------


def _dets_lu(diag: np.ndarray, energy: float) -> tuple[float, float, bool]:
    """(sign, log|det|, overflow) of the shifted box via pivoted elimination."""
    n = diag.size
    if n == 0:
        return 1.0, 0.0, False
    h = np.diag(diag - energy)
    idx = np.arange(n - 1)
    h[idx, idx + 1] = -1.0
    h[idx + 1, idx] = -1.0
    sign, logabs = np.linalg.slogdet(h)
    return float(sign), float(logabs), bool(logabs > 700.0)


@dataclass(frozen=True)
class DetTransferIdentity:
    m_entries: tuple[float, float, float, float]
    det_values: tuple[float, float, float, float]
    max_gap: float
    overflow: bool

    def ok(self, tol: float = 1e-8) -> bool:
        return (not self.overflow) and self.max_gap <= tol


def det_transfer_identity(x: Torus2Point, p: CocycleParams, n: int) -> DetTransferIdentity:
    """Transfer-product entries against the four LU determinants.

    Conventions for the small boxes: det of the empty (size 0) box is 1, the
    size -1 box contributes 0 (only reachable at n = 1). The relative gap is
    per entry, with 0-vs-0 counting as gap 0; the overflow flag is raised
    when either side leaves double range, in which case callers should
    compare in the log domain instead.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    vals = kernels.orbit_values(p.potential, p.transform, x.x1, x.x2, n)
    diag_x = p.coupling * vals  # H_n(x) diagonal, sites 1..n
    e = p.energy

    prod = transfer_product(x, p, n)
    overflow = prod.log_scale > 700.0
    m = prod.entries() if not overflow else np.full((2, 2), np.nan)

    def det_of(diag: np.ndarray) -> tuple[float, bool]:
        sign, logabs, over = _dets_lu(diag, e)
        return (sign * math.exp(min(logabs, 709.0)), over or logabs > 709.0)

    d_n, o1 = det_of(diag_x)  # det[H_n(x) - E]
    d_n1_tx, o2 = det_of(diag_x[1:])  # det[H_{n-1}(Tx) - E]
    d_n1_x, o3 = det_of(diag_x[: n - 1])  # det[H_{n-1}(x) - E]
    if n >= 2:
        d_n2_tx, o4 = det_of(diag_x[1 : n - 1])  # det[H_{n-2}(Tx) - E]
    else:
        d_n2_tx, o4 = 0.0, False  # size -1 convention
    overflow = overflow or o1 or o2 or o3 or o4

    dets = (d_n, -d_n1_tx, d_n1_x, -d_n2_tx)
    ments = (float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))
    gap = 0.0
    for a, b in zip(ments, dets):
        denom = max(abs(a), abs(b))
        if denom > 0.0:
            gap = max(gap, abs(a - b) / denom)
    return DetTransferIdentity(ments, dets, gap, overflow)


# -- Green's function ----------------------------------------------------------


class NearEigenvalueError(ValueError):
    def __init__(self, energy: float, eigenvalue: float):
        super().__init__(
            f"energy {energy!r} is within 1e-10 of box eigenvalue {eigenvalue!r}"
        )
        self.energy = energy
        self.eigenvalue = eigenvalue


def _log_det_scaled(diag: np.ndarray, energy: float) -> tuple[float, float]:
    """(sign, log|det(H - E)|) by the rescaled three-term recurrence."""
    d_prev = 1.0  # size 0
    d_prev2 = 0.0  # size -1
    logscale = 0.0
    for t in diag:
        d = (t - energy) * d_prev - d_prev2
        d_prev2 = d_prev
        d_prev = d
        m = max(abs(d_prev), abs(d_prev2))
        if m > 1e150 or (0.0 < m < 1e-150):
            d_prev /= m
            d_prev2 /= m
            logscale += math.log(m)
    if d_prev == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, d_prev), logscale + math.log(abs(d_prev))


@dataclass(frozen=True)
class CramerPair:
    n1: int
    n2: int
    log_g_abs: float
    log_bound: float

    @property
    def ok(self) -> bool:
        # tiny additive slack for rounding on the log scale
        return self.log_g_abs <= self.log_bound + 1e-9 * max(1.0, abs(self.log_bound))


@dataclass
class GreenFunction:
    matrix: np.ndarray
    energy: float
    cramer_pairs: list[CramerPair] = field(default_factory=list)

    @property
    def cramer_ok(self) -> bool:
        return all(p.ok for p in self.cramer_pairs)


def green_function(
    x: Torus2Point,
    p: CocycleParams,
    n: int,
    *,
    n_pairs: int = 20,
    seed: int = 0,
) -> GreenFunction:
    """(H_N - E)^{-1} by banded solves, plus the Cramer-rule norm bound.

    Requires E at distance >= 1e-10 from every box eigenvalue (checked with
    the in-repo eigensolver). The bound |G(n1,n2)| <= ||M_{n1}(x)|| *
    ||M_{N-n2}(T^{n2} x)|| / |det(H_N - E)| is checked in the log domain on
    n_pairs seeded random pairs n1 <= n2.
    """
    box = build_box(x, p, n)
    eigs, _ = box.eigensystem(want_vectors=False)
    gap_idx = int(np.argmin(np.abs(eigs - p.energy)))
    if abs(eigs[gap_idx] - p.energy) < 1e-10:
        raise NearEigenvalueError(p.energy, float(eigs[gap_idx]))

    ab = np.zeros((3, n))
    ab[0, 1:] = -1.0
    ab[1, :] = box.diag - p.energy
    ab[2, :-1] = -1.0
    g = solve_banded((1, 1), ab, np.eye(n))

    _, log_det = _log_det_scaled(box.diag, p.energy)
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        n1 = int(rng.integers(1, n + 1))
        n2 = int(rng.integers(n1, n + 1))
        log_m1 = transfer_product(x, p, n1).log_norm() if n1 >= 1 else 0.0
        if n - n2 >= 1:
            shifted = p.transform.iterate(x, n2)
            log_m2 = transfer_product(shifted, p, n - n2).log_norm()
        else:
            log_m2 = 0.0
        gval = abs(g[n1 - 1, n2 - 1])
        log_g = math.log(gval) if gval > 0.0 else -math.inf
        pairs.append(CramerPair(n1, n2, log_g, log_m1 + log_m2 - log_det))
    return GreenFunction(g, p.energy, pairs)


# -- eigenvector decay ----------------------------------------------------------


@dataclass(frozen=True)
class EigenpairDiagnostic:
    index: int
    eigenvalue: float
    center: int
    gamma_fit: float
    r_squared: float
    tail_mass: float


@dataclass
class LocalizationReport:
    size: int
    pairs: list[EigenpairDiagnostic]

    def mid_spectrum(self) -> list[EigenpairDiagnostic]:
        lo, hi = self.size // 4, (3 * self.size) // 4
        return [d for d in self.pairs if lo <= d.index < hi]

    def median_gamma(self, mid_only: bool = True) -> float:
        pool = self.mid_spectrum() if mid_only else self.pairs
        return float(np.median([d.gamma_fit for d in pool]))

    def median_r2(self, mid_only: bool = True) -> float:
        pool = self.mid_spectrum() if mid_only else self.pairs
        return float(np.median([d.r_squared for d in pool]))

    def to_csv_rows(self):
        return [
            (d.index, d.eigenvalue, d.center, d.gamma_fit, d.r_squared, d.tail_mass)
            for d in self.pairs
        ]


def _decay_fit(psi: np.ndarray) -> tuple[int, float, float]:
    n = psi.size
    center = int(np.argmax(np.abs(psi)))
    dists: list[float] = []
    logs: list[float] = []
    for side in (-1, 1):
        k = center + side * (CENTER_EXCLUSION + 1)
        while BOUNDARY_MARGIN <= k < n - BOUNDARY_MARGIN:
            a = abs(psi[k])
            if a <= NOISE_FLOOR:
                break  # beyond this the tail is rounding noise
            dists.append(abs(k - center))
            logs.append(math.log(a))
            k += side
    if len(logs) < 4:
        return center, 0.0, 0.0
    xs = np.asarray(dists)
    ys = np.asarray(logs)
    xm, ym = xs.mean(), ys.mean()
    sxx = float(((xs - xm) ** 2).sum())
    if sxx == 0.0:
        return center, 0.0, 0.0
    slope = float(((xs - xm) * (ys - ym)).sum()) / sxx
    resid = ys - (ym + slope * (xs - xm))
    ss_tot = float(((ys - ym) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0.0 else 0.0
    return center, -slope, r2


def eigen_decay_report(x: Torus2Point, p: CocycleParams, n: int) -> LocalizationReport:
    """Full eigendecomposition with a per-state exponential-decay fit.

    gamma_fit is minus the least-squares slope of log|psi_k| against
    |k - center|; tail_mass is the probability weight at distance > n/4
    from the peak.
    """
    if n < 16:
        raise ValueError("box size must be >= 16")
    box = build_box(x, p, n)
    eigs, vecs = box.eigensystem(want_vectors=True)
    pairs = []
    for i in range(n):
        psi = vecs[:, i]
        center, gamma, r2 = _decay_fit(psi)
        far = np.abs(np.arange(n) - center) > n / 4
        tail = float((psi[far] ** 2).sum())
        pairs.append(EigenpairDiagnostic(i, float(eigs[i]), center, gamma, r2, tail))
    return LocalizationReport(n, pairs)
