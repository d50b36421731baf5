"""Exponential-sum kernel, Birkhoff averages of shifts, the spectral identity
for shift averages, and empirical deviation-measure curves.

The normalized geometric sum K_n(t) = (1/n) sum_{j<n} e^{2 pi i j t} controls
how fast Birkhoff averages of a trigonometric mode equidistribute: for the
multi-frequency shift the average of u over n shifts equals, exactly,

    sum_l  u_hat(l) e^{2 pi i l.x} K_n(l . omega)

which this module evaluates from both sides. Deviation curves measure, for a
list of scales n, the fraction of sampled phases whose shift average strays
from the reference mean by more than a threshold rule c * n^(-tau).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .cocycle import CocycleParams
from .dynamics import MultiShift, SkewShift, Torus2Point, Transform, torus_distance
from .potential import FourierSeries2

__all__ = [
    "fejer_kernel",
    "fejer_bound_check",
    "FejerBoundCheck",
    "birkhoff_average",
    "fourier_birkhoff_identity",
    "BirkhoffIdentity",
    "ThresholdRule",
    "DeviationCurve",
    "DeviationPoint",
    "LEBlockSource",
    "deviation_measure_curve",
    "r2_phases",
]

_TWO_PI = 2.0 * math.pi


def fejer_kernel(n: int, t: float) -> complex:
    """K_n(t) = (1/n) sum_{j=0}^{n-1} e^{2 pi i j t}.

    Closed form (1/n)(1 - e^{2 pi i n t})/(1 - e^{2 pi i t}), with the direct
    sum as fallback when t is within 1e-8 of an integer and the denominator
    loses accuracy.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if torus_distance(t) < 1e-8:
        return sum(cmath.exp(2j * math.pi * j * t) for j in range(n)) / n
    num = 1.0 - cmath.exp(2j * math.pi * n * t)
    den = 1.0 - cmath.exp(2j * math.pi * t)
    return num / (n * den)


def fejer_kernel_direct(n: int, t: float) -> complex:
    """Direct n-term sum; the independent cross-check of the closed form."""
    return sum(cmath.exp(2j * math.pi * j * t) for j in range(n)) / n


@dataclass(frozen=True)
class FejerBoundCheck:
    value_abs: float
    bound: float
    ok: bool


def fejer_bound_check(n: int, t: float) -> FejerBoundCheck:
    """|K_n(t)| against min{1, 1/(n ||t||)} (bound 1 when ||t|| = 0)."""
    dist = torus_distance(t)
    bound = 1.0 if dist == 0.0 else min(1.0, 1.0 / (n * dist))
    value = abs(fejer_kernel(n, t))
    return FejerBoundCheck(value, bound, value <= bound + 1e-12)


def birkhoff_average(u: FourierSeries2, x: Torus2Point, transform: Transform, n: int) -> float:
    """(1/n) sum_{j=0}^{n-1} u(T^j x), the plain orbit mean (j = 0 included)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    vals = [u.eval(x)]
    if n > 1:
        vals.extend(kernels.orbit_values(u, transform, x.x1, x.x2, n - 1).tolist())
    return math.fsum(vals) / n


@dataclass(frozen=True)
class BirkhoffIdentity:
    direct: float
    spectral: float

    @property
    def gap(self) -> float:
        return abs(self.direct - self.spectral)


def fourier_birkhoff_identity(
    u: FourierSeries2, transform: MultiShift, x: Torus2Point, n: int
) -> BirkhoffIdentity:
    """Shift average vs its exact spectral form (multi-frequency shift only).

    direct   = (1/n) sum_j u(T^j x)
    spectral = sum_l u_hat(l) e^{2 pi i l.x} K_n(l . omega)

    The identity as written does not apply to the skew-shift, which is
    rejected.
    """
    if isinstance(transform, SkewShift):
        raise TypeError("the spectral shift-average identity requires the multi-frequency shift")
    direct = birkhoff_average(u, x, transform, n)
    acc = 0.0 + 0.0j
    for (l1, l2), coeff in u.coeffs.items():
        if l1 == 0 and l2 == 0:
            acc += coeff
            continue
        kn = fejer_kernel(n, l1 * transform.omega1 + l2 * transform.omega2)
        acc += coeff * cmath.exp(2j * math.pi * (l1 * x.x1 + l2 * x.x2)) * kn
    return BirkhoffIdentity(direct, acc.real)


# -- deviation-measure curves -------------------------------------------------


@dataclass(frozen=True)
class ThresholdRule:
    """threshold(n) = c * n^(-tau); tau = 0 gives a constant threshold."""

    c: float = 1.0
    tau: float = 0.25

    def __call__(self, n: int) -> float:
        return self.c * float(n) ** (-self.tau)


@dataclass(frozen=True)
class DeviationPoint:
    n: int
    threshold: float
    fraction: float
    samples: int


@dataclass
class DeviationCurve:
    points: list[DeviationPoint]
    source: str
    mean_mode: str  # "analytic" or "sample"

    def fractions(self) -> list[float]:
        return [p.fraction for p in self.points]

    def non_increasing(self) -> bool:
        f = self.fractions()
        return all(b <= a for a, b in zip(f, f[1:]))

    def to_csv_rows(self):
        return [(p.n, p.threshold, p.fraction, p.samples, self.source) for p in self.points]


@dataclass(frozen=True)
class LEBlockSource:
    """Deviation-curve source u(x) = (1/N0) log ||M_{N0}(x)||."""

    params: CocycleParams
    n0: int


def _splitmix01(seed: int) -> float:
    z = (seed + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return ((z ^ (z >> 31)) & 0xFFFFFFFFFFFFFFFF) / 2.0**64


def r2_phases(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 2-D low-discrepancy phases (Kronecker sequence on the
    plastic-number pair), shifted by a seed-derived offset."""
    g = 1.3247179572447460260
    a1, a2 = 1.0 / g, 1.0 / (g * g)
    i = np.arange(1, n + 1, dtype=np.float64)
    return (
        (_splitmix01(seed) + a1 * i) % 1.0,
        (_splitmix01(seed ^ 0x5851F42D4C957F2D) + a2 * i) % 1.0,
    )


def _shift_averages_series(
    u: FourierSeries2, transform: Transform, x1s: np.ndarray, x2s: np.ndarray, n: int
) -> np.ndarray:
    """Vectorized (1/n) sum_{j<n} u(T^j x) for an array of phases."""
    acc = kernels.eval_series(u, x1s, x2s).astype(np.float64)
    if n > 1:
        vals = kernels.orbit_values_batch(u, transform, x1s, x2s, n - 1)
        acc = acc + vals.sum(axis=0)
    return acc / n


def _shift_averages_le(
    src: LEBlockSource, transform: Transform, x1s: np.ndarray, x2s: np.ndarray, n: int
) -> np.ndarray:
    """(1/n) sum_{j<n} L_{N0}(T^j x): one orbit of potential values per phase,
    then a scaled product per window."""
    p = src.params
    n0 = src.n0
    vals = kernels.orbit_values_batch(p.potential, transform, x1s, x2s, n - 1 + n0)
    out = np.zeros(x1s.size)
    for j in range(n):
        le = kernels.le_from_orbit_values(vals[j : j + n0], p.coupling, p.energy)
        out += le
    return out / n


def deviation_measure_curve(
    u_source,
    transform: Transform,
    scales: Sequence[int],
    threshold: ThresholdRule,
    sample_n: int,
    *,
    sampler: str = "lowdisc",
    seed: int = 0,
) -> DeviationCurve:
    """Fraction of phases whose n-shift average deviates from the mean.

    For an explicit series the reference mean is the analytic one (the (0,0)
    coefficient); for a cocycle source it is the sample mean over the same
    phase set. Phases come from the seeded low-discrepancy sequence or, with
    sampler="grid", a half-cell-offset uniform grid. Both the sampling and
    the reduction order are deterministic.
    """
    if sample_n < 10**3:
        raise ValueError("sample_n must be >= 1000")
    scales = list(scales)
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly increasing")
    if sampler == "grid":
        g = int(math.ceil(math.sqrt(sample_n)))
        u = (np.arange(g) + 0.5) / g
        x1s, x2s = (a.ravel() for a in np.meshgrid(u, u, indexing="ij"))
    elif sampler == "lowdisc":
        x1s, x2s = r2_phases(sample_n, seed)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")

    points = []
    if isinstance(u_source, FourierSeries2):
        source = u_source.name or "series"
        mean_mode = "analytic"
        for n in scales:
            avg = _shift_averages_series(u_source, transform, x1s, x2s, n)
            thr = threshold(n)
            frac = float(np.mean(np.abs(avg - u_source.mean()) > thr))
            points.append(DeviationPoint(n, thr, frac, x1s.size))
    elif isinstance(u_source, LEBlockSource):
        source = f"le-blocks:n0={u_source.n0}"
        mean_mode = "sample"
        for n in scales:
            avg = _shift_averages_le(u_source, transform, x1s, x2s, n)
            thr = threshold(n)
            frac = float(np.mean(np.abs(avg - avg.mean()) > thr))
            points.append(DeviationPoint(n, thr, frac, x1s.size))
    else:
        raise TypeError("u_source must be a FourierSeries2 or LEBlockSource")
    return DeviationCurve(points, source, mean_mode)
