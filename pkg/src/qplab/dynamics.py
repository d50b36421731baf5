"""Ergodic transformations of the 2-torus and Diophantine verification.

Two dynamics are supported: the skew-shift ``(x1, x2) -> (x1 + x2, x2 + omega)``
and the multi-frequency shift ``(x1, x2) -> (x1 + omega1, x2 + omega2)``, both
taken mod 1. The n-th iterate has a closed form in each case,

    skew:  (x1 + n*x2 + n(n-1)/2 * omega,  x2 + n*omega)
    shift: (x1 + n*omega1,  x2 + n*omega2)

which is evaluated exactly: every product ``k * w`` of an integer with a
float is reduced mod 1 in integer arithmetic on the exact binary fraction of
``w``, so the closed form carries no accumulation error even for n around
10**6 where n(n-1)/2 exceeds 2**53. (Plain double products would lose
~1e-9 already at n = 10**4.)

Diophantine conditions are verified over a finite horizon only, and the
report says so; the conditions themselves quantify over all integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

__all__ = [
    "Torus2Point",
    "SkewShift",
    "MultiShift",
    "Transform",
    "DiophantineParams",
    "DiophantineReport",
    "torus_distance",
    "iterate",
    "check_diophantine",
    "standard_frequencies",
]


def _mod1(t: float) -> float:
    """Reduce to [0, 1); exact integers map to 0.0."""
    r = math.fmod(t, 1.0)
    return r + 1.0 if r < 0.0 else r


def _frac_mul(k: int, w: float) -> float:
    """frac(k * w) computed exactly via the binary fraction of w.

    w is a double, hence an exact rational num/den with den a power of two;
    (k*num) mod den is exact in Python integers, and the final division is
    a single correctly rounded float operation.
    """
    if k == 0:
        return 0.0
    num, den = float(w).as_integer_ratio()
    r = (k * num) % den
    return r / den


def torus_distance(t: float) -> float:
    """Distance from t to the nearest integer, in [0, 1/2].

    Computed as min(|r|, 1 - |r|) with r = fmod(t, 1), which is exactly
    symmetric under t -> -t (fmod is odd and exact).
    """
    r = abs(math.fmod(t, 1.0))
    return min(r, 1.0 - r)


@dataclass(frozen=True)
class Torus2Point:
    """A point of the 2-torus; coordinates are kept reduced into [0, 1)."""

    x1: float
    x2: float

    def __post_init__(self):
        object.__setattr__(self, "x1", _mod1(self.x1))
        object.__setattr__(self, "x2", _mod1(self.x2))

    def as_tuple(self) -> tuple[float, float]:
        return (self.x1, self.x2)

    def distance(self, other: "Torus2Point") -> float:
        """Max over coordinates of the torus metric."""
        return max(
            torus_distance(self.x1 - other.x1),
            torus_distance(self.x2 - other.x2),
        )


@dataclass(frozen=True)
class SkewShift:
    """(x1, x2) -> (x1 + x2, x2 + omega) mod 1."""

    omega: float

    def __post_init__(self):
        object.__setattr__(self, "omega", _mod1(self.omega))

    def apply(self, p: Torus2Point) -> Torus2Point:
        return Torus2Point(p.x1 + p.x2, p.x2 + self.omega)

    def iterate(self, p: Torus2Point, n: int) -> Torus2Point:
        if n < 0:
            raise ValueError("iteration count must be >= 0")
        if n == 0:
            return p
        tri = (n * (n - 1)) // 2
        x1 = _mod1(p.x1 + _frac_mul(n, p.x2) + _frac_mul(tri, self.omega))
        x2 = _mod1(p.x2 + _frac_mul(n, self.omega))
        return Torus2Point(x1, x2)


@dataclass(frozen=True)
class MultiShift:
    """(x1, x2) -> (x1 + omega1, x2 + omega2) mod 1; frequencies as an ordered pair."""

    omega1: float
    omega2: float

    def __post_init__(self):
        object.__setattr__(self, "omega1", _mod1(self.omega1))
        object.__setattr__(self, "omega2", _mod1(self.omega2))

    def apply(self, p: Torus2Point) -> Torus2Point:
        return Torus2Point(p.x1 + self.omega1, p.x2 + self.omega2)

    def iterate(self, p: Torus2Point, n: int) -> Torus2Point:
        if n < 0:
            raise ValueError("iteration count must be >= 0")
        if n == 0:
            return p
        x1 = _mod1(p.x1 + _frac_mul(n, self.omega1))
        x2 = _mod1(p.x2 + _frac_mul(n, self.omega2))
        return Torus2Point(x1, x2)


Transform = Union[SkewShift, MultiShift]


def iterate(p: Torus2Point, transform: Transform, n: int) -> Torus2Point:
    """n-th iterate of the transformation, by the exact closed form."""
    return transform.iterate(p, n)


def orbit(p: Torus2Point, transform: Transform, n: int) -> Iterator[Torus2Point]:
    """Yield T^1 p, ..., T^n p by repeated application of the one-step map."""
    q = p
    for _ in range(n):
        q = transform.apply(q)
        yield q


@dataclass(frozen=True)
class DiophantineParams:
    """Finite-horizon parameters for the Diophantine check.

    kappa > 0 is the constant in the lower bound, exponent_a > 2 is used
    only for the multi-frequency condition, l_max is the verification horizon.
    """

    kappa: float
    l_max: int
    exponent_a: float = 3.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if not self.exponent_a > 2:
            raise ValueError("exponent_a must be > 2")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")


@dataclass
class DiophantineReport:
    """Outcome of the finite-horizon check, with per-index rows for CSV export."""

    holds: bool
    worst_l: tuple[int, int]
    worst_margin: float
    worst_value: float
    worst_bound: float
    l_max: int
    kind: str
    rows: list[tuple[str, float, float, float]] = field(default_factory=list, repr=False)

    def note(self) -> str:
        return f"verified up to |l| <= {self.l_max}; not a proof"

    def to_csv_rows(self) -> list[tuple[str, float, float, float]]:
        """Rows (l, value, bound, margin)."""
        return list(self.rows)


def _check_skew(omega: float, p: DiophantineParams, keep_rows: int) -> DiophantineReport:
    num, den = float(omega).as_integer_ratio()
    worst = (0, 0.0, math.inf, math.inf)  # l, value, bound, margin
    all_rows = []
    acc = 0
    for l in range(1, p.l_max + 1):
        acc = (acc + num) % den
        value = min(acc, den - acc) / den
        bound = p.kappa / (l * math.log(1 + l) ** 2)
        margin = value - bound
        if margin < worst[3]:
            worst = (l, value, bound, margin)
        all_rows.append((margin, (str(l), value, bound, margin)))
    all_rows.sort(key=lambda t: t[0])
    rows = [r for _, r in all_rows[:keep_rows]]
    l, value, bound, margin = worst
    return DiophantineReport(
        holds=margin > 0,
        worst_l=(l, 0),
        worst_margin=margin,
        worst_value=value,
        worst_bound=bound,
        l_max=p.l_max,
        kind="skew",
        rows=rows,
    )


def _check_multi(om1: float, om2: float, p: DiophantineParams, keep_rows: int) -> DiophantineReport:
    r = p.l_max
    l1 = np.arange(-r, r + 1)
    L1, L2 = np.meshgrid(l1, l1, indexing="ij")
    L1 = L1.ravel()
    L2 = L2.ravel()
    absl = np.abs(L1) + np.abs(L2)
    mask = (absl >= 1) & (absl <= r)
    L1, L2, absl = L1[mask], L2[mask], absl[mask]
    t = (L1 * om1 + L2 * om2) % 1.0
    value = np.minimum(t, 1.0 - t)
    bound = p.kappa / absl.astype(float) ** p.exponent_a
    margin = value - bound
    k = int(np.argmin(margin))
    order = np.argsort(margin)[:keep_rows]
    rows = [
        (f"{int(L1[i])},{int(L2[i])}", float(value[i]), float(bound[i]), float(margin[i]))
        for i in order
    ]
    return DiophantineReport(
        holds=bool(margin[k] > 0),
        worst_l=(int(L1[k]), int(L2[k])),
        worst_margin=float(margin[k]),
        worst_value=float(value[k]),
        worst_bound=float(bound[k]),
        l_max=p.l_max,
        kind="multi",
        rows=rows,
    )


def check_diophantine(
    transform: Transform, params: DiophantineParams, keep_rows: int = 100
) -> DiophantineReport:
    """Verify the Diophantine lower bound for all 1 <= |l| <= l_max.

    Skew-shift: dist(l*omega, Z) > kappa / (|l| * log^2(1+|l|)), with the
    distance computed exactly in integer arithmetic. Multi-frequency shift:
    dist(l . omega, Z) > kappa / |l|^A over the lattice box, in float (the
    1e-14 rounding is far below any margin of interest).

    Rational frequencies come out with holds=False and worst_margin <= 0.
    """
    if isinstance(transform, SkewShift):
        return _check_skew(transform.omega, params, keep_rows)
    return _check_multi(transform.omega1, transform.omega2, params, keep_rows)


def standard_frequencies() -> dict[str, Transform]:
    """Quadratic-irrational presets, addressable by name from the CLI.

    golden      skew-shift with (sqrt(5)-1)/2, continued fraction [0;1,1,1,...]
    sqrt2       skew-shift with sqrt(2)-1,     continued fraction [0;2,2,2,...]
    pair        multi-shift (sqrt(2)-1, sqrt(3)-1), expansions [0;2,2,...], [0;1,2,1,2,...]
    golden-pair multi-shift ((sqrt(5)-1)/2, sqrt(2)-1)
    """
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    s2 = math.sqrt(2.0) - 1.0
    s3 = math.sqrt(3.0) - 1.0
    return {
        "golden": SkewShift(golden),
        "sqrt2": SkewShift(s2),
        "pair": MultiShift(s2, s3),
        "golden-pair": MultiShift(golden, s2),
    }
