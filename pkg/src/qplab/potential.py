"""Real-valued functions on the 2-torus as Hermitian Fourier series.

A ``FourierSeries2`` stores a finite map l = (l1, l2) -> complex coefficient
with the real-valuedness constraint c(-l) = conj(c(l)) enforced at
construction. Everything downstream works through this one type: the
potentials themselves, their truncations v_N, and all partial derivatives
(term-wise multiplication by (2*pi*i*l1)^a1 (2*pi*i*l2)^a2).

Smoothness classes are parameterized the usual way for sub-analytic decay,
|c(l)| <= M exp(-rho |l|^(1/s)) with s > 1, where |l| = |l1| + |l2|. The
truncation plan at scale N keeps degree ceil(N^(2s)), capped at a configured
coefficient budget (the uncapped degree explodes immediately; the cap is
reported truthfully). The tail majorant sums M exp(-rho k^(1/s)) times the
lattice count 4k exactly until terms underflow.

Transversality ("not flat at any point") is certified numerically: the
smallest multi-index m for which max over 0 < alpha <= m of |d^alpha v| is
bounded away from zero on a uniform grid, with a Lipschitz slack estimate
from coefficient majorants. This is a grid certificate, not a proof.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .dynamics import Torus2Point

__all__ = [
    "FourierSeries2",
    "GevreyParams",
    "TruncationPlan",
    "GevreyTailBound",
    "TransversalityCertificate",
    "gevrey_tail_bound",
    "transversality_certificate",
    "gevrey_series",
    "preset_potential",
    "PRESET_NAMES",
]

MAX_DERIVATIVE_ORDER = 6
DEFAULT_COEFF_BUDGET = 10_000

_TWO_PI = 2.0 * math.pi


class FourierSeries2:
    """Finite Fourier series on T^2 with Hermitian symmetry (real values)."""

    __slots__ = ("coeffs", "name", "_l1", "_l2", "_re", "_im")

    def __init__(
        self,
        coeffs: Mapping[tuple[int, int], complex],
        *,
        symmetrize: bool = False,
        tol: float = 1e-12,
        name: str | None = None,
    ):
        table: dict[tuple[int, int], complex] = {}
        for (l1, l2), c in coeffs.items():
            table[(int(l1), int(l2))] = table.get((int(l1), int(l2)), 0.0) + complex(c)
        if symmetrize:
            keys = set(table) | {(-l1, -l2) for l1, l2 in table}
            sym: dict[tuple[int, int], complex] = {}
            for l in keys:
                neg = (-l[0], -l[1])
                sym[l] = 0.5 * (
                    complex(table.get(l, 0.0)) + complex(table.get(neg, 0.0)).conjugate()
                )
            table = sym
        scale = max((abs(c) for c in table.values()), default=0.0)
        for l, c in table.items():
            neg = (-l[0], -l[1])
            gap = abs(c - table.get(neg, 0.0).conjugate())
            if gap > tol * max(1.0, scale):
                raise ValueError(
                    f"coefficient map is not Hermitian-symmetric at l={l} (gap {gap:.3e})"
                )
        if (0, 0) in table:
            table[(0, 0)] = complex(table[(0, 0)].real, 0.0)
        self.coeffs = {l: c for l, c in table.items() if c != 0}
        self.name = name
        n = len(self.coeffs)
        self._l1 = np.empty(n, dtype=np.int64)
        self._l2 = np.empty(n, dtype=np.int64)
        self._re = np.empty(n, dtype=np.float64)
        self._im = np.empty(n, dtype=np.float64)
        for i, ((l1, l2), c) in enumerate(sorted(self.coeffs.items())):
            self._l1[i] = l1
            self._l2[i] = l2
            self._re[i] = c.real
            self._im[i] = c.imag

    # -- basic queries ------------------------------------------------------

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def degree(self) -> int:
        """Largest |l1| + |l2| with a nonzero coefficient (0 for the zero series)."""
        if not self.coeffs:
            return 0
        return max(abs(l1) + abs(l2) for l1, l2 in self.coeffs)

    def mean(self) -> float:
        return self.coeffs.get((0, 0), 0.0).real

    def tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(l1, l2, re, im) arrays over all stored coefficients, fixed order."""
        return self._l1, self._l2, self._re, self._im

    # -- evaluation ---------------------------------------------------------

    def eval(self, x) -> float:
        """Value at a point; exactly real because the sum is symmetrized."""
        x1, x2 = (x.x1, x.x2) if isinstance(x, Torus2Point) else (x[0], x[1])
        ph = _TWO_PI * (self._l1 * x1 + self._l2 * x2)
        return float(self._re @ np.cos(ph) - self._im @ np.sin(ph))

    def eval_complex(self, x) -> complex:
        """Full complex sum, for checking the imaginary residue."""
        x1, x2 = (x.x1, x.x2) if isinstance(x, Torus2Point) else (x[0], x[1])
        ph = _TWO_PI * (self._l1 * x1 + self._l2 * x2)
        cos, sin = np.cos(ph), np.sin(ph)
        return complex(self._re @ cos - self._im @ sin, self._re @ sin + self._im @ cos)

    def eval_many(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at arbitrary points."""
        from . import kernels

        return kernels.eval_series(self, np.asarray(x1, float), np.asarray(x2, float))

    def eval_grid(self, n: int, offset: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
        """Values on the shifted uniform grid {(i/n + o1, j/n + o2)}.

        Coefficients are folded mod n into an n x n spectral array and
        transformed at once; the folding is an exact identity on the grid,
        so this agrees with direct summation to rounding error.
        """
        if n < 1:
            raise ValueError("grid size must be >= 1")
        spec = np.zeros((n, n), dtype=np.complex128)
        phase = np.exp(2j * math.pi * (self._l1 * offset[0] + self._l2 * offset[1]))
        np.add.at(
            spec,
            (np.mod(self._l1, n), np.mod(self._l2, n)),
            (self._re + 1j * self._im) * phase,
        )
        return np.real(np.fft.ifft2(spec)) * n * n

    # -- calculus and truncation --------------------------------------------

    def partial_derivative(
        self, alpha: tuple[int, int], max_order: int = MAX_DERIVATIVE_ORDER
    ) -> "FourierSeries2":
        a1, a2 = int(alpha[0]), int(alpha[1])
        if a1 < 0 or a2 < 0:
            raise ValueError("derivative orders must be >= 0")
        if a1 + a2 > max_order:
            raise ValueError(f"derivative order {a1 + a2} exceeds the cap {max_order}")
        if a1 == 0 and a2 == 0:
            return self
        out = {}
        for (l1, l2), c in self.coeffs.items():
            f = (2j * math.pi * l1) ** a1 * (2j * math.pi * l2) ** a2
            out[(l1, l2)] = c * f
        return FourierSeries2(out, name=None)

    def truncate(self, n_tilde: int) -> "FourierSeries2":
        """Keep exactly the coefficients with |l1| + |l2| <= n_tilde."""
        if n_tilde < 0:
            raise ValueError("truncation degree must be >= 0")
        kept = {l: c for l, c in self.coeffs.items() if abs(l[0]) + abs(l[1]) <= n_tilde}
        return FourierSeries2(kept, name=self.name)

    # -- majorants ----------------------------------------------------------

    def sup_norm_bound(self) -> float:
        """l1 norm of the coefficients; a rigorous upper bound for sup |v|."""
        return float(np.hypot(self._re, self._im).sum())

    def deriv_sup_bound(self, alpha: tuple[int, int]) -> float:
        """Coefficient majorant for sup |d^alpha v|."""
        a1, a2 = alpha
        w = (_TWO_PI * np.abs(self._l1)) ** a1 * (_TWO_PI * np.abs(self._l2)) ** a2
        return float((np.hypot(self._re, self._im) * w).sum())

    def grid_sup(self, n: int = 512) -> float:
        """max |v| over an n x n grid (includes the origin); not a majorant."""
        return float(np.abs(self.eval_grid(n)).max())

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<FourierSeries2{label} terms={len(self)} degree={self.degree}>"


# -- smoothness parameters and truncation plans -----------------------------


@dataclass(frozen=True)
class GevreyParams:
    """Decay parameters: |c(l)| <= M exp(-rho |l|^(1/s)); s=1 is the analytic edge."""

    s: float
    rho: float
    M: float = 1.0

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.s == 1:
            warnings.warn("s = 1 is the analytic boundary case", stacklevel=3)
        if not (self.rho > 0 and self.M > 0):
            raise ValueError("rho and M must be > 0")


@dataclass(frozen=True)
class TruncationPlan:
    """Degree and strip-width bookkeeping for the scale-N truncation.

    n_tilde is ceil(N^(2s)) capped so the kept coefficient count stays within
    max_coeffs (capped=True records that the nominal degree was unreachable).
    rho2 = rho1 / (2N) is carried for reporting only; nothing numeric uses it.
    """

    N: int
    s: float
    rho: float
    n_tilde: int
    capped: bool
    delta: float
    rho1: float
    rho2: float

    @classmethod
    def for_scale(
        cls, N: int, params: GevreyParams, max_coeffs: int = DEFAULT_COEFF_BUDGET
    ) -> "TruncationPlan":
        if N < 1:
            raise ValueError("scale must be >= 1")
        nominal = math.ceil(N ** (2.0 * params.s))
        cap = _degree_for_budget(max_coeffs)
        n_tilde = max(1, min(nominal, cap))
        delta = 2.0 * (params.s - 1.0)
        rho1 = 0.5 * params.rho * N ** (-delta)
        return cls(
            N=N,
            s=params.s,
            rho=params.rho,
            n_tilde=n_tilde,
            capped=nominal > cap,
            delta=delta,
            rho1=rho1,
            rho2=rho1 / (2.0 * N),
        )


def _degree_for_budget(max_coeffs: int) -> int:
    # #{l : |l1|+|l2| <= d} = 2d(d+1) + 1
    d = int((math.sqrt(max(2.0 * max_coeffs - 1.0, 1.0)) - 1.0) / 2.0)
    return max(d, 1)


@dataclass(frozen=True)
class GevreyTailBound:
    """Majorant for sup |v - v_N| from the coefficient tail; 0 with a flag on underflow."""

    value: float
    underflow: bool

    def __float__(self) -> float:
        return self.value


def gevrey_tail_bound(params: GevreyParams, n_tilde: int, tiny: float = 1e-300) -> GevreyTailBound:
    """Sum the tail majorant sum_{k > n_tilde} 4k M exp(-rho k^(1/s)) exactly.

    The count of lattice sites with |l1|+|l2| = k is 4k. Terms are added in
    blocks until they fall below ``tiny``; a fully underflowed tail reports
    value 0 with the underflow flag set.
    """
    if n_tilde < 1:
        raise ValueError("n_tilde must be >= 1")
    total = 0.0
    k = n_tilde + 1
    block = 65536
    first = 4.0 * k * params.M * math.exp(-params.rho * k ** (1.0 / params.s))
    if first < tiny:
        return GevreyTailBound(0.0, underflow=True)
    while True:
        ks = np.arange(k, k + block, dtype=np.float64)
        terms = 4.0 * ks * params.M * np.exp(-params.rho * ks ** (1.0 / params.s))
        last_ok = terms >= tiny
        total += float(terms[last_ok].sum())
        if not last_ok.all():
            break
        k += block
    return GevreyTailBound(total, underflow=False)


# -- transversality certificate ----------------------------------------------


@dataclass(frozen=True)
class TransversalityCertificate:
    """Grid certificate that some derivative of order <= m is large everywhere.

    c is the grid minimum of max_{0 < alpha <= m} |d^alpha v|; ok means c
    cleared the machine-noise threshold. grid_n and lipschitz_slack state the
    resolution at which this was checked (certificate, not proof).
    """

    ok: bool
    m: tuple[int, int]
    c: float
    argmin_point: tuple[float, float]
    grid_n: int
    lipschitz_slack: float

    @property
    def certified_lower_bound(self) -> float:
        return max(self.c - self.lipschitz_slack, 0.0)


def transversality_certificate(
    v: FourierSeries2, m_max: tuple[int, int], grid_n: int = 128
) -> TransversalityCertificate:
    """Search for the lexicographically smallest m <= m_max that certifies.

    For each candidate m (ordered by (m1, m2)), the grid minimum of
    max_{0 < alpha <= m} |d^alpha v| is computed on a grid_n x grid_n grid;
    the first candidate whose minimum clears a relative noise threshold wins.
    A failed search returns ok=False with m = m_max and c = 0.
    """
    if grid_n < 8:
        raise ValueError("grid_n must be >= 8")
    if m_max[0] < 1 or m_max[1] < 1:
        raise ValueError("m_max must be >= (1, 1) componentwise")

    grids: dict[tuple[int, int], np.ndarray] = {}
    sups: dict[tuple[int, int], float] = {}

    def grid_of(alpha):
        if alpha not in grids:
            d = v.partial_derivative(alpha, max_order=m_max[0] + m_max[1] + 2)
            grids[alpha] = np.abs(d.eval_grid(grid_n))
            sups[alpha] = d.deriv_sup_bound((0, 0))
        return grids[alpha]

    candidates = sorted(
        (m1, m2)
        for m1 in range(m_max[0] + 1)
        for m2 in range(m_max[1] + 1)
        if m1 + m2 >= 1
    )
    h = 1.0 / grid_n
    for m in candidates:
        alphas = [
            (a1, a2)
            for a1 in range(m[0] + 1)
            for a2 in range(m[1] + 1)
            if a1 + a2 >= 1
        ]
        best = None
        for a in alphas:
            g = grid_of(a)
            best = g if best is None else np.maximum(best, g)
        flat = int(np.argmin(best))
        i, j = divmod(flat, grid_n)
        c = float(best[i, j])
        scale = max(sups[a] for a in alphas)
        if c > 1e-10 * max(1.0, scale):
            slack = 0.5 * h * max(
                v.deriv_sup_bound((a[0] + 1, a[1])) + v.deriv_sup_bound((a[0], a[1] + 1))
                for a in alphas
            )
            return TransversalityCertificate(
                ok=True,
                m=m,
                c=c,
                argmin_point=(i * h, j * h),
                grid_n=grid_n,
                lipschitz_slack=slack,
            )
    return TransversalityCertificate(
        ok=False,
        m=tuple(m_max),
        c=0.0,
        argmin_point=(0.0, 0.0),
        grid_n=grid_n,
        lipschitz_slack=0.0,
    )


# -- constructors, presets, file I/O ----------------------------------------


def constant_series(value: float = 1.0) -> FourierSeries2:
    return FourierSeries2({(0, 0): value}, name=f"constant:{value:g}")


def cosine_x1() -> FourierSeries2:
    return FourierSeries2({(1, 0): 0.5, (-1, 0): 0.5}, name="cosine")


def cosine_sum() -> FourierSeries2:
    return FourierSeries2(
        {(1, 0): 0.5, (-1, 0): 0.5, (0, 1): 0.5, (0, -1): 0.5}, name="cos-sum"
    )


def gevrey_series(
    s: float,
    rho: float,
    degree: int = 12,
    M: float = 1.0,
    seed: int | None = None,
) -> FourierSeries2:
    """Test series with |c(l)| = M exp(-rho |l|^(1/s)) up to the given degree.

    With a seed, phases are randomized under Hermitian symmetry; without,
    all coefficients are positive reals. There is no canonical non-analytic
    example in closed form, so this synthetic family is the test corpus.
    """
    rng = np.random.default_rng(seed) if seed is not None else None
    coeffs: dict[tuple[int, int], complex] = {(0, 0): M}
    for l1 in range(-degree, degree + 1):
        for l2 in range(-degree, degree + 1):
            k = abs(l1) + abs(l2)
            if k == 0 or k > degree:
                continue
            if (l1, l2) in coeffs:
                continue
            mag = M * math.exp(-rho * k ** (1.0 / s))
            if rng is None:
                c = complex(mag, 0.0)
            else:
                theta = rng.uniform(0.0, 2.0 * math.pi)
                c = mag * complex(math.cos(theta), math.sin(theta))
            coeffs[(l1, l2)] = c
            coeffs[(-l1, -l2)] = c.conjugate()
    tag = f"gevrey:s={s:g},rho={rho:g}"
    if seed is not None:
        tag += f",seed={seed}"
    return FourierSeries2(coeffs, name=tag)


PRESET_NAMES = ("one", "cosine", "cos-sum", "gevrey")


def preset_potential(spec: str) -> FourierSeries2:
    """Resolve a CLI potential spec: 'cosine', 'cos-sum', 'one',
    'gevrey:s=2,rho=1[,degree=12][,seed=0]' or 'constant:<value>'."""
    spec = spec.strip()
    if spec in ("one", "1"):
        return constant_series(1.0)
    if spec == "cosine":
        return cosine_x1()
    if spec == "cos-sum":
        return cosine_sum()
    if spec.startswith("constant:"):
        return constant_series(float(spec.split(":", 1)[1]))
    if spec.startswith("gevrey"):
        kv = {}
        if ":" in spec:
            for part in spec.split(":", 1)[1].split(","):
                key, _, val = part.partition("=")
                kv[key.strip()] = val.strip()
        s = float(kv.get("s", 2.0))
        rho = float(kv.get("rho", 1.0))
        degree = int(kv.get("degree", 12))
        seed = int(kv["seed"]) if "seed" in kv else None
        return gevrey_series(s, rho, degree=degree, seed=seed)
    raise ValueError(f"unknown potential spec {spec!r}")


def series_from_text(path) -> FourierSeries2:
    """Read 'l1 l2 re im' lines; '#' starts a comment; symmetrizes the map."""
    coeffs: dict[tuple[int, int], complex] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = re.split(r"[,\s]+", line)
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'l1 l2 re im', got {raw!r}")
            l1, l2 = int(parts[0]), int(parts[1])
            coeffs[(l1, l2)] = coeffs.get((l1, l2), 0.0) + complex(float(parts[2]), float(parts[3]))
    return FourierSeries2(coeffs, symmetrize=True, name=str(path))


def series_to_text(v: FourierSeries2, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# l1 l2 re im\n")
        for (l1, l2), c in sorted(v.coeffs.items()):
            fh.write(f"{l1} {l2} {c.real!r} {c.imag!r}\n")
