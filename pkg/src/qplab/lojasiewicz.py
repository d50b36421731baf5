"""Constructive sublevel-set covers for transversal potentials.

Given a smooth v on the torus whose derivatives up to a multi-index m are
jointly bounded away from zero (a transversality certificate), the set
{ |v - E| < eps } can be covered by explicit rectangles of small total area.
The construction descends one derivative order at a time: on a square where
|d_axis f| >= eps0 is certified, the sublevel set { |f| < eps1 } lies in a
top strip, a bottom strip, and thin strips around implicitly-solved branches
x2 = phi(x1), one per column (Lemma-style quantitative implicit function
step). Good sub-regions then carry the certified bound |f| >= eps1 and feed
the next stage with the derivative order reduced by one, down to f = v - E.

Stage thresholds follow the ladder eps_j = eps^(1/3^(M-j)), whose
admissibility conditions eps_{j+1} < eps_j * side / 4 are non-effective in
general and are checked per square; an infeasible square is covered whole
(sound over-approximation) and reported, or raises when on_infeasible is
"error". Derivative lower bounds on squares are certified by a grid minimum
minus a Lipschitz slack from coefficient majorants; the refine step then
uses the measured bound (never weaker than the ladder value), which both
unlocks desk-scale epsilons and tightens the strips.

Everything here is slack-based grid certification, not interval arithmetic;
the soundness claim ("no sublevel point escapes the bad rectangles") is
itself validated on a dense grid by validate_cover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from . import kernels
from .potential import FourierSeries2

__all__ = [
    "Rect",
    "ImplicitBranch",
    "StripCover",
    "RefineResult",
    "SublevelCover",
    "McEstimate",
    "CertificationError",
    "CoverPreconditionError",
    "LadderInfeasibleError",
    "implicit_branch_solve",
    "strip_cover",
    "refine_step",
    "loja_pipeline",
    "mc_sublevel_measure",
    "validate_cover",
    "shift_energy",
    "transpose_series",
]


class CertificationError(RuntimeError):
    """A hypothesis the lemma needs could not be verified numerically."""


class CoverPreconditionError(ValueError):
    """An explicit precondition inequality fails; the message names it."""


class LadderInfeasibleError(RuntimeError):
    def __init__(self, stage: int, square: "Rect", detail: str):
        super().__init__(f"stage {stage} infeasible on {square}: {detail}")
        self.stage = stage
        self.square = square
        self.detail = detail


@dataclass(frozen=True)
class Rect:
    x1_lo: float
    x1_hi: float
    x2_lo: float
    x2_hi: float

    def __post_init__(self):
        if not (self.x1_hi >= self.x1_lo and self.x2_hi >= self.x2_lo):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x1_hi - self.x1_lo) * (self.x2_hi - self.x2_lo)

    @property
    def side1(self) -> float:
        return self.x1_hi - self.x1_lo

    @property
    def side2(self) -> float:
        return self.x2_hi - self.x2_lo

    def contains(self, x1: float, x2: float) -> bool:
        return self.x1_lo <= x1 <= self.x1_hi and self.x2_lo <= x2 <= self.x2_hi

    def transpose(self) -> "Rect":
        return Rect(self.x2_lo, self.x2_hi, self.x1_lo, self.x1_hi)

    def grid(self, n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
        u = np.linspace(self.x1_lo, self.x1_hi, n1)
        w = np.linspace(self.x2_lo, self.x2_hi, n2)
        a, b = np.meshgrid(u, w, indexing="ij")
        return a.ravel(), b.ravel()


def shift_energy(v: FourierSeries2, energy: float) -> FourierSeries2:
    """The series v - E (the energy folds into the constant coefficient)."""
    coeffs = dict(v.coeffs)
    coeffs[(0, 0)] = coeffs.get((0, 0), 0.0) - energy
    return FourierSeries2(coeffs, name=v.name)


def transpose_series(v: FourierSeries2) -> FourierSeries2:
    """The series (x1, x2) -> v(x2, x1)."""
    return FourierSeries2({(l2, l1): c for (l1, l2), c in v.coeffs.items()}, name=v.name)


def _grid_min_abs(f: FourierSeries2, rect: Rect, n: int = 9) -> float:
    x1, x2 = rect.grid(n, n)
    return float(np.abs(kernels.eval_series(f, x1, x2)).min())


def _lip_bound(f: FourierSeries2) -> float:
    """Majorant for |grad f|_1, for slack over a cell of half-diagonal h."""
    return f.deriv_sup_bound((1, 0)) + f.deriv_sup_bound((0, 1))


def certified_min_abs(f: FourierSeries2, rect: Rect, n: int = 9) -> float:
    """Grid minimum of |f| minus Lipschitz slack; a true lower bound for
    min |f| on the rectangle (up to evaluation rounding)."""
    h = 0.5 * max(rect.side1 / max(n - 1, 1), rect.side2 / max(n - 1, 1))
    return _grid_min_abs(f, rect, n) - _lip_bound(f) * h


# -- quantitative implicit function step --------------------------------------


@dataclass(frozen=True)
class ImplicitBranch:
    """Sampled solution branch x2 = phi(x1) of f = 0 over a subinterval.

    slope_bound is A / eps0 from the hypotheses; max_slope is the largest
    sampled difference quotient (must not exceed the bound by more than
    rounding); residual is the largest |f(x1, phi(x1))| over the samples.
    """

    domain: tuple[float, float]
    x1: np.ndarray
    phi: np.ndarray
    slope_bound: float
    max_slope: float
    residual: float
    root_tol: float


def implicit_branch_solve(
    f: FourierSeries2,
    rect: Rect,
    eps0: float,
    a_max: float,
    root: tuple[float, float],
    root_tol: float = 1e-9,
    *,
    c_impl: float = 0.5,
    n_samples: int = 33,
) -> ImplicitBranch:
    """Solve the branch through ``root`` on I0 = (a1 - kappa, a1 + kappa).

    kappa = c_impl * eps0 / a_max * min(a2 - c, d - a2). Each phi(x1) comes
    from bisection on the monotone x2-slice; a slice without a sign change
    violates the hypotheses and raises CertificationError.
    """
    if eps0 <= 0 or a_max <= 0:
        raise CoverPreconditionError("need eps0 > 0 and a_max > 0")
    a1, a2 = root
    if not rect.contains(a1, a2):
        raise CoverPreconditionError("root must lie in the rectangle")
    fr = abs(f.eval((a1, a2)))
    if fr > max(root_tol, 1e-9) * max(1.0, f.sup_norm_bound()):
        raise CoverPreconditionError(f"|f(root)| = {fr:.3e} is not ~0 within root_tol")
    kappa = c_impl * (eps0 / a_max) * min(a2 - rect.x2_lo, rect.x2_hi - a2)
    lo = max(rect.x1_lo, a1 - kappa)
    hi = min(rect.x1_hi, a1 + kappa)
    xs = np.linspace(lo, hi, n_samples)
    tol_x = min(root_tol, root_tol / max(f.deriv_sup_bound((0, 1)), 1.0))
    phi = kernels.bisect_columns(f, xs, rect.x2_lo, rect.x2_hi, swap=False, tol=tol_x)
    if np.isnan(phi).any():
        bad = xs[np.isnan(phi)][0]
        raise CertificationError(
            f"slice x1={bad!r} has no sign change on [{rect.x2_lo}, {rect.x2_hi}]; "
            "the monotonicity hypothesis fails here"
        )
    resid = float(np.abs(kernels.eval_series(f, xs, phi)).max())
    slope_bound = a_max / eps0
    if xs.size >= 2:
        max_slope = float(np.abs(np.diff(phi) / np.diff(xs)).max())
    else:
        max_slope = 0.0
    if max_slope > slope_bound * (1.0 + 1e-6) + 2.0 * tol_x / (xs[1] - xs[0]):
        raise CertificationError(
            f"sampled slope {max_slope:.3e} exceeds A/eps0 = {slope_bound:.3e}"
        )
    return ImplicitBranch((lo, hi), xs, phi, slope_bound, max_slope, resid, root_tol)


# -- strip cover over one rectangle --------------------------------------------


@dataclass(frozen=True)
class StripSpan:
    """A maximal run of columns: interval on the x1 axis plus either a strip
    bounding rectangle or None for a clean run."""

    interval: tuple[float, float]
    rect: Rect | None


@dataclass
class StripCover:
    top: Rect
    bottom: Rect
    middles: list[StripSpan]
    column_width: float
    margin: float
    escapes: int
    validated_n: int

    def bad_rects(self) -> list[Rect]:
        out = [self.top, self.bottom]
        out.extend(s.rect for s in self.middles if s.rect is not None)
        return out

    def clean_intervals(self) -> list[tuple[float, float]]:
        return [s.interval for s in self.middles if s.rect is None]


def strip_cover(
    f: FourierSeries2,
    rect: Rect,
    eps1: float,
    eps0: float,
    a_max: float,
    *,
    root_tol: float = 1e-9,
    merge_factor: float = 0.5,
    max_columns: int = 200_000,
    validate_n: int = 0,
) -> StripCover:
    """Cover { x in rect : |f| < eps1 } given |d_{x2} f| >= eps0 on rect.

    Per column (width eps1 / (2 a_max)) the monotone slice either has no
    sign change, in which case its interior sublevel points can only sit in
    the top/bottom strips, or carries one root; the strip rectangle is the
    root plus margin eps1/eps0 + slope * halfwidth + tol. Adjacent columns
    merge while their root spread stays below merge_factor * 2 eps1/eps0.
    """
    i_len = rect.side1
    if not eps1 < eps0 * i_len / 4.0:
        raise CoverPreconditionError(
            f"need eps1 < eps0 * |I| / 4: {eps1!r} >= {eps0 * i_len / 4.0!r}"
        )
    if eps0 <= 0 or a_max <= 0:
        raise CoverPreconditionError("need eps0 > 0 and a_max > 0")
    c, d = rect.x2_lo, rect.x2_hi
    band = 2.0 * eps1 / eps0
    top = Rect(rect.x1_lo, rect.x1_hi, max(c, d - band), d)
    bottom = Rect(rect.x1_lo, rect.x1_hi, c, min(d, c + band))

    if 2.0 * band >= (d - c):
        # strips already cover the rectangle
        return StripCover(top, Rect(rect.x1_lo, rect.x1_hi, c, d), [], i_len, band, 0, 0)

    width = eps1 / (2.0 * a_max)
    ncol = int(math.ceil(i_len / width))
    if ncol > max_columns:
        raise CoverPreconditionError(
            f"column count {ncol} exceeds the budget {max_columns}"
        )
    edges = rect.x1_lo + i_len * np.arange(ncol + 1) / ncol
    mids = 0.5 * (edges[:-1] + edges[1:])
    col_w = i_len / ncol
    tol_x = min(root_tol, (eps1 / eps0) * 1e-3)
    roots = kernels.bisect_columns(f, mids, c, d, swap=False, tol=tol_x)

    slope = a_max / eps0
    margin = eps1 / eps0 + slope * 0.5 * col_w + 2.0 * tol_x
    merge_gap = merge_factor * band

    middles: list[StripSpan] = []
    k = 0
    while k < ncol:
        has_root = not math.isnan(roots[k])
        j = k + 1
        if not has_root:
            while j < ncol and math.isnan(roots[j]):
                j += 1
            middles.append(StripSpan((float(edges[k]), float(edges[j])), None))
        else:
            rmin = rmax = roots[k]
            while j < ncol and not math.isnan(roots[j]):
                nmin = min(rmin, roots[j])
                nmax = max(rmax, roots[j])
                if nmax - nmin > merge_gap:
                    break
                rmin, rmax = nmin, nmax
                j += 1
            strip = Rect(
                float(edges[k]),
                float(edges[j]),
                max(c, float(rmin) - margin),
                min(d, float(rmax) + margin),
            )
            middles.append(StripSpan((float(edges[k]), float(edges[j])), strip))
        k = j

    cover = StripCover(top, bottom, middles, col_w, margin, 0, validate_n)
    if validate_n:
        cover.escapes = _count_escapes(f, rect, eps1, cover.bad_rects(), validate_n)
    return cover


def _count_escapes(
    f: FourierSeries2, rect: Rect, eps: float, rects: Sequence[Rect], grid_n: int
) -> int:
    x1, x2 = rect.grid(grid_n, grid_n)
    vals = np.abs(kernels.eval_series(f, x1, x2))
    low = vals < eps
    if not low.any():
        return 0
    inside = np.zeros(x1.size, dtype=bool)
    for r in rects:
        inside |= (
            (x1 >= r.x1_lo) & (x1 <= r.x1_hi) & (x2 >= r.x2_lo) & (x2 <= r.x2_hi)
        )
    return int((low & ~inside).sum())


# -- one refinement stage -------------------------------------------------------


@dataclass
class RefineResult:
    bad_rects: list[Rect]
    bad_measure: float
    good_squares: list[Rect]
    good_rects: list[Rect]
    cov_ratio: float
    cov_ok: bool
    demoted: int


def _good_rects_from_cover(rect: Rect, cover: StripCover) -> list[Rect]:
    """Complement of the cover inside the rectangle, as explicit rects."""
    lo = cover.bottom.x2_hi
    hi = cover.top.x2_lo
    if hi <= lo:
        return []
    out = []
    for span in cover.middles:
        a, b = span.interval
        if span.rect is None:
            out.append(Rect(a, b, lo, hi))
        else:
            if span.rect.x2_lo > lo:
                out.append(Rect(a, b, lo, span.rect.x2_lo))
            if span.rect.x2_hi < hi:
                out.append(Rect(a, b, span.rect.x2_hi, hi))
    return [r for r in out if r.area > 0.0]


def _chop_to_squares(rect: Rect, side: float, budget: int) -> list[Rect] | None:
    n1 = max(1, int(math.ceil(rect.side1 / side)))
    n2 = max(1, int(math.ceil(rect.side2 / side)))
    if n1 * n2 > budget:
        return None
    e1 = np.linspace(rect.x1_lo, rect.x1_hi, n1 + 1)
    e2 = np.linspace(rect.x2_lo, rect.x2_hi, n2 + 1)
    return [
        Rect(e1[i], e1[i + 1], e2[j], e2[j + 1]) for i in range(n1) for j in range(n2)
    ]


def refine_step(
    f: FourierSeries2,
    square: Rect,
    eps1: float,
    eps0: float,
    a_max: float,
    axis: Literal["x1", "x2"] = "x2",
    *,
    c_cov: float = 8.0,
    validation_grid: int = 5,
    chop: bool = True,
    square_budget: int = 250_000,
    root_tol: float = 1e-9,
) -> RefineResult:
    """One refinement of a square: bad strips out, certified squares back.

    axis names the coordinate whose partial derivative is certified >= eps0
    (axis="x1" is handled by transposition). bad_measure must stay below
    c_cov * side * eps1 / eps0; the measured ratio is recorded so the
    default constant can be tightened empirically. Good squares of side
    ~ eps1 / a_max are validated by a small grid and demoted to bad if
    min |f| < eps1 there.
    """
    swap = axis == "x1"
    g = transpose_series(f) if swap else f
    rect = square.transpose() if swap else square
    cover = strip_cover(g, rect, eps1, eps0, a_max, root_tol=root_tol)
    bad = cover.bad_rects()
    good_area = _good_rects_from_cover(rect, cover)
    if swap:
        bad = [r.transpose() for r in bad]
        good_area = [r.transpose() for r in good_area]

    kappa1 = eps1 / a_max
    goods: list[Rect] = []
    demoted = 0
    if chop:
        for region in good_area:
            squares = _chop_to_squares(region, kappa1, square_budget)
            if squares is None:
                bad.append(region)
                demoted += 1
                continue
            for s in squares:
                if _grid_min_abs(f, s, validation_grid) >= eps1:
                    goods.append(s)
                else:
                    bad.append(s)
                    demoted += 1
    else:
        for region in good_area:
            n1 = max(2, min(32, int(region.side1 / max(kappa1, 1e-12)) + 2))
            n2 = max(2, min(32, int(region.side2 / max(kappa1, 1e-12)) + 2))
            x1, x2 = region.grid(n1, n2)
            if float(np.abs(kernels.eval_series(f, x1, x2)).min()) >= eps1:
                goods.append(region)
            else:
                bad.append(region)
                demoted += 1

    area = sum(min(r.area, square.area) for r in bad)
    bad_measure = min(area, square.area)
    limit = c_cov * max(square.side1, square.side2) * eps1 / eps0
    ratio = bad_measure / limit if limit > 0 else math.inf
    return RefineResult(
        bad_rects=bad,
        bad_measure=bad_measure,
        good_squares=goods if chop else [],
        good_rects=goods,
        cov_ratio=ratio,
        cov_ok=bad_measure <= limit,
        demoted=demoted,
    )


# -- the full pipeline ----------------------------------------------------------


@dataclass
class CoverEvent:
    kind: str
    stage: int
    square: Rect
    detail: str


@dataclass
class SublevelCover:
    """Certified cover of { |v - E| < eps }: bad rectangles plus good regions
    carrying lower bounds, with the total bad measure and the claimed
    exponent. events records every square that fell back to a whole-square
    cover (infeasible ladder stage, failed certification, budget)."""

    energy: float
    eps: float
    m: tuple[int, int]
    exponent_b: float
    ladder: list[float]
    bad_rects: list[Rect]
    good_squares: list[tuple[Rect, float]]
    measure_bound: float
    events: list[CoverEvent] = field(default_factory=list)

    def to_csv_rows(self):
        rows = [
            ("bad", r.x1_lo, r.x1_hi, r.x2_lo, r.x2_hi, 0.0) for r in self.bad_rects
        ]
        rows.extend(
            ("good", r.x1_lo, r.x1_hi, r.x2_lo, r.x2_hi, bound)
            for r, bound in self.good_squares
        )
        return rows


def _candidate_orders(m: tuple[int, int]) -> list[tuple[int, int]]:
    """Starting derivative orders, smallest total order first.

    The certificate guarantees only that SOME order <= m is transversal at
    each point; which one varies, so the square hull of m is scanned and the
    measured square-wise bounds decide (fewer stages preferred)."""
    q = max(m)
    total = m[0] + m[1]
    outs = [
        (a1, a2)
        for a1 in range(q + 1)
        for a2 in range(q + 1)
        if 1 <= a1 + a2 <= total
    ]
    return sorted(outs, key=lambda a: (a[0] + a[1], a))


def _descent_axis(beta: tuple[int, int]) -> str:
    """Reduce the larger component; ties reduce x2 first."""
    if beta[1] >= beta[0] and beta[1] > 0:
        return "x2"
    return "x1"


def loja_pipeline(
    v: FourierSeries2,
    energy: float,
    eps: float,
    m: tuple[int, int],
    c: float,
    a_max: float | None = None,
    *,
    on_infeasible: Literal["mark_bad", "error"] = "mark_bad",
    c_impl: float = 0.5,
    c_cov: float = 8.0,
    sub_grid: int = 8,
    square_budget: int = 50_000,
    root_tol: float = 1e-9,
) -> SublevelCover:
    """Full sublevel-set cover of { |v - E| < eps } from a transversality
    certificate (m, c).

    The unit square is partitioned into ~ (2 a_max / c)^2 starting squares.
    A square either certifies min |v - E| >= eps outright (good), or starts
    a derivative descent at the lowest-order derivative whose certified
    square minimum clears its ladder threshold eps_{M - |alpha|}; each stage
    refines with the measured derivative bound and hands its good squares
    one order down, ending at v - E with bound eps. Squares where no start
    qualifies or a ladder condition fails are covered whole and reported
    (or raise, per on_infeasible). The reported exponent is the worst-case
    1 / 3^(m1 + m2); measure_bound sums per-square bad area, each square
    clipped to its own area, and is an upper bound for the union.
    """
    if m[0] + m[1] < 1:
        raise ValueError("certificate order must have |m| >= 1")
    if not (c > 0 and eps > 0):
        raise ValueError("need c > 0 and eps > 0")
    big_m = m[0] + m[1]
    if a_max is None:
        a_max = max(
            v.deriv_sup_bound((a1, a2))
            for a1 in range(m[0] + 2)
            for a2 in range(m[1] + 2)
            if a1 + a2 >= 1
        )
    ladder = [eps ** (1.0 / 3 ** (big_m - j)) for j in range(big_m + 1)]
    f = shift_energy(v, energy)

    side = min(c / (2.0 * a_max), 0.25)
    n_sq = int(math.ceil(1.0 / side))
    side = 1.0 / n_sq

    # global grids: |f| and |d^alpha v| sampled on an aligned fine grid
    grid_n = n_sq * sub_grid
    gf = np.abs(f.eval_grid(grid_n))
    candidates = _candidate_orders(m)
    galpha = {}
    lip_alpha = {}
    for a in candidates:
        da = v.partial_derivative(a, max_order=big_m + 2)
        galpha[a] = np.abs(da.eval_grid(grid_n))
        lip_alpha[a] = _lip_bound(da)
    lip_f = _lip_bound(f)
    h = 1.0 / grid_n

    def block_min(g: np.ndarray, i: int, j: int) -> float:
        return float(
            g[i * sub_grid : (i + 1) * sub_grid, j * sub_grid : (j + 1) * sub_grid].min()
        )

    bad_rects: list[Rect] = []
    goods: list[tuple[Rect, float]] = []
    events: list[CoverEvent] = []
    measure = 0.0

    def fall_back(square: Rect, stage: int, detail: str) -> float:
        if on_infeasible == "error":
            raise LadderInfeasibleError(stage, square, detail)
        bad_rects.append(square)
        events.append(CoverEvent("fallback", stage, square, detail))
        return square.area

    def descend(square: Rect, beta: tuple[int, int], j: int, stage: int) -> float:
        """Refine f_{stage} on the square; returns the bad area contributed.

        Invariant on entry: |d^beta v| >= ladder[j] certified on the square.
        """
        axis = _descent_axis(beta)
        nxt = (beta[0] - 1, beta[1]) if axis == "x1" else (beta[0], beta[1] - 1)
        if nxt == (0, 0):
            target = f
        else:
            target = v.partial_derivative(nxt, max_order=big_m + 2)
        eps1 = ladder[j + 1]
        # measured eps0 on this square (at least the ladder value)
        dbeta = v.partial_derivative(beta, max_order=big_m + 2)
        cert = certified_min_abs(dbeta, square, n=9)
        eps0 = max(cert, ladder[j])
        side_len = min(square.side1, square.side2)
        if not eps1 < eps0 * side_len / 4.0:
            return fall_back(
                square, stage, f"eps_{j + 1} = {eps1:.3e} >= eps0 * side / 4 = "
                f"{eps0 * side_len / 4.0:.3e}"
            )
        a_param = max(target.deriv_sup_bound((1, 0)), target.deriv_sup_bound((0, 1)))
        last = nxt == (0, 0)
        try:
            res = refine_step(
                target,
                square,
                eps1,
                eps0,
                a_param,
                axis=axis,
                c_cov=c_cov,
                chop=not last,
                square_budget=square_budget,
                root_tol=root_tol,
            )
        except CoverPreconditionError as exc:
            return fall_back(square, stage, str(exc))
        contributed = sum(min(r.area, square.area) for r in res.bad_rects)
        bad_rects.extend(res.bad_rects)
        if last:
            for r in res.good_rects:
                goods.append((r, eps1))
        else:
            for s in res.good_squares:
                contributed += descend(s, nxt, j + 1, stage + 1)
        return min(contributed, square.area)

    for i in range(n_sq):
        for j in range(n_sq):
            square = Rect(i * side, (i + 1) * side, j * side, (j + 1) * side)
            fmin = block_min(gf, i, j) - lip_f * h
            if fmin >= eps:
                goods.append((square, fmin))
                continue
            start = None
            best_margin = 0.0
            for a in candidates:
                j0 = big_m - (a[0] + a[1])
                need = ladder[j0]
                amin = block_min(galpha[a], i, j) - lip_alpha[a] * h
                if amin >= need:
                    if start is not None and start[2] < a[0] + a[1]:
                        break  # lower-order start already found
                    if amin / need > best_margin:
                        start = (a, j0, a[0] + a[1])
                        best_margin = amin / need
            if start is None:
                measure += fall_back(square, 0, "no starting derivative clears its ladder threshold")
                continue
            measure += descend(square, start[0], start[1], 1)

    measure = min(measure, 1.0)
    return SublevelCover(
        energy=energy,
        eps=eps,
        m=tuple(m),
        exponent_b=1.0 / 3**big_m,
        ladder=ladder,
        bad_rects=bad_rects,
        good_squares=goods,
        measure_bound=measure,
        events=events,
    )


def validate_cover(
    cover: SublevelCover, v: FourierSeries2, grid_n: int = 1024
) -> tuple[int, int]:
    """(escapes, sublevel_points) on a grid: an escape is a grid point with
    |v - E| < eps outside every bad rectangle. Soundness means 0 escapes."""
    f = shift_energy(v, cover.energy)
    vals = np.abs(f.eval_grid(grid_n))
    low = vals < cover.eps
    n_low = int(low.sum())
    if n_low == 0:
        return 0, 0
    covered = np.zeros((grid_n, grid_n), dtype=bool)
    for r in cover.bad_rects:
        i0 = int(math.ceil(r.x1_lo * grid_n - 1e-12))
        i1 = int(math.floor(r.x1_hi * grid_n + 1e-12))
        j0 = int(math.ceil(r.x2_lo * grid_n - 1e-12))
        j1 = int(math.floor(r.x2_hi * grid_n + 1e-12))
        if i1 < i0 or j1 < j0:
            continue
        covered[max(i0, 0) : i1 + 1, max(j0, 0) : j1 + 1] = True
    escapes = int((low & ~covered).sum())
    return escapes, n_low


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    ci95: float
    hits: int
    samples: int


def mc_sublevel_measure(
    v: FourierSeries2, energy: float, eps: float, n_samples: int, seed: int
) -> McEstimate:
    """Monte-Carlo estimate of mes{ |v - E| < eps } with a binomial 95% CI."""
    if n_samples < 10**4:
        raise ValueError("n_samples must be >= 10^4")
    rng = np.random.default_rng(seed)
    x1 = rng.random(n_samples)
    x2 = rng.random(n_samples)
    vals = kernels.eval_series(v, x1, x2)
    hits = int((np.abs(vals - energy) < eps).sum())
    p = hits / n_samples
    ci = 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n_samples)
    ci = max(ci, 1.0 / n_samples)
    return McEstimate(p, ci, hits, n_samples)
