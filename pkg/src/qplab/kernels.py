"""Hot numeric kernels: orbit generation, scaled transfer products, series
evaluation, the tridiagonal eigensolver, and the strip-cover column solver.

Each kernel exists in a numba scalar-loop version and a vectorized numpy
version; ``backend.HAVE_NUMBA`` (driven by QPLAB_DISABLE_NUMBA) picks one at
call time. Per-phase work is independent and written to fixed array slots,
so results are identical for any thread count.

Transforms are passed as (kind, w1, w2): kind 0 is the skew-shift with
frequency w1, kind 1 the multi-frequency shift with (w1, w2).
"""

from __future__ import annotations

import math

import numpy as np

from .backend import HAVE_NUMBA, njit
from .dynamics import MultiShift, SkewShift, Transform

_TWO_PI = 2.0 * math.pi

SKEW = 0
MULTI = 1


def transform_code(t: Transform) -> tuple[int, float, float]:
    if isinstance(t, SkewShift):
        return SKEW, t.omega, 0.0
    if isinstance(t, MultiShift):
        return MULTI, t.omega1, t.omega2
    raise TypeError(f"not a torus transformation: {t!r}")


def series_tables(v) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    l1, l2, re, im = v.tables()
    return l1.astype(np.float64), l2.astype(np.float64), re, im


# -- series evaluation -------------------------------------------------------


@njit
def _eval_scalar(x1, x2, fl1, fl2, re, im):
    acc = 0.0
    for t in range(fl1.size):
        ph = _TWO_PI * (fl1[t] * x1 + fl2[t] * x2)
        acc += re[t] * np.cos(ph) - im[t] * np.sin(ph)
    return acc


@njit
def _eval_many_nb(x1s, x2s, fl1, fl2, re, im):
    out = np.empty(x1s.size)
    for i in range(x1s.size):
        out[i] = _eval_scalar(x1s[i], x2s[i], fl1, fl2, re, im)
    return out


def _eval_many_np(x1s, x2s, fl1, fl2, re, im):
    out = np.zeros(x1s.size)
    block = max(1, 4_000_000 // max(fl1.size, 1))
    for k in range(0, x1s.size, block):
        sl = slice(k, k + block)
        ph = _TWO_PI * (np.outer(x1s[sl], fl1) + np.outer(x2s[sl], fl2))
        out[sl] = np.cos(ph) @ re - np.sin(ph) @ im
    return out


def eval_series(v, x1s: np.ndarray, x2s: np.ndarray) -> np.ndarray:
    shape = np.shape(x1s)
    x1f = np.ascontiguousarray(np.ravel(x1s), dtype=np.float64)
    x2f = np.ascontiguousarray(np.ravel(x2s), dtype=np.float64)
    fl1, fl2, re, im = series_tables(v)
    if HAVE_NUMBA:
        out = _eval_many_nb(x1f, x2f, fl1, fl2, re, im)
    else:
        out = _eval_many_np(x1f, x2f, fl1, fl2, re, im)
    return out.reshape(shape) if shape else float(out[0])


# -- orbits ------------------------------------------------------------------


@njit
def _orbit_vals_nb(x1, x2, kind, w1, w2, fl1, fl2, re, im, n):
    """Potential values at T^1 x ... T^n x (the transfer product's factors)."""
    out = np.empty(n)
    for j in range(n):
        if kind == SKEW:
            x1 = (x1 + x2) % 1.0
            x2 = (x2 + w1) % 1.0
        else:
            x1 = (x1 + w1) % 1.0
            x2 = (x2 + w2) % 1.0
        out[j] = _eval_scalar(x1, x2, fl1, fl2, re, im)
    return out


def _orbit_vals_np(x1, x2, kind, w1, w2, fl1, fl2, re, im, n):
    x1v = np.atleast_1d(np.asarray(x1, dtype=np.float64)).copy()
    x2v = np.atleast_1d(np.asarray(x2, dtype=np.float64)).copy()
    out = np.empty((n, x1v.size))
    for j in range(n):
        if kind == SKEW:
            x1v = (x1v + x2v) % 1.0
            x2v = (x2v + w1) % 1.0
        else:
            x1v = (x1v + w1) % 1.0
            x2v = (x2v + w2) % 1.0
        out[j] = _eval_many_np(x1v, x2v, fl1, fl2, re, im)
    return out


def orbit_values(v, transform: Transform, x1, x2, n: int) -> np.ndarray:
    """Values of v along T^1 x .. T^n x for a single phase."""
    kind, w1, w2 = transform_code(transform)
    fl1, fl2, re, im = series_tables(v)
    if HAVE_NUMBA:
        return _orbit_vals_nb(float(x1), float(x2), kind, w1, w2, fl1, fl2, re, im, n)
    return _orbit_vals_np(float(x1), float(x2), kind, w1, w2, fl1, fl2, re, im, n)[:, 0]


def orbit_values_batch(v, transform: Transform, x1s, x2s, n: int) -> np.ndarray:
    """(n, n_phases) array of potential values along each phase's orbit."""
    kind, w1, w2 = transform_code(transform)
    fl1, fl2, re, im = series_tables(v)
    x1s = np.asarray(x1s, dtype=np.float64).ravel()
    x2s = np.asarray(x2s, dtype=np.float64).ravel()
    if HAVE_NUMBA:
        out = np.empty((n, x1s.size))
        _orbit_vals_batch_nb(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, n, out)
        return out
    return _orbit_vals_np(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, n)


@njit
def _orbit_vals_batch_nb(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, n, out):
    for i in range(x1s.size):
        x1 = x1s[i]
        x2 = x2s[i]
        for j in range(n):
            if kind == SKEW:
                x1 = (x1 + x2) % 1.0
                x2 = (x2 + w1) % 1.0
            else:
                x1 = (x1 + w1) % 1.0
                x2 = (x2 + w2) % 1.0
            out[j, i] = _eval_scalar(x1, x2, fl1, fl2, re, im)


# -- scaled transfer products -------------------------------------------------

# The 2x2 spectral norm in closed form: ||M||^2 is the largest eigenvalue of
# M^T M, i.e. (p + sqrt(p^2 - 4 det^2)) / 2 with p the squared Frobenius norm.


@njit
def _sl2_lognorm(a, b, c, d):
    p = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = p * p - 4.0 * det * det
    if disc < 0.0:
        disc = 0.0
    return 0.5 * np.log(0.5 * (p + np.sqrt(disc)))


@njit
def _product_scaled_nb(x1, x2, kind, w1, w2, fl1, fl2, re, im, lam, energy, n):
    """Scaled product of n transfer factors: returns (a, b, c, d, log_scale).

    Renormalization divides by the max entry magnitude after every factor,
    keeping entries in [1/2, 2] up to the first step; the extracted scales
    accumulate in log_scale.
    """
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    log_scale = 0.0
    for j in range(n):
        if kind == SKEW:
            x1 = (x1 + x2) % 1.0
            x2 = (x2 + w1) % 1.0
        else:
            x1 = (x1 + w1) % 1.0
            x2 = (x2 + w2) % 1.0
        t = lam * _eval_scalar(x1, x2, fl1, fl2, re, im) - energy
        na = t * a - c
        nb = t * b - d
        c = a
        d = b
        a = na
        b = nb
        m = max(max(abs(a), abs(b)), max(abs(c), abs(d)))
        a /= m
        b /= m
        c /= m
        d /= m
        log_scale += np.log(m)
    return a, b, c, d, log_scale


def _product_scaled_py(x1, x2, kind, w1, w2, fl1, fl2, re, im, lam, energy, n):
    vals = _orbit_vals_np(x1, x2, kind, w1, w2, fl1, fl2, re, im, n)[:, 0]
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    log_scale = 0.0
    for j in range(n):
        t = lam * vals[j] - energy
        a, b, c, d = t * a - c, t * b - d, a, b
        m = max(abs(a), abs(b), abs(c), abs(d))
        a /= m
        b /= m
        c /= m
        d /= m
        log_scale += math.log(m)
    return a, b, c, d, log_scale


def product_scaled(v, transform, x1, x2, lam, energy, n):
    kind, w1, w2 = transform_code(transform)
    fl1, fl2, re, im = series_tables(v)
    fn = _product_scaled_nb if HAVE_NUMBA else _product_scaled_py
    return fn(float(x1), float(x2), kind, w1, w2, fl1, fl2, re, im, lam, energy, n)


@njit
def _le_batch_nb(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, lam, energy, n, out):
    for i in range(x1s.size):
        a, b, c, d, ls = _product_scaled_nb(
            x1s[i], x2s[i], kind, w1, w2, fl1, fl2, re, im, lam, energy, n
        )
        out[i] = (ls + _sl2_lognorm(a, b, c, d)) / n


def _le_batch_np(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, lam, energy, n):
    vals = _orbit_vals_np(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, n)
    return le_from_orbit_values(vals, lam, energy)


def le_from_orbit_values(vals: np.ndarray, lam: float, energy: float) -> np.ndarray:
    """Finite-scale exponents from precomputed orbit values (n, n_phases)."""
    n, width = vals.shape
    a = np.ones(width)
    b = np.zeros(width)
    c = np.zeros(width)
    d = np.ones(width)
    log_scale = np.zeros(width)
    for j in range(n):
        t = lam * vals[j] - energy
        na = t * a - c
        nb = t * b - d
        c, d = a, b
        a, b = na, nb
        m = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.maximum(np.abs(c), np.abs(d)))
        a /= m
        b /= m
        c /= m
        d /= m
        log_scale += np.log(m)
    p = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.maximum(p * p - 4.0 * det * det, 0.0)
    lognorm = 0.5 * np.log(0.5 * (p + np.sqrt(disc)))
    return (log_scale + lognorm) / n


def le_batch(v, transform, x1s, x2s, lam, energy, n) -> np.ndarray:
    """Finite-scale exponent (1/n) log ||M_n|| for an array of phases."""
    kind, w1, w2 = transform_code(transform)
    fl1, fl2, re, im = series_tables(v)
    x1s = np.asarray(x1s, dtype=np.float64).ravel()
    x2s = np.asarray(x2s, dtype=np.float64).ravel()
    if HAVE_NUMBA:
        out = np.empty(x1s.size)
        _le_batch_nb(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, lam, energy, n, out)
        return out
    return _le_batch_np(x1s, x2s, kind, w1, w2, fl1, fl2, re, im, lam, energy, n)


@njit
def _product_det_audit_nb(x1, x2, kind, w1, w2, fl1, fl2, re, im, lam, energy, n, seg_ls_max):
    """Scaled product with a segmented determinant audit.

    The determinant of the full scaled matrix is not resolvable in double
    once log_scale >> 18 (the true value e^{-2 ls} falls below entry
    rounding), so the drift is measured per segment while each segment's
    scaled determinant is still well above the noise floor, and summed.
    Returns (a, b, c, d, log_scale, defect_sum, n_segments).
    """
    ta, tb, tc, td = 1.0, 0.0, 0.0, 1.0
    tls = 0.0
    sa, sb, sc, sd = 1.0, 0.0, 0.0, 1.0
    sls = 0.0
    defect = 0.0
    nseg = 0
    for j in range(n):
        if kind == SKEW:
            x1 = (x1 + x2) % 1.0
            x2 = (x2 + w1) % 1.0
        else:
            x1 = (x1 + w1) % 1.0
            x2 = (x2 + w2) % 1.0
        t = lam * _eval_scalar(x1, x2, fl1, fl2, re, im) - energy
        na = t * sa - sc
        nb = t * sb - sd
        sc = sa
        sd = sb
        sa = na
        sb = nb
        m = max(max(abs(sa), abs(sb)), max(abs(sc), abs(sd)))
        sa /= m
        sb /= m
        sc /= m
        sd /= m
        sls += np.log(m)
        if sls > seg_ls_max or j == n - 1:
            det = sa * sd - sb * sc
            defect += np.log(abs(det)) + 2.0 * sls
            nseg += 1
            na = sa * ta + sb * tc
            nb = sa * tb + sb * td
            nc = sc * ta + sd * tc
            nd = sc * tb + sd * td
            ta, tb, tc, td = na, nb, nc, nd
            m = max(max(abs(ta), abs(tb)), max(abs(tc), abs(td)))
            ta /= m
            tb /= m
            tc /= m
            td /= m
            tls += sls + np.log(m)
            sa, sb, sc, sd = 1.0, 0.0, 0.0, 1.0
            sls = 0.0
    return ta, tb, tc, td, tls, defect, nseg


def _product_det_audit_py(x1, x2, kind, w1, w2, fl1, fl2, re, im, lam, energy, n, seg_ls_max):
    vals = _orbit_vals_np(x1, x2, kind, w1, w2, fl1, fl2, re, im, n)[:, 0]
    ta, tb, tc, td = 1.0, 0.0, 0.0, 1.0
    tls = 0.0
    sa, sb, sc, sd = 1.0, 0.0, 0.0, 1.0
    sls = 0.0
    defect = 0.0
    nseg = 0
    for j in range(n):
        t = lam * vals[j] - energy
        sa, sb, sc, sd = t * sa - sc, t * sb - sd, sa, sb
        m = max(abs(sa), abs(sb), abs(sc), abs(sd))
        sa /= m
        sb /= m
        sc /= m
        sd /= m
        sls += math.log(m)
        if sls > seg_ls_max or j == n - 1:
            det = sa * sd - sb * sc
            defect += math.log(abs(det)) + 2.0 * sls
            nseg += 1
            ta, tb, tc, td = (
                sa * ta + sb * tc,
                sa * tb + sb * td,
                sc * ta + sd * tc,
                sc * tb + sd * td,
            )
            m = max(abs(ta), abs(tb), abs(tc), abs(td))
            ta /= m
            tb /= m
            tc /= m
            td /= m
            tls += sls + math.log(m)
            sa, sb, sc, sd = 1.0, 0.0, 0.0, 1.0
            sls = 0.0
    return ta, tb, tc, td, tls, defect, nseg


def product_det_audit(v, transform, x1, x2, lam, energy, n, seg_ls_max=4.0):
    kind, w1, w2 = transform_code(transform)
    fl1, fl2, re, im = series_tables(v)
    fn = _product_det_audit_nb if HAVE_NUMBA else _product_det_audit_py
    return fn(float(x1), float(x2), kind, w1, w2, fl1, fl2, re, im, lam, energy, n, seg_ls_max)


def product_raw(v, transform, x1, x2, lam, energy, n) -> np.ndarray:
    """Unrenormalized transfer product (caller must keep n * S(lam) <= ~600)."""
    vals = orbit_values(v, transform, x1, x2, n)
    m = np.eye(2)
    for j in range(n):
        t = lam * vals[j] - energy
        m = np.array(((t, -1.0), (1.0, 0.0))) @ m
    return m


# -- symmetric tridiagonal eigensolver ----------------------------------------


def tql2(diag: np.ndarray, off: np.ndarray, want_vectors: bool = True, max_sweeps: int = 64):
    """Implicit-shift QL eigensolver for a symmetric tridiagonal matrix.

    Ports the classic EISPACK routine; eigenvalues return sorted ascending,
    eigenvectors as columns. Runs under numba when available; the fallback
    uses the same code with numpy column rotations.
    """
    d = np.asarray(diag, dtype=np.float64).copy()
    n = d.size
    e = np.zeros(n)
    e[: n - 1] = np.asarray(off, dtype=np.float64)
    z = np.eye(n) if want_vectors else np.zeros((1, 1))
    fn = _tql2_core_nb if HAVE_NUMBA else _tql2_core
    ok = fn(d, e, z, want_vectors, max_sweeps)
    if not ok:
        raise RuntimeError("tridiagonal QL iteration failed to converge")
    order = np.argsort(d, kind="stable")
    d = d[order]
    if want_vectors:
        z = z[:, order]
    return (d, z) if want_vectors else (d, None)


def _tql2_core(d, e, z, want_vectors, max_sweeps):
    n = d.size
    eps = np.finfo(np.float64).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                return False
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            sgn = r if g >= 0.0 else -r
            g = d[m] - d[l] + e[l] / (g + sgn)
            s = 1.0
            c = 1.0
            p = 0.0
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(z.shape[0]):
                        f2 = z[k, i + 1]
                        z[k, i + 1] = s * z[k, i] + c * f2
                        z[k, i] = c * z[k, i] - s * f2
            else:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
    return True


_tql2_core_nb = njit(_tql2_core) if HAVE_NUMBA else None


# -- monotone-slice root finding for sublevel covers --------------------------


@njit
def _bisect_columns_nb(u, lo, hi, swap, fl1, fl2, re, im, tol, out):
    """Per column u[i]: root of f(u, .) on [lo, hi] when the endpoint signs
    differ (f monotone on the slice by hypothesis); nan otherwise.
    swap exchanges the roles of the coordinates."""
    for i in range(u.size):
        if swap == 0:
            fa = _eval_scalar(u[i], lo, fl1, fl2, re, im)
            fb = _eval_scalar(u[i], hi, fl1, fl2, re, im)
        else:
            fa = _eval_scalar(lo, u[i], fl1, fl2, re, im)
            fb = _eval_scalar(hi, u[i], fl1, fl2, re, im)
        if fa == 0.0:
            out[i] = lo
            continue
        if fb == 0.0:
            out[i] = hi
            continue
        if (fa > 0.0) == (fb > 0.0):
            out[i] = np.nan
            continue
        a = lo
        b = hi
        while b - a > tol:
            mid = 0.5 * (a + b)
            if swap == 0:
                fm = _eval_scalar(u[i], mid, fl1, fl2, re, im)
            else:
                fm = _eval_scalar(mid, u[i], fl1, fl2, re, im)
            if fm == 0.0:
                a = mid
                b = mid
                break
            if (fm > 0.0) == (fa > 0.0):
                a = mid
            else:
                b = mid
        out[i] = 0.5 * (a + b)


def _bisect_columns_np(u, lo, hi, swap, fl1, fl2, re, im, tol):
    def f(uu, vv):
        if swap == 0:
            return _eval_many_np(uu, vv, fl1, fl2, re, im)
        return _eval_many_np(vv, uu, fl1, fl2, re, im)

    fa = f(u, np.full_like(u, lo))
    fb = f(u, np.full_like(u, hi))
    out = np.full(u.size, np.nan)
    out[fa == 0.0] = lo
    out[fb == 0.0] = hi
    active = ((fa > 0.0) != (fb > 0.0)) & (fa != 0.0) & (fb != 0.0)
    a = np.full(u.size, lo)
    b = np.full(u.size, hi)
    sign_a = fa > 0.0
    steps = max(1, int(math.ceil(math.log2(max((hi - lo) / tol, 1.0)))))
    idx = np.nonzero(active)[0]
    for _ in range(steps):
        if idx.size == 0:
            break
        mid = 0.5 * (a[idx] + b[idx])
        fm = f(u[idx], mid)
        go_a = (fm > 0.0) == sign_a[idx]
        a[idx] = np.where(go_a, mid, a[idx])
        b[idx] = np.where(go_a, b[idx], mid)
    out[active] = 0.5 * (a[active] + b[active])
    return out


def bisect_columns(series, u: np.ndarray, lo: float, hi: float, swap: bool, tol: float) -> np.ndarray:
    fl1, fl2, re, im = series_tables(series)
    u = np.asarray(u, dtype=np.float64)
    if HAVE_NUMBA:
        out = np.empty(u.size)
        _bisect_columns_nb(u, float(lo), float(hi), 1 if swap else 0, fl1, fl2, re, im, tol, out)
        return out
    return _bisect_columns_np(u, float(lo), float(hi), 1 if swap else 0, fl1, fl2, re, im, tol)
