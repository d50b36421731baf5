"""Experiment drivers: sweeps, trend fits, and the identity battery.

Every run computes into fixed array orders, formats floats with shortest
round-trip repr, and returns (rows, failures); CSV bytes are identical for
identical config and seed at any thread count. Assertion failures do not
raise, they are listed so the CLI can exit with status 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import kernels
from ..cocycle import (
    CocycleParams,
    avalanche_residual,
    half_cell_grid,
    orbit_blocks,
    scaling_factor,
    transfer_product,
    transfer_product_det_audit,
)
from ..dynamics import Torus2Point
from ..lojasiewicz import loja_pipeline, mc_sublevel_measure, validate_cover
from ..potential import transversality_certificate
from ..spectral import det_transfer_identity, eigen_decay_report, green_function
from ..subharmonic import fejer_bound_check, fejer_kernel, fejer_kernel_direct, fourier_birkhoff_identity
from .config import ExperimentConfig

__all__ = [
    "write_csv",
    "phase_set",
    "run_lyapunov_sweep",
    "run_multiscale",
    "run_convergence_fit",
    "run_continuity_probe",
    "run_ldt",
    "run_loja",
    "run_localize",
    "run_identity_checks",
    "RunOutput",
]

LYAPUNOV_HEADER = ["E", "N", "mean_le", "stddev", "grid_n", "lambda", "transform"]
LDT_HEADER = ["n", "threshold", "fraction", "samples", "source"]
MULTISCALE_HEADER = ["n0", "n", "l_n", "l_n0", "l_2n0", "lhs", "rhs", "ok"]
CONTINUITY_HEADER = ["e1", "e2", "n", "lhs", "rhs", "ok"]
CONVERGENCE_HEADER = ["n", "l_n", "l_2n", "diff"]
LOJA_COVER_HEADER = ["kind", "x1_lo", "x1_hi", "x2_lo", "x2_hi", "certified_bound"]
LOJA_SUMMARY_HEADER = ["eps", "measure_bound", "mc_estimate", "mc_ci95", "exponent_b", "escapes", "events"]
LOCALIZE_HEADER = ["eig_index", "eigenvalue", "center", "gamma_fit", "r2", "tail_mass"]
GREEN_HEADER = ["n1", "n2", "g_abs", "cramer_bound"]
IDENTITY_HEADER = ["check", "value", "tolerance", "ok"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return len(rows)


@dataclass
class RunOutput:
    name: str
    rows: list
    header: list
    failures: list


def phase_set(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray, str]:
    mode = cfg.phases.get("mode", "grid")
    n = int(cfg.phases.get("n", 64))
    if mode == "grid":
        x1, x2 = half_cell_grid(n)
        return x1, x2, f"grid{n}x{n}"
    rng = np.random.default_rng(int(cfg.phases.get("seed", cfg.seed)))
    return rng.random(n), rng.random(n), f"mc{n}"


def _params(cfg: ExperimentConfig, energy: float) -> CocycleParams:
    return CocycleParams(cfg.potential_obj(), cfg.transform_obj(), cfg.coupling, energy)


def run_lyapunov_sweep(cfg: ExperimentConfig) -> RunOutput:
    """mean/stddev of the finite-scale exponent over E_grid x scales.

    Flags every (E, N) with mean below gamma * log|coupling| once the
    coupling exceeds the configured positivity threshold.
    """
    v = cfg.potential_obj()
    t = cfg.transform_obj()
    x1, x2, label = phase_set(cfg)
    energies = cfg.energy_grid()
    rows = []
    failures = []
    check = abs(cfg.coupling) >= cfg.constants.positivity_lambda_min
    floor = cfg.constants.gamma * math.log(max(abs(cfg.coupling), 1.0))
    grid_n = int(math.isqrt(x1.size))
    for n in cfg.scales:
        vals = kernels.orbit_values_batch(v, t, x1, x2, n)
        for e in energies:
            le = kernels.le_from_orbit_values(vals, cfg.coupling, e)
            mean, std = float(le.mean()), float(le.std())
            rows.append((e, n, mean, std, grid_n, cfg.coupling, label_of(cfg)))
            if check and mean < floor:
                failures.append(
                    f"mean_le {mean:.6f} < {floor:.6f} at E={e!r}, N={n}"
                )
    return RunOutput("lyapunov", rows, LYAPUNOV_HEADER, failures)


def label_of(cfg: ExperimentConfig) -> str:
    t = cfg.transform
    return t if isinstance(t, str) else str(cfg.transform_obj())


def run_multiscale(cfg: ExperimentConfig) -> RunOutput:
    """|L_n + L_{n0} - 2 L_{2 n0}| against c0 * S * n0 / n on a shared grid."""
    n0, n = cfg.n0, cfg.n
    if n % n0 != 0:
        raise ValueError(f"n = {n} must be a multiple of n0 = {n0}")
    if n < 4 * n0:
        raise ValueError(f"n = {n} must be >= 4 * n0 = {4 * n0}")
    v = cfg.potential_obj()
    t = cfg.transform_obj()
    x1, x2, _ = phase_set(cfg)
    vals = kernels.orbit_values_batch(v, t, x1, x2, n)
    le = lambda k: float(
        kernels.le_from_orbit_values(vals[:k], cfg.coupling, cfg.energy).mean()
    )
    l_n, l_n0, l_2n0 = le(n), le(n0), le(2 * n0)
    s = scaling_factor(cfg.coupling, v.sup_norm_bound())
    lhs = abs(l_n + l_n0 - 2.0 * l_2n0)
    rhs = cfg.constants.c0 * s * n0 / n
    ok = lhs <= rhs
    failures = [] if ok else [f"multiscale bound fails: {lhs!r} > {rhs!r}"]
    return RunOutput(
        "multiscale",
        [(n0, n, l_n, l_n0, l_2n0, lhs, rhs, ok)],
        MULTISCALE_HEADER,
        failures,
    )


def run_convergence_fit(cfg: ExperimentConfig) -> RunOutput:
    """Fit beta in L_N - L_{2N} ~ c N^(-beta) over the configured scales."""
    if len(cfg.scales) < 4:
        raise ValueError("need at least 4 scales for the convergence fit")
    v = cfg.potential_obj()
    t = cfg.transform_obj()
    x1, x2, _ = phase_set(cfg)
    vals = kernels.orbit_values_batch(v, t, x1, x2, 2 * max(cfg.scales))
    rows = []
    diffs = []
    for n in cfg.scales:
        l_n = float(kernels.le_from_orbit_values(vals[:n], cfg.coupling, cfg.energy).mean())
        l_2n = float(
            kernels.le_from_orbit_values(vals[: 2 * n], cfg.coupling, cfg.energy).mean()
        )
        rows.append((n, l_n, l_2n, l_n - l_2n))
        diffs.append(l_n - l_2n)
    diffs = np.asarray(diffs)
    failures = []
    if np.all(np.abs(diffs) < 1e-6):
        verdict = "converged"
        beta = math.nan
        resid = 0.0
    else:
        mask = np.abs(diffs) > 1e-12
        xs = np.log(np.asarray(cfg.scales, dtype=float)[mask])
        ys = np.log(np.abs(diffs[mask]))
        slope, intercept = np.polyfit(xs, ys, 1)
        beta = -float(slope)
        resid = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
        verdict = f"beta={beta!r}"
        if not beta > 0:
            failures.append(f"fitted beta = {beta!r} is not positive")
    out = RunOutput("convergence", rows, CONVERGENCE_HEADER, failures)
    out.verdict = verdict
    out.beta = beta
    out.residual = resid
    return out


def run_continuity_probe(cfg: ExperimentConfig) -> RunOutput:
    """|L_n(E) - L_n(E')| against the Lipschitz bound e^{S n} |E - E'|."""
    v = cfg.potential_obj()
    t = cfg.transform_obj()
    x1, x2, _ = phase_set(cfg)
    n = cfg.n
    vals = kernels.orbit_values_batch(v, t, x1, x2, n)
    l1 = float(kernels.le_from_orbit_values(vals, cfg.coupling, cfg.energy).mean())
    l2 = float(kernels.le_from_orbit_values(vals, cfg.coupling, cfg.energy2).mean())
    s = scaling_factor(cfg.coupling, v.sup_norm_bound())
    lhs = abs(l1 - l2)
    rhs = math.inf if n * s > 600.0 else math.exp(n * s) * abs(cfg.energy - cfg.energy2)
    ok = lhs <= rhs
    failures = [] if ok else [f"continuity bound fails: {lhs!r} > {rhs!r}"]
    return RunOutput(
        "continuity",
        [(cfg.energy, cfg.energy2, n, lhs, rhs, ok)],
        CONTINUITY_HEADER,
        failures,
    )


def run_ldt(cfg: ExperimentConfig) -> RunOutput:
    """Deviation fractions |L_N(x) - mean| > N^(-tau) per scale, plus the
    monotone-trend verdict."""
    v = cfg.potential_obj()
    t = cfg.transform_obj()
    x1, x2, label = phase_set(cfg)
    tau = cfg.constants.tau
    c = cfg.constants.threshold_c
    rows = []
    fractions = []
    vals = kernels.orbit_values_batch(v, t, x1, x2, max(cfg.scales))
    for n in cfg.scales:
        le = kernels.le_from_orbit_values(vals[:n], cfg.coupling, cfg.energy)
        thr = c * float(n) ** (-tau)
        frac = float(np.mean(np.abs(le - le.mean()) > thr))
        fractions.append(frac)
        rows.append((n, thr, frac, le.size, f"le:{label_of(cfg)}"))
    failures = []
    if any(b > a for a, b in zip(fractions, fractions[1:])):
        failures.append(f"deviation fractions not non-increasing: {fractions}")
    out = RunOutput("ldt", rows, LDT_HEADER, failures)
    out.fractions = fractions
    return out


def run_loja(cfg: ExperimentConfig, validate_grid: int = 1024) -> tuple[RunOutput, dict]:
    """Sublevel covers for each eps, their MC oracle, and soundness checks.

    Returns the summary output plus {eps: cover-rows} for the cover CSVs.
    """
    v = cfg.potential_obj()
    cert = transversality_certificate(v, (2, 2), 128)
    if not cert.ok:
        raise ValueError("potential fails the transversality certificate")
    rows = []
    failures = []
    covers = {}
    for eps in cfg.eps:
        cover = loja_pipeline(
            v,
            cfg.energy,
            float(eps),
            cert.m,
            cert.c,
            c_impl=cfg.constants.c_impl,
            c_cov=cfg.constants.c_cov,
        )
        escapes, _ = validate_cover(cover, v, validate_grid)
        mc = mc_sublevel_measure(v, cfg.energy, float(eps), 10**6, cfg.seed)
        rows.append(
            (
                float(eps),
                cover.measure_bound,
                mc.estimate,
                mc.ci95,
                cover.exponent_b,
                escapes,
                len(cover.events),
            )
        )
        covers[float(eps)] = cover.to_csv_rows()
        if escapes:
            failures.append(f"{escapes} validation-grid escapes at eps={eps!r}")
        if cover.measure_bound < mc.estimate - 3.0 * mc.ci95:
            failures.append(
                f"measure bound {cover.measure_bound!r} below MC {mc.estimate!r} - 3ci at eps={eps!r}"
            )
    if len(rows) >= 2:
        xs = np.log([r[0] for r in rows])
        ys = np.log([max(r[1], 1e-300) for r in rows])
        slope = float(np.polyfit(xs, ys, 1)[0])
        if not slope > 0:
            failures.append(f"log-log slope of measure vs eps is {slope!r}, not positive")
    out = RunOutput("loja", rows, LOJA_SUMMARY_HEADER, failures)
    return out, covers


def run_localize(cfg: ExperimentConfig) -> RunOutput:
    """Eigenvector-decay diagnostics at the configured phase and box size."""
    p = _params(cfg, cfg.energy)
    x = Torus2Point(*cfg.phase)
    report = eigen_decay_report(x, p, cfg.box_n)
    out = RunOutput("localize", report.to_csv_rows(), LOCALIZE_HEADER, [])
    out.report = report
    return out


def run_identity_checks(cfg: ExperimentConfig) -> RunOutput:
    """The fast exact/near-exact identity battery; one row per check."""
    rng = np.random.default_rng(cfg.seed)
    v = cfg.potential_obj()
    t = cfg.transform_obj()
    rows = []
    failures = []

    def record(name: str, value: float, tol: float):
        ok = value <= tol
        rows.append((name, value, tol, ok))
        if not ok:
            failures.append(f"{name}: {value!r} > {tol!r}")

    # closed-form iteration vs composition
    worst = 0.0
    for _ in range(4):
        x = Torus2Point(rng.random(), rng.random())
        steps = int(rng.integers(100, 10**4))
        closed = t.iterate(x, steps)
        comp = x
        for _ in range(steps):
            comp = t.apply(comp)
        worst = max(worst, closed.distance(comp))
    record("dynamics_closed_form_vs_composition", worst, 1e-10)

    # determinant audit of a long scaled product
    p = _params(cfg, cfg.energy)
    audit = transfer_product_det_audit(Torus2Point(*cfg.phase), p, 10**6)
    record("det_product_drift_1e6", audit.relative_error, 1e-8)

    # Fejer closed form vs direct sum
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 2000))
        tt = rng.random()
        if abs(tt - round(tt)) < 1e-6:
            continue
        worst = max(worst, abs(fejer_kernel(n, tt) - fejer_kernel_direct(n, tt)))
    record("fejer_closed_vs_direct", worst, 1e-10)

    # Fejer bound
    worst_margin = 0.0
    for _ in range(10**4):
        n = int(rng.integers(1, 10**4))
        chk = fejer_bound_check(n, rng.random())
        worst_margin = max(worst_margin, chk.value_abs - chk.bound)
    record("fejer_bound_margin", worst_margin, 1e-12)

    # Birkhoff shift-average identity (multi-frequency)
    from ..dynamics import MultiShift
    from ..potential import gevrey_series

    shift = t if isinstance(t, MultiShift) else MultiShift(math.sqrt(2) - 1, math.sqrt(3) - 1)
    series = gevrey_series(2.0, 1.0, degree=8, seed=3)
    worst = 0.0
    for _ in range(5):
        x = Torus2Point(rng.random(), rng.random())
        n = int(rng.integers(5, 60))
        worst = max(worst, fourier_birkhoff_identity(series, shift, x, n).gap)
    record("fourier_birkhoff_gap", worst, 1e-9)

    # determinant / transfer identity
    worst = 0.0
    for _ in range(5):
        x = Torus2Point(rng.random(), rng.random())
        n = int(rng.integers(4, 61))
        ident = det_transfer_identity(x, _params(cfg, cfg.energy), n)
        if not ident.overflow:
            worst = max(worst, ident.max_gap)
    record("det_transfer_identity_gap", worst, 1e-8)

    # (H - E) G = I
    from ..spectral import build_box

    worst = 0.0
    for _ in range(3):
        x = Torus2Point(rng.random(), rng.random())
        box = build_box(x, p, 40)
        g = green_function(x, p, 40)
        h = box.dense() - cfg.energy * np.eye(40)
        worst = max(worst, float(np.abs(h @ g.matrix - np.eye(40)).max()))
        if not g.cramer_ok:
            failures.append("green function Cramer bound violated")
    record("green_identity_residual", worst, 1e-8)

    # avalanche: two-block and commuting-diagonal residuals
    x = Torus2Point(*cfg.phase)
    two = avalanche_residual(orbit_blocks(x, p, 10, 2))
    record("avalanche_two_block_residual", two.residual, 1e-12)
    diag = [np.diag([100.0, 0.01]) for _ in range(10)]
    record("avalanche_diag_residual", avalanche_residual(diag, mu=100.0).residual, 1e-12)

    return RunOutput("identity-checks", rows, IDENTITY_HEADER, failures)
