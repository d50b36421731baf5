"""Deterministic SVG figures from CSV files (no recomputation).

Figures are drawn from the CSV alone; reruns on the same CSV produce
byte-identical SVG (fixed hash salt, no embedded date). An empty CSV yields
empty axes with a warning banner.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "qplab"

__all__ = ["emit_plot", "PLOT_KINDS"]

PLOT_KINDS = ("le_vs_E", "ldt_curve", "decay_profile", "loja_loglog", "continuity")


class SchemaMismatch(ValueError):
    pass


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file, no header")
        rows = [r for r in reader if r]
    return header, rows


def _require(header: list[str], columns: list[str], path) -> dict[str, int]:
    idx = {}
    for c in columns:
        if c not in header:
            raise SchemaMismatch(f"{path}: missing column {c!r} (have {header})")
        idx[c] = header.index(c)
    return idx


def _finish(fig, ax, rows, out_path, title: str):
    if not rows:
        ax.text(
            0.5,
            0.5,
            "WARNING: empty CSV, nothing to plot",
            ha="center",
            va="center",
            transform=ax.transAxes,
            color="firebrick",
        )
    ax.set_title(title)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plot(csv_path, kind: str, out_path) -> Path:
    if kind not in PLOT_KINDS:
        raise SchemaMismatch(f"unknown plot kind {kind!r}; known: {PLOT_KINDS}")
    header, rows = _read_csv(csv_path)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))

    if kind == "le_vs_E":
        idx = _require(header, ["E", "N", "mean_le"], csv_path)
        series: dict[str, list] = {}
        for r in rows:
            series.setdefault(r[idx["N"]], []).append(
                (float(r[idx["E"]]), float(r[idx["mean_le"]]))
            )
        for n in sorted(series, key=float):
            pts = sorted(series[n])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=f"N={n}")
        ax.set_xlabel("E")
        ax.set_ylabel("mean finite-scale exponent")
        if series:
            ax.legend()
        _finish(fig, ax, rows, out_path, "finite-scale exponent vs energy")

    elif kind == "ldt_curve":
        idx = _require(header, ["n", "fraction"], csv_path)
        pts = sorted((float(r[idx["n"]]), float(r[idx["fraction"]])) for r in rows)
        floor = 1e-6
        ax.plot(
            [p[0] for p in pts],
            [max(p[1], floor) for p in pts],
            marker="o",
        )
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("scale n")
        ax.set_ylabel(f"deviation fraction (floor {floor:g})")
        _finish(fig, ax, rows, out_path, "large-deviation fractions")

    elif kind == "decay_profile":
        idx = _require(header, ["eigenvalue", "gamma_fit"], csv_path)
        xs = [float(r[idx["eigenvalue"]]) for r in rows]
        ys = [float(r[idx["gamma_fit"]]) for r in rows]
        ax.plot(xs, ys, ".", markersize=3)
        ax.set_xlabel("eigenvalue")
        ax.set_ylabel("fitted decay rate")
        _finish(fig, ax, rows, out_path, "eigenvector decay rates")

    elif kind == "loja_loglog":
        idx = _require(header, ["eps", "measure_bound", "mc_estimate"], csv_path)
        pts = sorted(
            (float(r[idx["eps"]]), float(r[idx["measure_bound"]]), float(r[idx["mc_estimate"]]))
            for r in rows
        )
        ax.plot([p[0] for p in pts], [max(p[1], 1e-300) for p in pts], "o-", label="cover bound")
        ax.plot([p[0] for p in pts], [max(p[2], 1e-12) for p in pts], "s--", label="MC estimate")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("eps")
        ax.set_ylabel("sublevel measure")
        if rows:
            ax.legend()
        _finish(fig, ax, rows, out_path, "sublevel measure vs eps")

    elif kind == "continuity":
        idx = _require(header, ["e1", "e2", "lhs"], csv_path)
        pts = sorted(
            (abs(float(r[idx["e1"]]) - float(r[idx["e2"]])), float(r[idx["lhs"]]))
            for r in rows
        )
        ax.plot([max(p[0], 1e-300) for p in pts], [max(p[1], 1e-300) for p in pts], "o-")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("|E - E'|")
        ax.set_ylabel("|L_N(E) - L_N(E')|")
        _finish(fig, ax, rows, out_path, "modulus of continuity probe")

    return out_path
