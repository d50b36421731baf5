"""Command line interface.

Subcommands: lyapunov, ldt, multiscale, continuity, convergence, loja,
localize, identity-checks, plot. Exit codes: 0 all assertions passed,
2 assertion failures (listed on stderr), 1 usage or config errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .. import __version__
from ..backend import backend_name, set_num_threads
from .config import Constants, ExperimentConfig, RunManifest, config_hash
from .runs import (
    GREEN_HEADER,
    LOJA_COVER_HEADER,
    RunOutput,
    run_continuity_probe,
    run_convergence_fit,
    run_identity_checks,
    run_ldt,
    run_localize,
    run_loja,
    run_lyapunov_sweep,
    run_multiscale,
    write_csv,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="qplab", description=__doc__)
    p.add_argument("--version", action="version", version=f"qplab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="YAML config file")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--seed", type=int, help="RNG seed")
        sp.add_argument("--frequency", help="transform preset (e.g. golden, pair)")
        sp.add_argument("--potential", help="potential spec (e.g. cos-sum)")
        sp.add_argument("--lambda", dest="coupling", type=float, help="coupling constant")
        sp.add_argument("--energy", type=float, help="energy E")

    for name in (
        "lyapunov",
        "ldt",
        "multiscale",
        "continuity",
        "convergence",
        "loja",
        "localize",
        "identity-checks",
    ):
        sp = sub.add_parser(name)
        common(sp)
        if name == "multiscale":
            sp.add_argument("--n0", type=int)
            sp.add_argument("--n", type=int)
        if name == "continuity":
            sp.add_argument("--energy2", type=float)
            sp.add_argument("--n", type=int)
        if name == "loja":
            sp.add_argument("--eps", type=float, action="append")
            sp.add_argument("--validate-grid", type=int, default=1024)
        if name == "localize":
            sp.add_argument("--box-n", type=int)

    sp = sub.add_parser("plot")
    sp.add_argument("csv", type=Path)
    sp.add_argument("kind")
    sp.add_argument("--out", type=Path, required=True)
    return p


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_yaml(args.config)
    else:
        cfg = ExperimentConfig()
    for attr, field in [
        ("out", "out_dir"),
        ("threads", "threads"),
        ("seed", "seed"),
        ("frequency", "transform"),
        ("potential", "potential"),
        ("coupling", "coupling"),
        ("energy", "energy"),
        ("energy2", "energy2"),
        ("n0", "n0"),
        ("n", "n"),
        ("box_n", "box_n"),
    ]:
        val = getattr(args, attr, None)
        if val is not None:
            setattr(cfg, field, str(val) if field == "out_dir" else val)
    if getattr(args, "eps", None):
        cfg.eps = list(args.eps)
    cfg.validate()
    return cfg


def _emit(cfg: ExperimentConfig, command: str, outputs: list[tuple[str, list, list]]) -> list:
    """Write CSVs and the manifest; returns [(file, rows)] descriptors."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, header, rows in outputs:
        count = write_csv(out_dir / name, header, rows)
        written.append({"file": name, "rows": count})
    manifest = RunManifest(
        config_hash=config_hash(cfg),
        code_version=__version__,
        backend=backend_name(),
        command=command,
        constants=vars(cfg.constants) if not isinstance(cfg.constants, dict) else cfg.constants,
        outputs=written,
    )
    manifest.write(out_dir)
    return written


def _finish(cfg: ExperimentConfig, command: str, outs: list[RunOutput], extra=()) -> int:
    files = [(f"{o.name}.csv", o.header, o.rows) for o in outs]
    files.extend(extra)
    _emit(cfg, command, files)
    failures = [f for o in outs for f in o.failures]
    if failures:
        print(f"{command}: {len(failures)} assertion failure(s)", file=sys.stderr)
        for f in failures:
            print(f"  FAIL {f}", file=sys.stderr)
        return 2
    print(f"{command}: ok ({sum(len(o.rows) for o in outs)} rows)")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "plot":
        from .plots import SchemaMismatch, emit_plot

        try:
            out = emit_plot(args.csv, args.kind, args.out)
        except (SchemaMismatch, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"plot: wrote {out}")
        return 0

    try:
        cfg = _load_config(args)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if cfg.threads:
        set_num_threads(cfg.threads)

    cmd = args.command
    if cmd == "lyapunov":
        return _finish(cfg, cmd, [run_lyapunov_sweep(cfg)])
    if cmd == "ldt":
        return _finish(cfg, cmd, [run_ldt(cfg)])
    if cmd == "multiscale":
        try:
            return _finish(cfg, cmd, [run_multiscale(cfg)])
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    if cmd == "continuity":
        return _finish(cfg, cmd, [run_continuity_probe(cfg)])
    if cmd == "convergence":
        try:
            return _finish(cfg, cmd, [run_convergence_fit(cfg)])
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    if cmd == "loja":
        out, covers = run_loja(cfg, validate_grid=args.validate_grid)
        extra = [
            (f"loja_cover_eps{eps!r}.csv", LOJA_COVER_HEADER, rows)
            for eps, rows in covers.items()
        ]
        return _finish(cfg, cmd, [out], extra)
    if cmd == "localize":
        return _finish(cfg, cmd, [run_localize(cfg)])
    if cmd == "identity-checks":
        return _finish(cfg, cmd, [run_identity_checks(cfg)])
    raise AssertionError(f"unhandled command {cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
