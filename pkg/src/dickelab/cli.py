"""Command-line entry point: ``dickelab {sweep,figure,critical,converge,compare}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .exact import CutoffError, EigensolverError, converge_cutoff
from .meanfield import MinimizationError, critical_point
from .model import ModelParams
from .sweep import (
    ConfigError,
    OutputExistsError,
    compare_paths,
    compare_report,
    default_threads,
    load_config,
    reproduce_figure,
    run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $DICKELAB_THREADS or 1)")
    common.add_argument("--overwrite", action="store_true", help="replace existing output")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="override output format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dickelab", description="Dicke model ground-state laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", parents=[common], help="run a gamma sweep from a JSON config")
    s.add_argument("config")
    s.add_argument("--out", default=None, help="output path (default: from config)")

    f = sub.add_parser("figure", parents=[common], help="emit figure data (exact vs analytic curves)")
    f.add_argument("which", choices=("fig1", "fig2"))
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--omega-a", type=float, default=1.0)
    f.add_argument("--n", type=int, nargs="+", default=None, help="atom numbers (default 10 20 30 50)")
    f.add_argument("--points", type=int, default=111)
    f.add_argument("--gamma-max", type=float, default=1.1)

    c = sub.add_parser("critical", parents=[common], help="critical coupling and mean-field critical point")
    c.add_argument("--omega-a", type=float, required=True)
    c.add_argument("--gamma", type=float, default=None)
    c.add_argument("--n", type=int, default=1)

    v = sub.add_parser("converge", parents=[common], help="converged photon cutoff")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--omega-a", type=float, required=True)
    v.add_argument("--gamma", type=float, required=True)
    v.add_argument("--energy-tol", type=float, default=1e-9)

    r = sub.add_parser("compare", parents=[common], help="exact vs analytic delta table")
    r.add_argument("config")
    r.add_argument("--out", default=None)
    return p


def _critical(args) -> None:
    params = ModelParams(args.n, args.omega_a, 0.0 if args.gamma is None else args.gamma)
    print(f"gamma_c = {params.gamma_c!r}")
    if args.gamma is None:
        return
    res = critical_point(params)
    pt = res.point
    print(f"phase = {res.phase}")
    print(f"q_c = {pt.q!r}")
    print(f"p_c = {pt.p!r}")
    print(f"theta_c = {pt.theta!r}")
    print(f"phi_c = {pt.phi!r}")
    print(f"energy_per_atom = {res.energy_per_atom!r}")


def _run(args) -> int:
    if args.command == "critical":
        _critical(args)
    elif args.command == "converge":
        nu = converge_cutoff(ModelParams(args.n, args.omega_a, args.gamma), args.energy_tol)
        print(nu)
    elif args.command == "sweep":
        cfg = load_config(args.config)
        if args.format:
            cfg = replace(cfg, format=args.format)
        records = run_sweep(cfg, args.threads, args.overwrite, args.out)
        print(f"wrote {len(records)} records to {args.out or cfg.output}")
    elif args.command == "compare":
        cfg = load_config(args.config)
        if args.format:
            cfg = replace(cfg, format=args.format)
        rows, summary = compare_report(cfg, args.threads, args.overwrite, args.out)
        table, summ = compare_paths(cfg, args.out)
        print(f"wrote {len(rows)} comparison rows to {table}" + (f" and summary to {summ}" if summ else ""))
    elif args.command == "figure":
        import numpy as np

        kwargs = {"omega_a": args.omega_a, "gammas": np.linspace(0.0, args.gamma_max, args.points)}
        if args.n:
            kwargs["n_list"] = tuple(args.n)
        manifest = reproduce_figure(args.which, args.out, args.overwrite, args.threads, **kwargs)
        print(f"wrote {len(manifest['files'])} curves and manifest.json to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads is None:
        args.threads = default_threads()
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutputExistsError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EigensolverError, CutoffError, MinimizationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
