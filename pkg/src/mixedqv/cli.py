"""Command-line front end.

Each experiment subcommand builds an :class:`ExperimentConfig` from, in
increasing priority, the built-in defaults, the subcommand defaults, the
``--config`` file and explicit flags, then writes one CSV whose leading
``#`` lines echo the effective configuration.

Exit codes: 0 success, 1 numerical or self-check failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from dataclasses import replace

from .experiments import (ConfigError, ExperimentConfig, load_config,
                          run_convergence, run_fubini_check,
                          run_randomized_bias, run_refinement, run_rqv_bias,
                          run_rqv_variance, write_records_csv,
                          write_summary_csv)
from .moments import write_moment_csv
from .paths import (Seed, make_equidistant_grid, read_path_csv, sample_mixed,
                    write_path_csv)
from .periodogram import periodogram, periodogram_rs

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    """Bad input that is not a configuration key, such as an unreadable path CSV."""

# Subcommand -> (experiment kind, defaults applied before the config file).
SUBCOMMANDS = {
    "simulate": ("convergence", {"n": 1024}),
    "periodogram": ("convergence", {"n": 1024}),
    "converge": ("convergence", {}),
    "bias": ("rqv_bias", {"replicates": 10000}),
    "variance": ("rqv_variance", {"replicates": 10000}),
    "rbias": ("randomized_bias", {}),
    "fubini": ("fubini", {"n": 256, "replicates": 20, "quad_nodes": 64}),
    "refine": ("refinement", {"n": 2**14, "replicates": 100}),
}

# Config key -> flag; ``kind`` is chosen by the subcommand.
FLAGS = {
    "T": "--T", "n": "--n", "H": "--H", "xi": "--xi", "L_grid": "--L-grid",
    "replicates": "--replicates", "seed": "--seed", "out": "--out",
    "records": "--records", "quad_nodes": "--quad-nodes", "threads": "--threads",
    "n_ladder": "--n-ladder", "method": "--method",
    "component": "--component", "mc_draws": "--mc-draws",
}

HELP = {
    "T": "time horizon", "n": "grid intervals", "H": "Hurst index in (1/2, 1)",
    "xi": "randomizer law: gaussian:SIGMA | uniform:A | laplace:BETA",
    "L_grid": "comma list of frequency scales L",
    "replicates": "Monte Carlo replicates M",
    "seed": "base seed; required for anything random",
    "out": "output file (default: standard output)",
    "records": "also write per-replicate records here (converge, rbias, refine)",
    "quad_nodes": "quadrature nodes over the randomizer law",
    "threads": "worker threads; never changes the output",
    "n_ladder": "comma list of grid sizes (bias, variance, refine)",
    "method": "randomized periodogram evaluation: kernel | quadrature | mc",
    "component": "which path to use: mixed | brownian | fbm",
    "mc_draws": "draws of xi per path for --method mc",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="flat 'key = value' file; flags override it")
    for key, flag in FLAGS.items():
        # Strings are parsed by ExperimentConfig so errors name the key.
        common.add_argument(flag, dest=key, default=None, metavar=key.upper(),
                            help=HELP[key])

    parser = argparse.ArgumentParser(
        prog="mixedqv",
        description="Randomized periodogram and realized quadratic variation "
                    "of mixed Brownian-fractional Brownian paths.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    sub.add_parser("simulate", parents=[common],
                   help="write one sample path as t,value rows")
    p = sub.add_parser("periodogram", parents=[common],
                       help="print the periodogram of one path at one frequency")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="frequency")
    p.add_argument("--input", metavar="PATH",
                   help="path CSV to read instead of simulating (no --seed needed)")
    p.add_argument("--form", choices=("ibp", "rs"), default="ibp",
                   help="integration by parts (default) or left-point sum")
    sub.add_parser("converge", parents=[common],
                   help="randomized periodogram across an L grid")
    sub.add_parser("bias", parents=[common],
                   help="realized QV bias against its closed form")
    sub.add_parser("variance", parents=[common],
                   help="realized QV variance against its closed forms")
    sub.add_parser("rbias", parents=[common],
                   help="randomized periodogram bias against its closed form")
    sub.add_parser("fubini", parents=[common],
                   help="discrete Fubini exchange check")
    sub.add_parser("refine", parents=[common],
                   help="realized QV over nested dyadic grids")
    return parser


def effective_config(args) -> ExperimentConfig:
    kind, defaults = SUBCOMMANDS[args.command]
    cfg = replace(ExperimentConfig(kind=kind), **defaults)
    if args.config:
        raw = load_config(args.config)
        if raw.get("kind", kind) != kind:
            raise ConfigError("kind", f"{raw['kind']!r} does not match subcommand {args.command!r}")
        cfg = ExperimentConfig.from_mapping(raw, cfg)
    flags = {k: getattr(args, k) for k in FLAGS if getattr(args, k) is not None}
    return ExperimentConfig.from_mapping(flags, cfg)


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    with fh:
        yield fh


def _simulate(cfg, out):
    grid = make_equidistant_grid(cfg.T, cfg.n)
    mixed, w, b = sample_mixed(grid, cfg.H, Seed(cfg.seed))
    path = {"mixed": mixed, "brownian": w, "fbm": b}[cfg.component]
    write_path_csv(path, out, cfg.header_lines())
    return 0


def _periodogram(cfg, args, out):
    if args.input:
        try:
            with open(args.input) as fh:
                path = read_path_csv(fh)
        except OSError as exc:
            raise OSError(f"cannot read {args.input}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"{args.input}: {exc}") from None
    else:
        if cfg.seed is None:
            raise ConfigError("seed", "required unless --input is given")
        grid = make_equidistant_grid(cfg.T, cfg.n)
        path = {"mixed": 0, "brownian": 1, "fbm": 2}[cfg.component]
        path = sample_mixed(grid, cfg.H, Seed(cfg.seed))[path]
    fn = periodogram if args.form == "ibp" else periodogram_rs
    out.write(f"{fn(path, args.lam):.17g}\n")
    return 0


def _write_records(cfg, records):
    if cfg.records is None:
        return
    with _output(cfg.records) as fh:
        write_records_csv(records, fh, cfg.header_lines())


def _experiment(cfg, out):
    header = cfg.header_lines()
    if cfg.kind == "convergence":
        records, summary = run_convergence(cfg)
        write_summary_csv(summary, out, header)
        _write_records(cfg, records)
        return 0
    if cfg.kind == "rqv_bias":
        write_moment_csv(run_rqv_bias(cfg), out, header)
        return 0
    if cfg.kind == "rqv_variance":
        write_moment_csv(run_rqv_variance(cfg), out, header)
        return 0
    if cfg.kind == "randomized_bias":
        reports, records = run_randomized_bias(cfg)
        write_moment_csv(reports, out, header)
        _write_records(cfg, records)
        return 0
    if cfg.kind == "fubini":
        res = run_fubini_check(cfg)
        write_records_csv(res.records, out,
                          header + ["quality = |I1 - I2| / (1 + |I1|)"])
        if not res.passed:
            base, rep = res.worst_seed
            print(f"fubini: deviation {res.max_deviation:.3e} at seed {base} "
                  f"replicate {rep}", file=sys.stderr)
            return 1
        return 0
    if cfg.kind == "refinement":
        records, summary = run_refinement(cfg)
        write_summary_csv(summary, out, header)
        _write_records(cfg, records)
        return 0
    raise ConfigError("kind", f"unsupported kind {cfg.kind!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = effective_config(args)
        if args.command == "periodogram" and args.input:
            cfg = replace(cfg, seed=cfg.seed if cfg.seed is not None else 0)
        cfg.validate()
        with _output(cfg.out) as out:
            if args.command == "simulate":
                return _simulate(cfg, out)
            if args.command == "periodogram":
                return _periodogram(cfg, args, out)
            return _experiment(cfg, out)
    except ConfigError as exc:
        print(f"mixedqv: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, UsageError) as exc:
        print(f"mixedqv: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, ValueError) as exc:
        # QuadratureError and FactorizationError are ArithmeticErrors.
        print(f"mixedqv: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
