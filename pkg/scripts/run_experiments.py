#!/usr/bin/env python3
"""Run every experiment config in scripts/configs through the CLI.

    python scripts/run_experiments.py --seed 42 --out-dir results [--threads 4]

Writes ``<name>.csv`` (and ``<name>.records.csv`` where per-replicate
records exist) for each config.
"""

import argparse
import pathlib
import sys
import time

from mixedqv.cli import main as cli_main

HERE = pathlib.Path(__file__).resolve().parent
SUBCOMMAND = {
    "convergence": "converge",
    "rqv_bias": "bias",
    "rqv_variance": "variance",
    "randomized_bias": "rbias",
    "fubini": "fubini",
    "refinement": "refine",
}
WITH_RECORDS = {"convergence", "randomized_bias", "refinement"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=sorted(SUBCOMMAND),
                    help="run a subset of the configs")
    args = ap.parse_args(argv)

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in args.only or SUBCOMMAND:
        cfg = HERE / "configs" / f"{name}.cfg"
        cmd = [SUBCOMMAND[name], "--config", str(cfg), "--seed", str(args.seed),
               "--threads", str(args.threads), "--out", str(out / f"{name}.csv")]
        if name in WITH_RECORDS:
            cmd += ["--records", str(out / f"{name}.records.csv")]
        t0 = time.perf_counter()
        code = cli_main(cmd)
        print(f"{name:16s} exit {code}  {time.perf_counter() - t0:6.1f}s")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
