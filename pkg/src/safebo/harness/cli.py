"""Command line: ``python -m safebo {generate,run,report,bound-check}``.

Exit codes: 0 on success, 2 on a configuration error, 3 when an algorithm
whose safety must hold unconditionally (LoSBO, LoS-GP-UCB, safety-constrained
random search under bounded noise within ``E``) queried an unsafe input.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np
import yaml

from ..kernels import Domain, Kernel
from ..rkhs import RKHSSamplingError, sample_pre_rkhs, sample_se_onb, save_function
from .bound_check import BoundCheckConfig, heuristic_bound_violation_experiment
from .campaign import (
    SUMMARY_COLUMNS,
    read_steps_csv,
    run_campaign,
    summarize,
    write_outputs,
    write_summary_csv,
)
from .config import ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SAFETY = 3


def _print_summary(rows, out=sys.stdout):
    head = "  ".join(f"{c:>14}" for c in SUMMARY_COLUMNS)
    print(head, file=out)
    for row in rows:
        cells = []
        for c in SUMMARY_COLUMNS:
            v = row[c]
            cells.append(f"{v:>14.4f}" if isinstance(v, float) else f"{str(v):>14}")
        print("  ".join(cells), file=out)


def cmd_generate(args):
    domain = Domain(tuple(args.lower), tuple(args.upper))
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0, i, 0]))
        if args.kind == "se_onb":
            f = sample_se_onb(args.length_scale, domain, args.num_terms, args.norm, rng)
        else:
            kernel = Kernel(args.family, args.length_scale, 1.0)
            f = sample_pre_rkhs(kernel, domain, args.num_centers, args.norm, rng)
        path = os.path.join(args.out, f"function_{i:03d}.txt")
        save_function(f, path)
        print(path)
    return EXIT_OK


def cmd_run(args):
    cfg = load_config(args.config)
    if args.repetitions is not None:
        cfg.repetitions = args.repetitions
    out_dir = args.out or cfg.output_dir or "results"
    result = run_campaign(cfg, workers=args.workers)
    steps, summary = write_outputs(result, out_dir)
    _print_summary(result.summary)
    failed = [r for r in result.records if r.failed]
    for r in failed:
        print(f"failed run function={r.function_id} rep={r.rep} algorithm={r.algorithm} "
              f"seed={r.seed}: {r.error}", file=sys.stderr)
    print(f"wrote {steps} and {summary}")
    forbidden = result.violations_where_forbidden()
    if forbidden:
        print(f"SAFETY: {forbidden} unsafe queries by algorithms that must never violate safety",
              file=sys.stderr)
        return EXIT_SAFETY
    return EXIT_OK


def cmd_report(args):
    records = []
    for path in args.steps:
        with open(path, newline="") as fh:
            records.extend(read_steps_csv(fh))
    rows = summarize(records)
    _print_summary(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_summary_csv(rows, fh)
    return EXIT_OK


def cmd_bound_check(args):
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: expected a mapping")
    for key in ("num_functions", "num_datasets", "beta", "seed", "grid_size"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    try:
        cfg = BoundCheckConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    result = heuristic_bound_violation_experiment(cfg)
    counts = result.per_function_counts
    print(f"data sets with a bound violation: {result.mean_count:.2f} +- {result.sd_count:.2f} "
          f"per function (of {cfg.num_datasets}); fraction {result.fraction:.4f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["function_id", "datasets", "violations"])
            for fid, c in enumerate(counts):
                w.writerow([fid, cfg.num_datasets, int(c)])
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="safebo", description="Safe Bayesian optimization experiments")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample target functions and save them to files")
    g.add_argument("--kind", choices=["se_onb", "pre_rkhs"], default="se_onb")
    g.add_argument("--family", default="se")
    g.add_argument("--length-scale", type=float, default=0.2 / np.sqrt(2.0))
    g.add_argument("--norm", type=float, default=10.0)
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--num-terms", type=int, default=40)
    g.add_argument("--num-centers", type=int, default=None)
    g.add_argument("--lower", type=float, nargs="+", default=[-2.0])
    g.add_argument("--upper", type=float, nargs="+", default=[2.0])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run a campaign from a YAML config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: config output_dir or ./results)")
    r.add_argument("--repetitions", type=int, default=None)
    r.add_argument("--workers", type=int, default=None, help="overrides SAFEBO_WORKERS")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="summarize per-step CSV files")
    rep.add_argument("steps", nargs="+")
    rep.add_argument("--out", help="write the summary table as CSV")
    rep.set_defaults(func=cmd_report)

    b = sub.add_parser("bound-check", help="coverage of the heuristic beta band")
    b.add_argument("--config")
    b.add_argument("--num-functions", type=int)
    b.add_argument("--num-datasets", type=int)
    b.add_argument("--beta", type=float)
    b.add_argument("--grid-size", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bound_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, yaml.YAMLError, FileNotFoundError, RKHSSamplingError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # parameter validation in the library (kernel, bound, noise specs)
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
