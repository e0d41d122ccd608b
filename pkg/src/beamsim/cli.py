"""Command-line entry point: ``beamsim {build-prior,run,patterns,report}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .codebook import ArrayGeometry, build_dft_codebook, export_patterns_csv
from .experiment import (
    ConfigError,
    build_prior_database,
    load_config,
    read_metrics,
    run_experiment,
    summarize,
    write_outputs,
)
from .prior import PriorDatabase

log = logging.getLogger("beamsim")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed {value} is not an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default", help="YAML config path or 'default'")
    common.add_argument("--seed", type=_u64, help="master seed")
    common.add_argument("--snapshots", type=_positive, help="number of traffic snapshots")
    common.add_argument("--array", type=_positive, action="append",
                        help="array size N (N x N); repeat for several")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=_positive, help="worker processes")

    parser = argparse.ArgumentParser(prog="beamsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build-prior", parents=[common], help="write the prior database")
    run = sub.add_parser("run", parents=[common], help="run the Monte Carlo experiment")
    run.add_argument("--prior", help="prebuilt prior database (JSON)")
    pat = sub.add_parser("patterns", parents=[common], help="export beam-pattern CSVs")
    pat.add_argument("--step", type=float, default=2.0, help="angular grid step in degrees")
    rep = sub.add_parser("report", parents=[common], help="summarize a metrics.csv")
    rep.add_argument("metrics", help="path to a metrics.csv file")
    return parser


def _configure(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.snapshots is not None:
        overrides["snapshots"] = args.snapshots
    if args.array:
        overrides["array_sizes"] = tuple(args.array)
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    return replace(cfg, **overrides) if overrides else cfg


def _output_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def _cmd_build_prior(cfg) -> int:
    out = _output_dir(cfg.output_dir)
    db = build_prior_database(cfg)
    path = db.save(out / "prior.json")
    print(f"wrote {path} ({len(db.cells)} cells, arrays {sorted(db.candidates)})")
    return 0


def _cmd_run(cfg, prior_path: str | None) -> int:
    out = _output_dir(cfg.output_dir)
    db = PriorDatabase.load(prior_path) if prior_path else None
    result = run_experiment(cfg, db)
    write_outputs(result, out)
    print((out / "summary.txt").read_text(), end="")
    return 0


def _cmd_patterns(cfg, step: float) -> int:
    out = _output_dir(cfg.output_dir)
    for n in cfg.array_sizes:
        geom = ArrayGeometry.square(n, element_spacing=cfg.element_spacing,
                                    carrier_frequency=cfg.propagation.carrier_frequency)
        path = export_patterns_csv(build_dft_codebook(geom), out / f"patterns_n{n}.csv", step=step)
        print(f"wrote {path}")
    return 0


def _cmd_report(path: str) -> int:
    try:
        rows = read_metrics(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} holds no rows")
    for key, value in summarize(rows).items():
        print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    return 0


def _log_level() -> int:
    name = os.environ.get("BEAMSIM_LOG", "WARNING").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING


def main(argv=None) -> int:
    logging.basicConfig(level=_log_level(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return _cmd_report(args.metrics)
        cfg = _configure(args)
        if args.command == "build-prior":
            return _cmd_build_prior(cfg)
        if args.command == "run":
            return _cmd_run(cfg, args.prior)
        return _cmd_patterns(cfg, args.step)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"beamsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
