"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 some jobs failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .data.csvio import CsvFormatError
from .data.dataset import SchemaError
from .data.synthetic import SyntheticSpec
from .pipeline import (
    ConfigError,
    generate_synthetic,
    ingest,
    load_config,
    pretrain_all,
    report_run,
    run_hpo,
    run_matrix,
    run_pseudofeature,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_JOB_FAILURES = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which would collide with the job-failure code
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    value = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--config", default=value(None), help="experiment configuration (JSON)")
    p.add_argument("--out", default=value(None), help="output directory")
    p.add_argument("--workers", type=int, default=value(1), help="parallel job processes")
    p.add_argument("--seed-offset", type=int, default=value(0), help="added to every seed in the configuration")
    p.add_argument("--resume", action="store_true", default=value(False), help="continue a run in --out")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tabtransfer", parents=[_global_flags(True)], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    local = [_global_flags(False)]
    gen = sub.add_parser("generate-synthetic", parents=local, help="write the synthetic benchmark files")
    gen.add_argument("--rows", type=int)
    gen.add_argument("--seed", type=int)
    sub.add_parser("ingest", parents=local, help="validate data, fix splits, write a summary")
    sub.add_parser("hpo", parents=local, help="random search per the 'hpo' section")
    sub.add_parser("pretrain", parents=local, help="pre-train every neural model on every task")
    run = sub.add_parser("run", parents=local, help="run the experiment matrix")
    run.add_argument("--max-jobs", type=int, help="stop after this many jobs (resume later)")
    sub.add_parser("pseudofeature", parents=local, help="missing / pseudo / true feature comparison")
    rep = sub.add_parser("report", parents=local, help="rank heatmap and AUC tables for a run in --out")
    rep.add_argument("--dest", help="report directory (default: OUT/report)")
    rep.add_argument("--alpha", type=float, default=0.05)
    return parser


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"{args.command} needs --{name}")


def _config(args):
    _require(args, "config", "out")
    return load_config(args.config).with_seed_offset(args.seed_offset)


def _synthetic_spec(args) -> tuple[SyntheticSpec, str]:
    spec, digest = SyntheticSpec(), ""
    if args.config is not None:
        cfg = load_config(args.config)
        if cfg.synthetic is None:
            raise ConfigError("generate-synthetic needs a 'data.synthetic' section")
        spec, digest = cfg.synthetic, cfg.hash
    overrides = {k: getattr(args, k) for k in ("rows", "seed") if getattr(args, k) is not None}
    if args.seed_offset:
        overrides["seed"] = overrides.get("seed", spec.seed) + args.seed_offset
    if overrides:
        spec, digest = replace(spec, **overrides), ""
    return spec, digest


def _dispatch(args) -> int:
    if args.command == "generate-synthetic":
        _require(args, "out")
        spec, digest = _synthetic_spec(args)
        manifest = generate_synthetic(spec, args.out, digest)
        print(f"wrote {spec.rows} rows to {args.out} (config {manifest['config_hash']}, seed {spec.seed})")
        return EXIT_OK
    if args.command == "report":
        _require(args, "out")
        report = report_run(args.out, args.dest, args.alpha)
        print(f"report for config {report.grid.config_hash}: {len(report.missing)} missing jobs")
        return EXIT_OK
    cfg = _config(args)
    if args.command == "ingest":
        summary = ingest(cfg, args.out)
        print(f"ingested {summary['rows']} rows, {len(summary['targets'])} targets (config {cfg.hash})")
    elif args.command == "hpo":
        best = run_hpo(cfg, args.out, args.resume)
        print(json.dumps({k: best[k] for k in ("best_value", "best_config")}, sort_keys=True))
    elif args.command == "pretrain":
        rows = pretrain_all(cfg, args.out, args.resume)
        print(f"{len(rows)} checkpoints ready (config {cfg.hash})")
    elif args.command == "run":
        summary = run_matrix(cfg, args.out, args.resume, args.workers, args.max_jobs)
        print(f"{summary.executed} jobs run, {summary.skipped} already done, {summary.failed} failed, "
              f"{summary.remaining} remaining (config {cfg.hash})")
        return summary.exit_code
    elif args.command == "pseudofeature":
        result = run_pseudofeature(cfg, args.out, args.resume)
        for n, means in result.mean_auc.items():
            print(f"n={n} " + " ".join(f"{arm}={auc:.3f}" for arm, auc in means.items()))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return _dispatch(args)
    except (UsageError, ConfigError, SchemaError, CsvFormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
