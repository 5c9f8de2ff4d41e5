"""Command line: ``ikc run`` executes an experiment, ``ikc report`` rebuilds statistics."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import EXPERIMENTS, load_config
from .runner import build_report, format_failures, run_experiment


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ikc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write its result bundle")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    run.add_argument("--config", type=Path, help="TOML file mirroring ExperimentConfig fields")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--external-preds", help="CSV of row_id,p1; '{seed}' is replaced per seed")
    run.add_argument("--n-seeds", type=int)
    run.add_argument("--budget", type=int, help="HPO trials per model")
    run.add_argument("--workers", type=int)
    run.add_argument("--data", nargs="+", help="data files (overrides data_paths)")
    run.add_argument("--dataset", help="xor, adult, bank or matrix (overrides the config)")

    rep = sub.add_parser("report", help="recompute paired_report.csv and figure data from a bundle")
    rep.add_argument("--in", dest="bundle", type=Path, required=True)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "report":
        rows = build_report(args.bundle)
        print(f"wrote {len(rows)} rows to {args.bundle / 'paired_report.csv'}")
        return 0

    cfg = load_config(args.config, args.experiment)
    overrides = {}
    if args.external_preds:
        overrides["external_preds"] = args.external_preds
    if args.n_seeds:
        overrides["n_seeds"] = args.n_seeds
    if args.workers:
        overrides["workers"] = args.workers
    if args.data:
        overrides["data_paths"] = tuple(args.data)
    if args.dataset:
        overrides["dataset"] = args.dataset
    if args.budget:
        overrides["hpo"] = cfg.hpo.__class__(**{**cfg.hpo.__dict__, "budget": args.budget})
    cfg = cfg.with_(output_dir=str(args.out), **overrides)
    out = run_experiment(cfg, args.out)
    problems = format_failures(out)
    print(f"results in {out}")
    if problems:
        print("some cells failed:\n" + problems, file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
