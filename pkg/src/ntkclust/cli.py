"""Command-line entry point.

    cluster run      --config cfg.txt [--features F] [--anchors A] [--labels L]
                     [--method m] [--k K] [--q q] [--tau t] [--mu m] [--lambda l]
                     [--seed s] [--out dir]
    cluster validate --config cfg.txt
    cluster metrics  --pred labels.txt --truth labels.txt

Flag names mirror config-file keys exactly; flags override file values.
The CLUSTER_THREADS environment variable caps worker threads.
"""

from __future__ import annotations

import argparse
import sys

from . import tensorio
from .metrics import evaluate
from .pipeline import (
    METHODS,
    PipelineConfig,
    PipelineError,
    load_config,
    run_pipeline,
    validate_config,
)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--features", help="NTKF feature file")
    parser.add_argument("--anchors", help="anchor-bank manifest")
    parser.add_argument("--labels", help="ground-truth label file")
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--k", type=int, help="cluster count")
    parser.add_argument("--q", type=int, help="mutual neighbor count")
    parser.add_argument("--tau", type=float, help="softmax/kernel temperature")
    parser.add_argument("--mu", type=float, help="reference-pull weight")
    parser.add_argument("--lambda", dest="lam", type=float, help="weight regularizer")
    parser.add_argument("--seed", type=int, help="k-means seed")
    parser.add_argument("--out", dest="out", help="output directory")


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        name: getattr(args, name)
        for name in ("features", "anchors", "labels", "method", "k", "q",
                     "tau", "mu", "lam", "seed", "out")
        if getattr(args, name, None) is not None
    }
    if args.config:
        return load_config(args.config, overrides)
    return PipelineConfig(**overrides)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cluster", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a clustering pipeline")
    _add_run_flags(run_p)

    val_p = sub.add_parser("validate", help="check a config without running it")
    val_p.add_argument("--config", required=True)

    met_p = sub.add_parser("metrics", help="score a prediction against ground truth")
    met_p.add_argument("--pred", required=True)
    met_p.add_argument("--truth", required=True)

    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except (OSError, ValueError) as exc:
            print(f"config: {exc}", file=sys.stderr)
            return 1
        problems = validate_config(cfg)
        for problem in problems:
            print(problem)
        if problems:
            return 1
        print("ok")
        return 0

    if args.command == "metrics":
        try:
            pred = tensorio.load_labels(args.pred)
            truth = tensorio.load_labels(args.truth)
            report = evaluate(pred, truth)
        except (OSError, ValueError) as exc:
            print(f"metrics: {exc}", file=sys.stderr)
            return 1
        print(report.to_kv(), end="")
        return 0

    # run
    try:
        cfg = _resolve_config(args)
    except (OSError, ValueError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 1
    try:
        result = run_pipeline(cfg)
    except PipelineError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if result.report is not None:
        print(result.report.to_kv(), end="")
    if result.output_dir is not None:
        print(f"artifacts written to {result.output_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
