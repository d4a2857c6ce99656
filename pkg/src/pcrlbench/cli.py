"""Command-line entry point.

Subcommands mirror the three pipeline stages plus a chained run:

    pcrlbench bound    --model benchmark-eq13 --mc-runs 500 --horizon 300
    pcrlbench identify --out runs/bench
    pcrlbench analyze  --out runs/bench
    pcrlbench all      --config bench.yaml --seed 42
    pcrlbench list-models

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import sys

from pcrlbench.config import OUTPUT_ROOT_ENV, load_config
from pcrlbench.models import ConfigurationError, DegeneracyError, ModelEvaluationError, NumericalError
from pcrlbench.pipeline import stage_all, stage_analyze, stage_bound, stage_identify
from pcrlbench.registry import available_models

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_STAGES = {
    "bound": stage_bound,
    "identify": stage_identify,
    "analyze": stage_analyze,
    "all": stage_all,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML/JSON config file")
    parser.add_argument("--model", help="registered model name")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="process count for per-run work")
    parser.add_argument("--out", help=f"output directory (default under ${OUTPUT_ROOT_ENV} or ./runs)")
    parser.add_argument("--particles", type=int, help="particle count for the identifier")
    parser.add_argument("--mc-runs", type=int, dest="mc_runs", help="Monte-Carlo trajectory/run count")
    parser.add_argument("--horizon", type=int, help="time horizon T")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcrlbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bound", "simulate the ensemble and compute the parameter bound"),
        ("identify", "run the particle identifier over every measurement record"),
        ("analyze", "compute MSE, biases, and the classification verdict"),
        ("all", "run bound, identify, analyze in sequence"),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    sub.add_parser("list-models", help="list registered models")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-models":
        for name, desc in sorted(available_models().items()):
            print(f"{name}: {desc}")
        return EXIT_OK

    overrides = {
        key: getattr(args, key)
        for key in ("model", "seed", "workers", "particles", "mc_runs", "horizon")
        if getattr(args, key) is not None
    }
    if args.out is not None:
        overrides["out_dir"] = args.out
    try:
        cfg = load_config(args.config, overrides)
        out_dir = cfg.resolved_out_dir()
        files = _STAGES[args.command](cfg, out_dir)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DegeneracyError, ModelEvaluationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, FileNotFoundError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
