"""
Command line entry point for perctrunc

    perctrunc analyze --seq remark-p --horizon 59049
    perctrunc simulate oriented --seq invsqrt --K 8 --H 100 --trials 10000 --seed 1
    perctrunc aniso thm2 --seq const:p=0.5 --delta 0.5 --N 1 --epsilon 0.3 --box 8 --trials 500
    perctrunc sweep --operation simulate-oriented --axis K --values 2,8,32,128 --seq invsqrt --H 100
    perctrunc plot sweep.csv sweep.svg

Exit codes: 0 success, 2 validation, 3 unsatisfiable parameters, 4 I/O,
1 anything else.
"""
import argparse
import sys
from typing import Any, Dict, List, Optional

import structlog
from pydantic import ValidationError

from config import get_settings
from errors import DomainError, PercTruncError, ResultFileError, UnsatisfiableParameters
from harness import Operation, emit_plot, load_config, run, write_csv
from logging_config import setup_logging
from metrics import write_metrics

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_UNSATISFIABLE = 3
EXIT_IO = 4


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def _add(parser: argparse.ArgumentParser, *flags: str, **kwargs):
    # unset flags stay out of the namespace so config-file values survive
    kwargs.setdefault("default", argparse.SUPPRESS)
    parser.add_argument(*flags, **kwargs)


def _common() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    _add(parent, "--config", dest="config_file", help="YAML experiment file; flags override its values")
    _add(parent, "--seq", help="Sequence spec, e.g. const:p=0.5, powlaw:c=1,alpha=0.5, invsqrt, remark-p")
    _add(parent, "--trials", type=int)
    _add(parent, "--seed", type=int)
    _add(parent, "--horizon", type=int)
    _add(parent, "--workers", type=int, help="Worker processes (default PERCTRUNC_THREADS)")
    _add(parent, "--output", help="Write the JSON record here instead of stdout")
    _add(parent, "--csv", help="Write sweep rows as CSV")
    return parent


def _experiment_flags(parser: argparse.ArgumentParser):
    _add(parser, "--K", type=int, help="Truncation range")
    _add(parser, "--H", type=int, help="Target level for oriented survival")
    _add(parser, "--d", type=int)
    _add(parser, "--epsilon", type=float)
    _add(parser, "--delta", type=float, help="Vertical bond probability")
    _add(parser, "--N", type=int, help="Shift for red bonds")
    _add(parser, "--eta", type=float)
    _add(parser, "--threshold", type=float)
    _add(parser, "--window", type=int)
    _add(parser, "--box", type=int)
    _add(parser, "--height", type=int, help="Target height; for simulate oriented the same as --H")
    _add(parser, "--l", type=int)
    _add(parser, "--L", type=int)
    _add(parser, "--pv", type=float)
    _add(parser, "--ph", type=float)
    _add(parser, "--n", type=int)
    _add(parser, "--steps", type=int, help="Exploration visits per run")
    _add(parser, "--max-shift", dest="max_shift", type=int)
    _add(parser, "--layout", choices=["separated", "printed"])
    _add(parser, "--gammas", type=_floats)
    _add(parser, "--verify", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perctrunc", description="Truncation experiments for long-range percolation")
    parser.add_argument("--log-level", default=None, help="Override PERCTRUNC_LOG_LEVEL")
    parser.add_argument("--json-logs", action="store_true", help="Emit JSON log records")
    parser.add_argument("--metrics-out", default=None, help="Write Prometheus metrics to this textfile")
    common = _common()
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(subparsers, name: str, operation: Operation, help_text: str):
        p = subparsers.add_parser(name, parents=[common], help=help_text)
        _experiment_flags(p)
        p.set_defaults(operation=operation.value)
        return p

    experiment(sub, "analyze", Operation.ANALYZE, "Sequence diagnostics")
    simulate = sub.add_parser("simulate", help="Monte Carlo survival").add_subparsers(dest="model", required=True)
    experiment(simulate, "oriented", Operation.SIMULATE_ORIENTED, "Oriented survival to level H")
    experiment(sub, "block-params", Operation.BLOCK_PARAMS, "Block parameters (k, M, K) for a given epsilon")
    experiment(sub, "explore", Operation.EXPLORE, "Survival of the renormalized exploration")
    aniso = sub.add_parser("aniso", help="Couplings on the anisotropic lattice").add_subparsers(dest="variant",
                                                                                              required=True)
    experiment(aniso, "thm2", Operation.THM2, "Red-bond coupling check")
    experiment(aniso, "thm3", Operation.THM3, "Red-site exploration and coupling check")
    experiment(sub, "kw", Operation.KW, "Connection of 0..l inside 0..L on the long-range line")
    experiment(sub, "kesten", Operation.KESTEN, "Box crossing in nearest-neighbour anisotropic percolation")
    experiment(sub, "site-threshold", Operation.SITE_THRESHOLD, "Oriented site percolation threshold estimate")

    sweep = sub.add_parser("sweep", parents=[common], help="Repeat an experiment along one axis")
    _experiment_flags(sweep)
    _add(sweep, "--operation", choices=[op.value for op in Operation])
    _add(sweep, "--axis")
    _add(sweep, "--values", type=_floats)

    plot = sub.add_parser("plot", help="SVG chart from a sweep CSV")
    plot.add_argument("csv_path")
    plot.add_argument("svg_path")
    return parser


_GLOBAL_KEYS = {"command", "model", "variant", "config_file", "log_level", "json_logs", "metrics_out",
                "csv_path", "svg_path", "axis", "values"}


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    data = {k: v for k, v in vars(args).items() if k not in _GLOBAL_KEYS}
    sweep = {}
    if hasattr(args, "axis"):
        sweep["axis"] = args.axis
    if hasattr(args, "values"):
        sweep["values"] = args.values
    if sweep:
        data["sweep"] = sweep
    return data


def _execute(args: argparse.Namespace) -> int:
    if args.command == "plot":
        path = emit_plot(args.csv_path, args.svg_path)
        print(path)
        return EXIT_OK

    config = load_config(getattr(args, "config_file", None), _overrides(args))
    if args.command == "sweep" and config.sweep is None:
        raise DomainError("sweep needs --axis and --values (or a sweep section in the config file)")

    record = run(config)
    if config.output:
        record.write(config.output)
        print(config.output)
    else:
        print(record.to_json())
    if config.csv and record.rows:
        write_csv(record.rows, config.csv)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ValidationError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    setup_logging(args.log_level or settings.log_level, settings.log_file, args.json_logs or settings.json_logging)

    try:
        code = _execute(args)
    except (ValidationError, DomainError) as e:
        code = EXIT_VALIDATION
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
    except UnsatisfiableParameters as e:
        code = EXIT_UNSATISFIABLE
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
    except (OSError, ResultFileError) as e:
        code = EXIT_IO
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
    except PercTruncError as e:
        code = e.exit_code
        logger.exception("command_failed", command=args.command)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)

    metrics_out = args.metrics_out or settings.metrics_file
    if metrics_out:
        write_metrics(metrics_out)
    return code


if __name__ == "__main__":
    sys.exit(main())
