# -*- coding: utf-8 -*-
"""Command line: ``pyoffload {gen,calibrate,simulate,sweep}``.

Exit statuses: 0 on success, 1 for usage, configuration and file-system
errors, 2 for invalid data.
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, NoReturn, Optional, Sequence

from pyoffload import DEFAULT_BATCH_SIZE, experiment
from pyoffload.calibration import ReliabilityBin
from pyoffload.config import ExperimentConfig, load_config
from pyoffload.error import DataError, Error, ProgrammingError
from pyoffload.formatter import CsvFormatter, JsonFormatter
from pyoffload.metrics import ExperimentReport
from pyoffload.syngen.generator import generate, generator_from_dict
from pyoffload.trace import write_trace
from pyoffload.util import atomic_write, derive_seed

_logger = logging.getLogger(__name__)  # type: ignore

EXIT_OK: int = 0
EXIT_USAGE: int = 1
EXIT_DATA: int = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise ProgrammingError(f"{self.prog}: {message}")


def _floats(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers: {value}"
        ) from e


def _branch(value: str) -> Dict[str, float]:
    parts = _floats(value)
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"expected b,sigma[,s]: {value}")
    branch = {"b": parts[0], "sigma": parts[1]}
    if len(parts) == 3:
        branch["s"] = parts[2]
    return branch


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="experiment config (.toml or .json)")
    parser.add_argument("--seed", type=int, help="top-level seed (default 0)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _add_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trace", help="JSONL logit trace")
    parser.add_argument("--scenario", help="generate a named demo scenario instead")
    parser.add_argument("--validation-fraction", type=float)
    parser.add_argument("--p-tar", type=float, help="target confidence")
    parser.add_argument(
        "--confidence-rule", choices=("max-probability", "entropy"), default=None
    )
    parser.add_argument("--entropy-threshold", type=float)
    parser.add_argument("--device-exit-count", type=int)
    parser.add_argument(
        "--branch-restricted",
        action="store_true",
        default=None,
        help="calibrate each exit only on the samples that exit there",
    )
    parser.add_argument("--max-workers", type=int)


def _add_evaluation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--profile", help="latency profile (.toml or .json)")
    parser.add_argument(
        "--temperatures", type=_floats, help="comma-separated, one per exit"
    )
    parser.add_argument("--calibration", help="JSON file written by `calibrate`")
    parser.add_argument(
        "--no-calibrate",
        dest="calibrate",
        action="store_false",
        default=None,
        help="skip fitting temperatures when none are given",
    )
    parser.add_argument("--batch-size", type=int, help=f"default {DEFAULT_BATCH_SIZE}")
    parser.add_argument("--drop-partial-batch", action="store_true", default=None)
    parser.add_argument("--aggregation", choices=("mean", "sum"))
    parser.add_argument("--accuracy-scope", choices=("total", "device"))
    parser.add_argument("-o", "--output", help="report CSV")
    parser.add_argument("--json-output", help="report JSON with per-batch detail")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="pyoffload", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    gen = subparsers.add_parser("gen", help="write a synthetic trace")
    _add_common(gen)
    gen.add_argument("--mode", choices=("oracle", "cascade"))
    gen.add_argument("--scenario", help="named cascade scenario")
    gen.add_argument("--k", type=int, help="number of classes")
    gen.add_argument("--n", type=int, help="number of samples")
    gen.add_argument("--s", type=float, help="miscalibration scale (oracle mode)")
    gen.add_argument("--alpha", type=float, help="Dirichlet concentration")
    gen.add_argument(
        "--branch",
        type=_branch,
        action="append",
        help="b,sigma[,s] of one cascade exit, shallowest first",
    )
    gen.add_argument("-o", "--output", required=True)

    calibrate = subparsers.add_parser("calibrate", help="fit one temperature per exit")
    _add_common(calibrate)
    _add_source(calibrate)
    calibrate.add_argument("-o", "--output", required=True, help="calibration JSON")

    simulate = subparsers.add_parser("simulate", help="evaluate one target confidence")
    _add_common(simulate)
    _add_source(simulate)
    _add_evaluation(simulate)
    simulate.add_argument("--t-tar", type=float, help="deadline in seconds")
    simulate.add_argument("--decisions-output", help="per-sample decisions CSV")
    simulate.add_argument("--reliability-output", help="on-device reliability CSV")

    sweep = subparsers.add_parser("sweep", help="evaluate a p_tar x t_tar grid")
    _add_common(sweep)
    _add_source(sweep)
    _add_evaluation(sweep)
    sweep.add_argument("--p-tar-grid", type=_floats)
    sweep.add_argument("--t-tar-grid", type=_floats)
    return parser


_CONFIG_FLAGS: Sequence[str] = (
    "trace",
    "profile",
    "p_tar",
    "p_tar_grid",
    "t_tar",
    "t_tar_grid",
    "temperatures",
    "calibrate",
    "calibration",
    "confidence_rule",
    "entropy_threshold",
    "device_exit_count",
    "batch_size",
    "validation_fraction",
    "seed",
    "drop_partial_batch",
    "aggregation",
    "accuracy_scope",
    "branch_restricted",
    "max_workers",
    "output",
    "json_output",
    "decisions_output",
    "reliability_output",
)


def _config(args: argparse.Namespace) -> ExperimentConfig:
    overrides: Dict[str, Any] = {
        key: getattr(args, key) for key in _CONFIG_FLAGS if hasattr(args, key)
    }
    if getattr(args, "scenario", None):
        overrides["generator"] = {"scenario": args.scenario}
    if args.config:
        return load_config(args.config, **overrides)
    values = {k: v for k, v in overrides.items() if v is not None}
    return ExperimentConfig.from_dict(values)


def _gen_table(args: argparse.Namespace) -> Dict[str, Any]:
    table: Dict[str, Any] = {}
    if args.config:
        generator = load_config(args.config).generator
        if generator is None:
            raise ProgrammingError("The config has no `generator` table.")
        table.update(generator)
    if args.scenario:
        table = {"mode": "cascade", "scenario": args.scenario}
        if args.n is not None:
            table["n"] = args.n
        return table
    flags = {
        "mode": args.mode,
        "k": args.k,
        "n": args.n,
        "alpha": args.alpha,
        "s": args.s,
        "branches": args.branch,
    }
    table.update({k: v for k, v in flags.items() if v is not None})
    return table


def cmd_gen(args: argparse.Namespace) -> int:
    seed = args.seed
    if seed is None:
        seed = load_config(args.config).seed if args.config else 0
    cfg = generator_from_dict(_gen_table(args), derive_seed(seed, "generate"))
    dataset = generate(cfg)
    write_trace(args.output, dataset)
    meta = dataset.metadata
    print(
        f"gen: wrote {args.output} (n={len(dataset)}, k={dataset.num_classes}, "
        f"b={dataset.num_exits}, mode={meta['mode']}, seed={seed})"
    )
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = _config(args)
    results = experiment(config).calibrate()
    atomic_write(args.output, JsonFormatter().format(results))
    temperatures = ", ".join(f"{r.temperature:.4f}" for r in results)
    print(f"calibrate: wrote {args.output} (T = {temperatures})")
    return EXIT_OK


def _write_reports(config: ExperimentConfig, reports: List[ExperimentReport]) -> None:
    if config.output:
        atomic_write(config.output, CsvFormatter().format(reports, ExperimentReport))
    if config.json_output:
        atomic_write(config.json_output, JsonFormatter().format(reports))


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config(args)
    result = experiment(config).simulate()
    _write_reports(config, result.reports)
    if config.decisions_output:
        atomic_write(config.decisions_output, CsvFormatter().format(result.decisions))
    if config.reliability_output:
        bins = result.reliability.bins if result.reliability else []
        atomic_write(
            config.reliability_output, CsvFormatter().format(bins, ReliabilityBin)
        )
    summary = "; ".join(
        f"{'calibrated' if r.calibrated else 'conventional'}: "
        f"device_prob={_fmt(r.device_classification_probability)} "
        f"device_acc={_fmt(r.device_accuracy)} total_acc={_fmt(r.total_accuracy)} "
        f"outage={_fmt(r.outage_probability)} "
        f"missed={_fmt(r.missed_deadline_probability)}"
        for r in result.reports
    )
    print(f"simulate: p_tar={result.reports[0].p_tar:g} {summary}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config(args)
    reports = experiment(config).sweep()
    _write_reports(config, reports)
    print(f"sweep: {len(reports)} grid points")
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "calibrate": cmd_calibrate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise ProgrammingError("pyoffload: a command is required.")
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            stream=sys.stderr,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        return _COMMANDS[args.command](args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Error as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
