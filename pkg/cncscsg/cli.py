import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from cncscsg.core.config import settings
from cncscsg.core.exceptions import CncScsgError, ConfigError
from cncscsg.core.logging import setup_logging
from cncscsg.models.enums import IfoConvention, MethodKind, TerminationReason
from cncscsg.models.run_spec import RunSpec
from cncscsg.problems import generate_dataset, write_dataset_csv
from cncscsg.runner import build_problem, certify, is_failure, run_experiment, sweep, write_trace
from cncscsg.services.parameters import load_run_file, validate_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Unknown flags are configuration errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_seeds(text: str) -> List[int]:
    """`0..49` (inclusive), `1,4,9` or a single seed."""
    text = text.strip()
    if ".." in text:
        start, stop = text.split("..", 1)
        seeds = list(range(int(start), int(stop) + 1))
    else:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    if not seeds or min(seeds) < 0:
        raise ConfigError(f"invalid seed range '{text}'")
    return seeds


def parse_iterate(text: str) -> np.ndarray:
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        data = json.loads(path.read_text())
        if "x_final" not in data:
            raise ConfigError(f"{path} has no x_final field")
        return np.asarray(data["x_final"], dtype=np.float64)
    try:
        return np.asarray([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise ConfigError(f"iterate must be a .json summary or comma-separated numbers, got '{text}'")


def _load_spec(args) -> RunSpec:
    spec = load_run_file(args.config) if args.config else RunSpec()
    config_updates = {}
    if getattr(args, "epochs", None) is not None:
        config_updates["max_epochs"] = args.epochs
    if config_updates:
        spec = spec.model_copy(update={"config": spec.config.model_copy(update=config_updates)})
    return spec.with_overrides(
        method=getattr(args, "method", None),
        seed=getattr(args, "seed", None),
        probe_every=getattr(args, "probe_every", None),
        ifo_convention=getattr(args, "ifo_convention", None),
    )


def cmd_gen_data(args) -> int:
    data = generate_dataset(args.n, args.d, args.seed)
    write_dataset_csv(data, args.out)
    print(f"✓ Dataset written to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    spec = _load_spec(args)
    trace = run_experiment(spec)
    out = args.out or str(Path(settings.output_dir) / f"{spec.method.value}_seed{spec.seed}.csv")
    write_trace(trace, out)
    summary = trace.summary
    print(f"✓ {spec.method.value}: {summary.epochs} epochs, reason={summary.reason.value}, "
          f"ifo={summary.total_ifo}, |grad|={summary.final_grad_norm:.3e} -> {out}")
    return EXIT_RUNTIME if is_failure(trace) else EXIT_OK


def cmd_sweep(args) -> int:
    spec = _load_spec(args)
    out_dir = args.out or str(Path(settings.output_dir) / f"sweep_{spec.method.value}")
    summary = sweep(spec, parse_seeds(args.seeds), out_dir, workers=args.workers)
    print(json.dumps({k: v for k, v in summary.items() if k != "seeds"}, indent=2))
    return EXIT_RUNTIME if summary["reasons"].get(TerminationReason.DIVERGED.value) else EXIT_OK


def cmd_validate_config(args) -> int:
    spec = load_run_file(args.config)
    config = spec.config if spec.config.n is not None else spec.config.with_n(spec.problem.n)
    violations = validate_config(config, spec.constants)
    if not violations:
        print(f"✓ {args.config}: no violations ({config.mode.value} mode)")
        return EXIT_OK
    for violation in violations:
        print(f"✗ {violation}")
    return EXIT_CONFIG


def cmd_certify(args) -> int:
    spec = load_run_file(args.config) if args.config else RunSpec()
    problem = build_problem(spec.problem)
    eps_g = spec.config.resolved_eps_g if args.eps_g is None else args.eps_g
    eps_h = spec.config.resolved_eps_h if args.eps_h is None else args.eps_h
    report = certify(problem, parse_iterate(args.iterate), eps_g, eps_h, seed=spec.seed)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="cncscsg", description=settings.app_name)
    parser.add_argument("--log-level", default=None, help="Overrides CNCSCSG_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    gen = commands.add_parser("gen-data", help="Write a synthetic two-class dataset as CSV")
    gen.add_argument("--n", type=int, default=40)
    gen.add_argument("--d", type=int, default=4)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=cmd_gen_data)

    def run_flags(sub):
        sub.add_argument("config", nargs="?", default=None, help="Flat run file (key = value)")
        sub.add_argument("--method", type=MethodKind, choices=list(MethodKind), default=None)
        sub.add_argument("--epochs", type=int, default=None, help="Epoch budget (max_epochs)")
        sub.add_argument("--probe-every", type=int, default=None, help="Spectral probe interval, 0 = off")
        sub.add_argument("--ifo-convention", type=IfoConvention, choices=list(IfoConvention), default=None)
        sub.add_argument("--out", default=None)

    run = commands.add_parser("run", help="Run one experiment and write its trace")
    run_flags(run)
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(handler=cmd_run)

    sweep_cmd = commands.add_parser("sweep", help="Run a seed range and aggregate escape statistics")
    run_flags(sweep_cmd)
    sweep_cmd.add_argument("--seeds", default="0..49", help="Inclusive range such as 0..49")
    sweep_cmd.add_argument("--workers", type=int, default=None)
    sweep_cmd.set_defaults(handler=cmd_sweep)

    validate = commands.add_parser("validate-config", help="List violations of the parameter constraints")
    validate.add_argument("config")
    validate.set_defaults(handler=cmd_validate_config)

    cert = commands.add_parser("certify", help="Spectral report and second-order verdict at an iterate")
    cert.add_argument("config", nargs="?", default=None)
    cert.add_argument("--iterate", required=True, help="Summary .json (x_final) or comma-separated vector")
    cert.add_argument("--eps-g", type=float, default=None)
    cert.add_argument("--eps-h", type=float, default=None)
    cert.set_defaults(handler=cmd_certify)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        for violation in e.violations:
            print(f"✗ {violation}", file=sys.stderr)
        return EXIT_CONFIG
    except CncScsgError as e:
        logger.error(f"Run failed: {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return EXIT_RUNTIME


def main():
    sys.exit(cli_main())
