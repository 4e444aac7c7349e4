"""Command line entry point: ``countfa fit | simulate | check``.

Exit codes: 0 success, 2 data validation failure, 3 configuration error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from . import __version__
from .errors import ConfigError, CountFAError, DataError
from .estimation import OptimizerConfig, fit_singleton
from .io import check_data, load_csv
from .report import build_report, render_text, to_json
from .search import forward_search
from .simulate import SimSpec, simulate, write_csv
from .types import FitResult, ModelFamily, Partition, parameter_count


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Optional[str] = None
    family: str = "p"
    trunc: Optional[int] = None
    output: str = "text"
    report_path: Optional[str] = None
    seed: int = 0
    threads: int = 1
    rel_tol: float = 1e-9
    max_iter: int = 500
    multistart: int = 3
    shift: int = 0
    allow_single: bool = False
    verbose: bool = False
    timing: bool = False

    def model_family(self) -> ModelFamily:
        try:
            return ModelFamily.from_code(self.family, self.trunc)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def optimizer(self) -> OptimizerConfig:
        try:
            return OptimizerConfig(self.rel_tol, self.max_iter, self.multistart, self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _call(cfg: RunConfig) -> dict:
    call = {"command": cfg.command, "family": cfg.family}
    if cfg.trunc is not None:
        call["A"] = cfg.trunc
    if cfg.shift:
        call["shift"] = cfg.shift
    return call


def run_fit(cfg: RunConfig) -> dict:
    """Validate, search and build the report dict. Raises ``CountFAError``."""
    family = cfg.model_family()
    opt = cfg.optimizer()
    if cfg.threads < 1:
        raise ConfigError("--threads must be >= 1")
    d = load_csv(cfg.input, shift=cfg.shift)
    if family.trunc is not None and int(d.values.max()) > family.trunc:
        raise DataError(f"data maximum {int(d.values.max())} exceeds truncation bound "
                        f"{family.trunc}")
    checks = check_data(d)
    trace = None
    if d.N < 2:
        if not cfg.allow_single:
            raise DataError("model search needs at least two variables "
                            "(use --allow-single to fit a lone column)")
        fit = fit_singleton(d.values[:, 0], family, opt, key=(0,))
        p = Partition.independence(1)
        result = FitResult(p, family, (fit,), fit.log_lik, parameter_count(p, family), d.n)
    else:
        result, trace = forward_search(d, family, opt, threads=cfg.threads)
    return build_report(result, d, call=_call(cfg), warnings=checks.warnings,
                        notes=checks.notes,
                        trace=trace if cfg.verbose or cfg.output == "json" else None,
                        include_timing=cfg.timing or cfg.output == "text")


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_fit(args) -> int:
    cfg = RunConfig(
        command="fit", input=args.input, family=args.family, trunc=args.trunc,
        output=args.output, report_path=args.report, seed=args.seed, threads=args.threads,
        rel_tol=args.rel_tol, max_iter=args.max_iter, multistart=args.multistart,
        shift=args.shift, allow_single=args.allow_single, verbose=args.verbose,
        timing=args.timing,
    )
    report = run_fit(cfg)
    _emit(to_json(report) if cfg.output == "json" else render_text(report), cfg.report_path)
    return 0


def _cmd_simulate(args) -> int:
    try:
        spec = SimSpec.from_json(args.spec)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad simulation spec: {exc}") from None
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    if args.seed is not None:
        spec = SimSpec(spec.partition, spec.family, spec.params, spec.n, args.seed, spec.names)
    d = simulate(spec)
    if args.csv:
        write_csv(d, args.csv)
    else:
        write_csv(d, sys.stdout)
    summary = (f"simulated {d.n} x {d.N} counts from a {spec.partition.display()} "
               f"{spec.family} model, seed {spec.seed}")
    print(summary, file=sys.stderr if not args.csv else sys.stdout)
    return 0


def _cmd_check(args) -> int:
    d = load_csv(args.input, shift=args.shift)
    checks = check_data(d)
    if args.output == "json":
        sys.stdout.write(json.dumps({"schema": 1, "n": d.n, "N": d.N, **checks.as_dict()},
                                    indent=2) + "\n")
        return 0
    print(f"{d.n} rows, {d.N} variables")
    for name in d.names:
        print(f"{name}: zero fraction {checks.zero_fraction[name]:.4f}, "
              f"max {checks.max_value[name]}")
    for w in checks.warnings:
        print(f"Warning: {w}")
    for note in checks.notes:
        print(f"Note: {note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="countfa", description="Discrete factor analysis for count data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="forward model search for one family")
    fit.add_argument("--input", required=True, help="CSV with a header row of names")
    fit.add_argument("--family", required=True, choices=ModelFamily.CODES)
    fit.add_argument("--trunc", type=int, help="truncation bound A (only for *t families)")
    fit.add_argument("--output", choices=("text", "json"), default="text")
    fit.add_argument("--report", help="write the report here instead of stdout")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--threads", type=int, default=1)
    fit.add_argument("--rel-tol", type=float, default=1e-9)
    fit.add_argument("--max-iter", type=int, default=500)
    fit.add_argument("--multistart", type=int, default=3)
    fit.add_argument("--shift", type=int, default=0, help="subtract k from every cell")
    fit.add_argument("--allow-single", action="store_true")
    fit.add_argument("--verbose", action="store_true",
                     help="include the search trace in text output")
    fit.add_argument("--timing", action="store_true", help="include wall time in JSON")
    fit.set_defaults(handler=_cmd_fit)

    sim = sub.add_parser("simulate", help="draw a dataset from a JSON SimSpec")
    sim.add_argument("--spec", required=True)
    sim.add_argument("--csv", help="output path (default stdout)")
    sim.add_argument("--seed", type=int, help="override the spec's seed")
    sim.set_defaults(handler=_cmd_simulate)

    chk = sub.add_parser("check", help="validate a CSV and report data warnings")
    chk.add_argument("--input", required=True)
    chk.add_argument("--shift", type=int, default=0)
    chk.add_argument("--output", choices=("text", "json"), default="text")
    chk.set_defaults(handler=_cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CountFAError as exc:
        print(f"countfa: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
