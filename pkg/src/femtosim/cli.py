"""Command line entry point: ``femtosim sweep | run | plot``.

Exit status is 0 on success, 1 for usage errors and 2 for data errors
(bad scenario, unreadable or malformed files, protocol failures).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .engine import BaselineMode, Scenario, SweepSpec, SweepVariable, run, run_sweep
from .errors import FemtosimError
from .report import FIGURES, format_curve_csv, plot_csv
from .scenario import load_scenario, resolve_scenario_path

logger = logging.getLogger("femtosim")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

PROBABILITY_POINTS = tuple(i / 10 for i in range(11))
COUNT_POINTS = tuple(range(16))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(name) -> Scenario:
    if name is None:
        return Scenario()
    return load_scenario(resolve_scenario_path(name))


def sweep_spec_for(figure: str, scenario: Scenario, trials=None, seed=None) -> SweepSpec:
    kind = FIGURES[figure][0]
    settings = scenario.sweep
    if kind == "probability":
        variable, points = SweepVariable.ACTIVATION_PROBABILITY, PROBABILITY_POINTS
    else:
        variable, points = SweepVariable.ACTIVE_COUNT, COUNT_POINTS
    return SweepSpec(variable, points,
                     trials=settings.trials if trials is None else trials,
                     seed=settings.seed if seed is None else seed,
                     crn=settings.crn, subset=settings.subset)


def cmd_sweep(args) -> int:
    scenario = _load(args.scenario)
    spec = sweep_spec_for(args.figure, scenario, args.trials, args.seed)
    result = run_sweep(scenario, spec)
    text = format_curve_csv(result)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        logger.info("wrote %d rows to %s", len(result.points), args.output)
    return EXIT_OK


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    if args.mode is not None:
        scenario = scenario.with_mode(BaselineMode(args.mode))
    if not scenario.ues:
        raise FemtosimError("scenario has no UEs to simulate")
    result = run(scenario)
    text = result.log_text() + f"# {result.summary()}\n"
    if args.trace == "-":
        sys.stdout.write(text)
    else:
        Path(args.trace).write_text(text, encoding="utf-8")
        print(result.summary())
    return EXIT_OK


def cmd_plot(args) -> int:
    figure = plot_csv(args.csv, args.output, args.figure)
    logger.info("rendered %s to %s", figure, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="femtosim", description="On-demand femtocell activation simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="compute one figure's curve pair as CSV")
    s.add_argument("--scenario", help="scenario file or bundled name (default: all defaults)")
    s.add_argument("--figure", required=True, choices=sorted(FIGURES))
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output", required=True, help="CSV path, or - for stdout")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("run", help="run a scenario and write its transition log")
    r.add_argument("--scenario", required=True, help="scenario file or bundled name")
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=("proposed", "existing"),
                   help="override the scenario's scheme")
    r.add_argument("-o", "--trace", required=True, help="log path, or - for stdout")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("plot", help="render a sweep CSV as SVG")
    g.add_argument("--csv", required=True)
    g.add_argument("--figure", choices=sorted(FIGURES),
                   help="default: from the CSV file name, else from its sweep values")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (FemtosimError, OSError) as exc:
        print(f"femtosim: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
