"""Command-line front end.

Subcommands: ``generate`` (scenario CSVs), ``select`` (one-shot selection on
a CSV, risk table to stdout), ``simulate`` (mean-squared-error curves),
``coverage`` (realised interval coverage), ``theory-check`` (asymptotic
property checks), ``plot`` (SVG from a result CSV).

Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.  All
randomness is controlled by ``--seed``; numeric output is a pure function of
flags, seed and input files, and is byte-identical for any ``--workers``
value.

Each subcommand also accepts ``--config FILE`` with flat ``key = value``
lines using the flag names (without the leading dashes); explicit flags win
over config values.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import astuple

import numpy as np

from ._rng import stream
from .dgp import ScenarioConfig, generate
from .estimators import scenario_family
from .experiments import (
    McConfig,
    Method,
    check_criterion_bias,
    check_gaussian_lemma,
    check_selection_consistency,
    check_variance_ordering,
    coverage_eval,
    mse_curve,
    SyntheticLinearConfig,
)
from .plotting import PlotSpec, render_plot
from .samples import Scenario, read_sample_csv, write_sample_csv
from .selection import RISK_TABLE_COLUMNS, risk_table_rows
from .selector import TargetedSelector

MC_COLUMNS = ("scenario", "s", "method", "metric", "value", "mc_se", "runs", "seed")
FAILURE_COLUMNS = ("scenario", "s", "run", "failure_kind", "redraws")
REPLICATE_COLUMNS = ("b", "g", "estimate")

_THEORY_DEFAULT_RUNS = {"bias": 10_000, "variance": 10_000, "lemma": 1_000_000, "consistency": 2_000}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(rows, path, header) -> None:
    """Write CSV with deterministic bytes; floats use shortest round-trip form."""
    lines = [",".join(header)]
    lines.extend(",".join(_format_cell(cell) for cell in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _write_outcome(outcome, out_path) -> None:
    write_rows([astuple(r) for r in outcome.rows], out_path, MC_COLUMNS)
    if outcome.failures:
        write_rows(
            [astuple(f) for f in outcome.failures],
            f"{out_path}.failures.csv",
            FAILURE_COLUMNS,
        )


def _parse_grid(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_methods(text: str) -> tuple[Method, ...]:
    lookup = {m.value: m for m in Method}
    methods = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok not in lookup:
            raise UsageError(f"unknown method {tok!r} (expected targeted, cv, baseline)")
        methods.append(lookup[tok])
    return tuple(methods)


# -- argument plumbing ---------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", default=None, help="flat key = value file")


def _add_experiment_flags(parser):
    parser.add_argument("--scenario", choices=[s.value for s in Scenario], required=True)
    parser.add_argument("--runs", type=int, default=200)
    parser.add_argument("--s-grid", default=None, help="comma-separated s values")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--grid-as-printed", action="store_true",
                        help="drop the non-baseline endpoint weights from the grid")
    parser.add_argument("--out", required=True)


def build_parser() -> _Parser:
    parser = _Parser(prog="targetsel")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a scenario CSV")
    p.add_argument("--scenario", choices=[s.value for s in Scenario], required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--n-complete", type=int, default=None)
    p.add_argument("--n-incomplete", type=int, default=None)
    p.add_argument("--keep-potential", action="store_true",
                   help="append potential-outcome debug columns y0,y1")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("select", help="run selection on a CSV, print the risk table")
    p.add_argument("--scenario", choices=[s.value for s in Scenario], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--boot", type=int, default=100)
    p.add_argument("--folds", type=int, default=10, help="0 disables the cv column")
    p.add_argument("--criterion", choices=["modified", "cv"], default="modified")
    p.add_argument("--grid-as-printed", action="store_true")
    p.add_argument("--dump-replicates", default=None, help="write b,g,estimate CSV")
    _add_common(p)

    p = sub.add_parser("simulate", help="mean-squared-error curves")
    _add_experiment_flags(p)
    p.add_argument("--b-var", type=int, default=100)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--methods", default="targeted,cv,baseline")
    _add_common(p)

    p = sub.add_parser("coverage", help="realised coverage of shortcut intervals")
    _add_experiment_flags(p)
    p.add_argument("--b-ci", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--shortcut-variance-term", choices=["var-g", "as-printed"],
                   default="var-g")
    _add_common(p)

    p = sub.add_parser("theory-check", help="Monte Carlo checks of the asymptotics")
    p.add_argument("--check", choices=["all", "bias", "variance", "lemma", "consistency"],
                   default="all")
    p.add_argument("--runs", type=int, default=None,
                   help="per-check defaults: bias/variance 10000, lemma 1e6, consistency 2000")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--n-grid", default=None, help="comma-separated n values")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("plot", help="render a result CSV as SVG")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--x", default="s")
    p.add_argument("--series", default="method")
    p.add_argument("--y", default="value")
    p.add_argument("--band", default="mc_se")
    p.add_argument("--title", default="")
    _add_common(p)

    return parser


def _apply_config(parser, args, argv) -> None:
    """Fill flags from a key = value file; explicitly passed flags win."""
    if getattr(args, "config", None) is None:
        return
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token.split("=", 1)[0])
    subparser = None
    for action in parser._subparsers._group_actions:  # noqa: SLF001 - argparse internals
        subparser = action.choices.get(args.command)
    option_types = {}
    flags = {}
    for action in subparser._actions:  # noqa: SLF001
        for option in action.option_strings:
            flags[option.lstrip("-")] = (option, action)
            option_types[option.lstrip("-")] = action
    with open(args.config, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{args.config}:{line_no}: expected key = value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in flags:
                raise UsageError(f"{args.config}:{line_no}: unknown key {key!r}")
            option, action = flags[key]
            if option in explicit:
                continue
            if isinstance(action, argparse._StoreTrueAction):  # noqa: SLF001
                setattr(args, action.dest, raw.lower() in ("1", "true", "yes"))
            else:
                value = action.type(raw) if action.type else raw
                if action.choices and value not in action.choices:
                    raise UsageError(f"{args.config}:{line_no}: invalid value for {key}")
                setattr(args, action.dest, value)


# -- command implementations -----------------------------------------------------


def _cmd_generate(args) -> int:
    config = ScenarioConfig(
        scenario=Scenario.parse(args.scenario),
        s=args.s,
        seed=args.seed,
        n=args.n,
        n_complete=args.n_complete,
        n_incomplete=args.n_incomplete,
    )
    if args.keep_potential:
        sample, potentials = generate(config, keep_potential=True)
        write_sample_csv(sample, args.out, extra={"y0": potentials.y0, "y1": potentials.y1})
    else:
        write_sample_csv(generate(config), args.out)
    return 0


def _cmd_select(args) -> int:
    scenario = Scenario.parse(args.scenario)
    sample = read_sample_csv(args.input, scenario)
    selector = TargetedSelector(
        family=scenario_family(scenario, as_printed_grid=args.grid_as_printed),
        n_bootstrap=args.boot,
        criterion=args.criterion,
        cv_folds=args.folds if args.folds else None,
        seed=args.seed,
    )
    selector.fit(sample)
    rows = risk_table_rows(selector.risk_table_, selector.best_index_)
    write_rows(rows, "-", RISK_TABLE_COLUMNS)
    if args.dump_replicates:
        matrix = selector.replicates_
        dump = [
            (b, g, matrix.values[b, g])
            for b in range(matrix.values.shape[0])
            for g in range(matrix.values.shape[1])
        ]
        write_rows(dump, args.dump_replicates, REPLICATE_COLUMNS)
    return 0


def _mc_config(args, **extra) -> McConfig:
    return McConfig(
        scenario=Scenario.parse(args.scenario),
        s_grid=_parse_grid(args.s_grid) if args.s_grid else None,
        runs=args.runs,
        master_seed=args.seed,
        as_printed_grid=args.grid_as_printed,
        **extra,
    )


def _cmd_simulate(args) -> int:
    config = _mc_config(
        args,
        b_var=args.b_var,
        k_folds=args.folds,
        methods=_parse_methods(args.methods),
    )
    _write_outcome(mse_curve(config, workers=args.workers), args.out)
    return 0


def _cmd_coverage(args) -> int:
    config = _mc_config(
        args,
        b_ci=args.b_ci,
        level=args.level,
        methods=(Method.TARGETED,),
        variance_term=args.shortcut_variance_term,
    )
    _write_outcome(coverage_eval(config, workers=args.workers), args.out)
    return 0


def _cmd_theory(args) -> int:
    def runs_for(check):
        return args.runs if args.runs is not None else _THEORY_DEFAULT_RUNS[check]

    rows = []
    checks = ["bias", "variance", "lemma", "consistency"] if args.check == "all" else [args.check]
    config = SyntheticLinearConfig(n=args.n, k_folds=args.k, seed=args.seed)
    for check in checks:
        if check == "bias":
            n_grid = _parse_grid(args.n_grid) if args.n_grid else (args.n,)
            rows += check_criterion_bias(config, [int(v) for v in n_grid], runs_for(check))
        elif check == "variance":
            rows += list(check_variance_ordering(config, args.n, runs_for(check)).rows)
            biased = SyntheticLinearConfig(
                n=args.n, k_folds=args.k, seed=args.seed, bias_shift=1.0
            )
            rows += list(check_variance_ordering(biased, args.n, runs_for(check)).rows)
        elif check == "lemma":
            result = check_gaussian_lemma(args.k, runs_for(check), stream(args.seed, 100 + args.k))
            rows += list(result.rows)
        else:
            n_grid = _parse_grid(args.n_grid) if args.n_grid else (200, 1000, 5000, 20000)
            rows += check_selection_consistency(
                config, [int(v) for v in n_grid], runs_for(check)
            )
    write_rows([astuple(r) for r in rows], args.out, MC_COLUMNS)
    return 0


def _cmd_plot(args) -> int:
    render_plot(
        PlotSpec(
            input_path=args.input,
            output_path=args.out,
            x_column=args.x,
            series_column=args.series,
            y_column=args.y,
            band_column=args.band,
            title=args.title,
        )
    )
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "select": _cmd_select,
    "simulate": _cmd_simulate,
    "coverage": _cmd_coverage,
    "theory-check": _cmd_theory,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(parser, args, argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # runtime failure: exit 2, message to stderr
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
