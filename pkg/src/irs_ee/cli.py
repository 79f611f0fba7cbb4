"""Command line entry point: ``irs-ee run <spec.yaml>`` or ``irs-ee sweep --var pmax``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import yaml

from .bcd import OptimizerMode
from .experiments import (
    DEFAULT_SWEEPS,
    ExperimentSpec,
    emit_csv,
    export_channels,
    load_spec,
    run_experiment,
    spec_to_dict,
)

log = logging.getLogger("irs_ee")


def _mode_list(text: str) -> tuple[OptimizerMode, ...]:
    try:
        return tuple(OptimizerMode(m.strip().lower()) for m in text.split(",") if m.strip())
    except ValueError as exc:
        choices = ", ".join(m.value for m in OptimizerMode)
        raise argparse.ArgumentTypeError(f"{exc}; choose from {choices}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per sweep point")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--modes", type=_mode_list, help="comma-separated modes, e.g. proposed,fix_pa")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--workers", type=int, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irs-ee", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described in a YAML file")
    run.add_argument("spec_file")
    _common(run)

    sweep = sub.add_parser("sweep", help="run a default sweep")
    sweep.add_argument("--var", choices=sorted(DEFAULT_SWEEPS), required=True)
    sweep.add_argument("--values", type=float, nargs="+", help="override the sweep values")
    _common(sweep)

    show = sub.add_parser("show-spec", help="print the effective spec as YAML")
    show.add_argument("spec_file", nargs="?")

    chan = sub.add_parser("export-channels", help="write one trial's channels as JSON")
    chan.add_argument("spec_file", nargs="?")
    chan.add_argument("--trial", type=int, default=0)
    chan.add_argument("--value", type=float, help="sweep value (default: first)")
    chan.add_argument("--seed", type=int)
    chan.add_argument("--out", required=True)
    return parser


def _apply_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    changes = {}
    for key in ("trials", "seed", "modes", "out", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    return replace(spec, **changes) if changes else spec


def _spec(args) -> ExperimentSpec:
    if args.command == "sweep":
        values = DEFAULT_SWEEPS[args.var] if args.values is None else tuple(args.values)
        if args.var != "pmax":
            values = tuple(int(v) for v in values)
        spec = ExperimentSpec(sweep_var=args.var, sweep_values=values)
    elif getattr(args, "spec_file", None):
        spec = load_spec(args.spec_file)
    else:
        spec = ExperimentSpec()
    return _apply_overrides(spec, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        spec = _spec(args)
    except (ValueError, TypeError, yaml.YAMLError) as exc:
        print(f"irs-ee: invalid experiment spec: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"irs-ee: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "show-spec":
            yaml.safe_dump(spec_to_dict(spec), sys.stdout, sort_keys=False)
            return 0
        if args.command == "export-channels":
            value = spec.sweep_values[0] if args.value is None else args.value
            export_channels(spec, value, args.trial, args.out)
            return 0
        log.info("running %s sweep over %s, %d trials", spec.sweep_var,
                 list(spec.sweep_values), spec.trials)
        table = run_experiment(spec)
        emit_csv(table, spec.out if spec.out is not None else sys.stdout)
    except OSError as exc:
        print(f"irs-ee: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
