"""Command-line front end.

Exit codes: 0 on success, 2 for malformed specs or arguments, 3 for dataset
errors. ``ALSIM_THREADS`` caps how many runs execute in parallel.
"""

import argparse
import sys

from .datasets import DatasetError
from .harness import (
    SWEEP_AXES,
    SpecError,
    generate_dataset,
    load_spec,
    run_experiment,
    run_sweep,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="alsim",
        description="Pool-based active-learning experiments with a GP surrogate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment spec")
    p_run.add_argument("spec", help="path to the experiment spec JSON")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one axis of a base spec")
    p_sweep.add_argument("spec", help="path to the base spec JSON")
    p_sweep.add_argument(
        "--axis", required=True, choices=sorted(SWEEP_AXES), help="axis to vary"
    )
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated axis values"
    )
    p_sweep.set_defaults(func=_cmd_sweep)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset")
    p_gen.add_argument("spec", help="path to a generator or experiment spec JSON")
    p_gen.add_argument("-o", "--out", required=True, help="output directory")
    p_gen.set_defaults(func=_cmd_gen)
    return parser


def _cmd_run(args):
    raw = load_spec(args.spec)
    out = run_experiment(raw)
    print(f"wrote results to {out}")
    return 0


def _cmd_sweep(args):
    raw = load_spec(args.spec)
    caster = SWEEP_AXES[args.axis]
    try:
        values = [caster(v.strip()) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise SpecError(f"bad --values for axis {args.axis}: {exc}") from None
    path = run_sweep(raw, args.axis, values)
    print(f"wrote sweep to {path}")
    return 0


def _cmd_gen(args):
    raw = load_spec(args.spec)
    data_path, split_path = generate_dataset(raw, args.out)
    print(f"wrote {data_path} and {split_path}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
