"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 numeric
overflow, 4 a bound failed certification (``verify-bound`` only).
"""

import argparse
import csv
import dataclasses
import io
import sys
from pathlib import Path

from .. import ar_model, divergence, inference
from .._pool import default_workers
from ..errors import ConfigError, NumericOverflowError
from ..seeding import SeedSpec
from .config import format_matrix, parse_config, parse_matrix
from .report import format_value, verify_bound

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_OVERFLOW = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _matrix(text):
    try:
        return parse_matrix(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _emit(text, output):
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    traj = ar_model.simulate(args.matrix, args.horizon, SeedSpec(args.seed, args.stream))
    _emit(ar_model.trajectory_to_csv(traj), args.output)
    return 0


def cmd_divergence(args):
    A, B, n = args.a, args.b, args.horizon
    seed = SeedSpec(args.seed, args.stream)
    if n * A.shape[0] <= ar_model.DENSE_CAP:
        h2 = divergence.hellinger_sq_exact(A, B, n).value
    else:
        h2 = float("nan")
    h2_mc = divergence.hellinger_sq_mc(A, B, n, args.samples, seed, workers=args.workers)
    tv = divergence.tv_mc(A, B, n, args.samples, seed, workers=args.workers)
    header = ("kl", "trace_functional", "hellinger_sq", "hellinger_sq_mc",
              "se_hellinger_sq_mc", "tv_mc", "se_tv_mc", "samples")
    row = (divergence.kl(A, B, n).value, divergence.trace_functional(A, B, n), h2,
           h2_mc.value, h2_mc.std_error, tv.value, tv.std_error, args.samples)
    _emit(_csv(header, [row]), args.output)
    return 0


def _class_from_args(args):
    if args.members is not None:
        if any(v is not None for v in (args.center, args.radius, args.points)):
            raise ValueError("give either --members or --center/--radius/--points, not both")
        return inference.HypothesisClass.from_members(
            [parse_matrix(m) for m in args.members.split("|")])
    if args.center is None or args.radius is None or args.points is None:
        raise ValueError("a class needs --members or all of --center, --radius, --points")
    return inference.grid_class(args.center, args.radius, args.points)


def cmd_mle(args):
    traj = ar_model.trajectory_from_csv(Path(args.trajectory).read_text(encoding="utf-8"))
    hclass = _class_from_args(args)
    best, loglik = inference.mle_select(traj, hclass)
    rows = [(j, format_matrix(hclass[j]), float(loglik[j]), j == best) for j in range(hclass.size)]
    _emit(_csv(("index", "matrix", "log_likelihood", "selected"), rows), args.output)
    return 0


def cmd_verify_bound(args):
    config = parse_config(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    output = args.output or config.output_path
    result = verify_bound(config, workers=args.workers)
    _emit(result.to_csv(), output)
    if result.overflowed:
        print("error: numeric overflow in at least one horizon", file=sys.stderr)
    elif not result.all_hold:
        print("error: a bound failed certification", file=sys.stderr)
    return result.exit_code


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed (64-bit unsigned)")
    common.add_argument("--workers", type=int, default=default_workers(),
                        help="worker processes; never changes the output")
    common.add_argument("--output", default=None, help="write CSV here instead of stdout")

    parser = _Parser(prog="arinfo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="simulate one trajectory")
    p.add_argument("--matrix", "-A", type=_matrix, required=True)
    p.add_argument("--horizon", "-n", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("divergence", parents=[common], help="divergences between P_A and P_B")
    p.add_argument("--a", type=_matrix, required=True)
    p.add_argument("--b", type=_matrix, required=True)
    p.add_argument("--horizon", "-n", type=int, required=True)
    p.add_argument("--samples", "-m", type=int, default=100_000)
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("mle", parents=[common], help="select the ML member for a trajectory CSV")
    p.add_argument("trajectory")
    p.add_argument("--members", help="'|'-separated matrices")
    p.add_argument("--center", type=_matrix)
    p.add_argument("--radius", type=float)
    p.add_argument("--points", type=int)
    p.set_defaults(func=cmd_mle)

    p = sub.add_parser("verify-bound", parents=[common], help="certify the bounds for a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_verify_bound)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command != "verify-bound" and args.seed is None:
        args.seed = 0
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except NumericOverflowError as exc:
        print(f"error: numeric overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except ConfigError as exc:
        print(f"error: invalid config: {'; '.join(exc.errors)}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
