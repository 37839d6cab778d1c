"""``onesfw`` command line: ``run <config>``, ``verify <suite>``, ``report <dir>``."""
import argparse
import sys

from . import acceptance, kernels
from .harness import cmd_report, cmd_run, cmd_verify


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--workers", type=_positive_int, default=argparse.SUPPRESS if suppress else 1,
                        help="number of worker processes for run (default 1)")
    parser.add_argument("--out", default=default, metavar="DIR",
                        help="output directory (overrides the config for run)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="onesfw", description="One-sample stochastic Frank-Wolfe experiments."
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s (kernels: {kernels.BACKEND})")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute every solver x seed cell of a config")
    p.add_argument("config")
    _global_flags(p, suppress=True)

    p = sub.add_parser("verify", help="run an acceptance suite and print PASS/FAIL lines")
    p.add_argument("suite", help=f"one of: {', '.join(acceptance.SUITES)}")
    _global_flags(p, suppress=True)

    p = sub.add_parser("report", help="aggregate traces under a results directory")
    p.add_argument("directory")
    _global_flags(p, suppress=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, workers=args.workers, out=args.out)
    if args.command == "verify":
        return cmd_verify(args.suite, out=args.out)
    return cmd_report(args.directory, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
