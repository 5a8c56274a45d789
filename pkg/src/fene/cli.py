"""Command-line entry point: fene run / resume / report."""

import argparse
import sys

from . import runner


def _add_run_flags(sub):
    sub.add_argument("--seed", type=int, default=None,
                     help="override the configured RNG seed")
    sub.add_argument("--output", default=None,
                     help="override the configured output directory")
    sub.add_argument("--max-steps", type=int, default=None,
                     help="override the configured step count")
    sub.add_argument("--ceiling", type=float, default=None,
                     help="override the blow-up indicator ceiling")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fene",
        description="Deterministic simulator for the compressible "
                    "Navier-Stokes / Fokker-Planck FENE dumbbell model "
                    "on the 2-D torus.")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute a configured scenario")
    p_run.add_argument("config", help="path to the run configuration file")
    _add_run_flags(p_run)

    p_res = subs.add_parser("resume", help="continue a run from a checkpoint")
    p_res.add_argument("checkpoint", help="path to a .fkp snapshot")
    p_res.add_argument("config", help="path to the run configuration file")
    _add_run_flags(p_res)

    p_rep = subs.add_parser("report", help="summarize a finished run")
    p_rep.add_argument("run_dir", help="output directory of a previous run")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return runner.run(args.config, output=args.output, seed=args.seed,
                          max_steps=args.max_steps, ceiling=args.ceiling)
    if args.command == "resume":
        return runner.resume(args.checkpoint, args.config,
                             output=args.output, seed=args.seed,
                             max_steps=args.max_steps, ceiling=args.ceiling)
    return runner.report(args.run_dir)


if __name__ == "__main__":
    sys.exit(main())
