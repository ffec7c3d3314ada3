"""Command-line entry points: run, sweep, verify-oracles, report.

Exit code is 0 iff every executed criterion passed.  The output root comes
from --output or the KVSPECTRAL_OUT environment variable (default ./out).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness


def _output_root(args):
    return args.output or os.environ.get("KVSPECTRAL_OUT", "out")


def _load_specs(path):
    with open(path) as fh:
        return harness.parse_config(fh.read())


def _print_report(rep):
    mark = "PASS" if rep.passed else "FAIL"
    print(f"[{mark}] {rep.label} ({rep.id})")
    for c in rep.checks:
        verdict = "pass" if c.passed else "FAIL"
        print(f"    {c.name}: {c.value:.6g} (tol {c.tolerance:.6g}) "
              f"{verdict}")
    if rep.error:
        print(f"    error: {rep.error}")


def cmd_run(args):
    specs = _load_specs(args.config)
    root = _output_root(args)
    ok = True
    for spec in specs:
        rep = harness.run_experiment(spec, root, plots=args.plots)
        _print_report(rep)
        ok = ok and rep.passed
    return 0 if ok else 1


def cmd_sweep(args):
    specs = _load_specs(args.config)
    root = _output_root(args)
    reports = harness.sweep(specs, root, parallelism=args.parallelism,
                            plots=args.plots)
    for rep in reports:
        _print_report(rep)
    return 0 if all(r.passed for r in reports) else 1


def cmd_verify_oracles(args):
    root = _output_root(args)
    ok = harness.verify_oracles(root)
    print(f"oracle battery: {'PASS' if ok else 'FAIL'} "
          f"(report under {root})")
    return 0 if ok else 1


def cmd_report(args):
    verdicts = harness.collect_reports(args.directory)
    if not verdicts:
        print(f"no summaries found under {args.directory}")
        return 1
    ok = True
    for path, passed in verdicts:
        print(f"[{'PASS' if passed else 'FAIL'}] {path}")
        ok = ok and passed
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="kvspectral",
        description="viscoelastic Galerkin experiments and verification")
    parser.add_argument("--output", "-o", default=None,
                        help="output root (default: $KVSPECTRAL_OUT or ./out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiments in a config file")
    p_run.add_argument("config")
    p_run.add_argument("--plots", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run experiments in parallel")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--parallelism", type=int, default=2)
    p_sweep.add_argument("--plots", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_ver = sub.add_parser("verify-oracles",
                           help="run the canned exact-solution battery")
    p_ver.set_defaults(func=cmd_verify_oracles)

    p_rep = sub.add_parser("report", help="aggregate summaries under a dir")
    p_rep.add_argument("directory")
    p_rep.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
