"""``mdslab`` command-line entry point."""
import argparse
import json
import os
import sys

import numpy as np

from .config import CheckSettings, load_config
from .errors import ConfigError, MdsLabError
from .experiments import cmd_check, cmd_distance, cmd_markov, cmd_ratefit, cmd_simulate, resolve_threads

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("simulate", "distance", "ratefit", "markov", "check")


def build_parser():
    p = argparse.ArgumentParser(prog="mdslab", description="Martingale Berry-Esseen experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "check", help="JSON experiment config")
        s.add_argument("--out", help="output path prefix (writes <out>.csv and <out>.json)")
        s.add_argument("--seed", type=int, help="master seed; overrides the config")
        s.add_argument("--threads", type=int, help="worker threads (default: $MDSLAB_THREADS, else CPU count)")
    return p


def _prefix(out, cfg_out, command):
    path = out or cfg_out or f"mdslab_{command}"
    root, ext = os.path.splitext(path)
    return root if ext in (".csv", ".json") else path


def _write(prefix, report_json, csv_text=None):
    _ensure_dir(prefix)
    if csv_text is not None:
        with open(prefix + ".csv", "w", newline="") as fh:
            fh.write(csv_text)
    with open(prefix + ".json", "w") as fh:
        json.dump(report_json, fh, indent=2)


def _print_fits(fits):
    for key, fit in fits.items():
        if fit:
            print(f"  slope[{key}] = {fit['slope']:+.4f}  (r^2 {fit['r_squared']:.3f})")


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be a nonnegative integer")
        threads = resolve_threads(args.threads)
        if args.command == "check":
            check, seed, cfg_out = CheckSettings(), 0, None
            if args.config:
                cfg = load_config(args.config)
                check, seed, cfg_out = cfg.check, cfg.master_seed, cfg.output
            if args.seed is not None:
                seed = args.seed
            ok, report, first = cmd_check(check, seed)
            worked = report["stein"][0]
            print(f"worked case t=0.5, eps=1,1: lhs {worked['lhs']:.5f} <= rhs {worked['rhs']:.5f}")
            _write(_prefix(args.out, cfg_out, "check"), report)
            if not ok:
                print(f"FAIL: {first}")
                return EXIT_CHECK_FAILED
            print(f"check: all {len(report['stein'])} integral cases and {len(report['gaussian'])} gaussian cases hold")
            return EXIT_OK

        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.master_seed = args.seed
        prefix = _prefix(args.out, cfg.output, args.command)
        if args.command == "simulate":
            report, arrays = cmd_simulate(cfg, threads)
            _ensure_dir(prefix)
            np.savez_compressed(prefix + ".npz", **arrays)
        elif args.command == "distance":
            report = cmd_distance(cfg, threads)
        elif args.command == "ratefit":
            report = cmd_ratefit(cfg, threads)
        else:
            report = cmd_markov(cfg, threads)
        _write(prefix, report.to_json(), report.csv_text())
        sys.stdout.write(report.csv_text())
        _print_fits(report.fits)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MdsLabError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _ensure_dir(prefix):
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
