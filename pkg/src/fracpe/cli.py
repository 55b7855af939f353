"""Command-line entry point: one subcommand per experiment plus report.

Exit codes: 0 pass/complete, 2 experiment FAIL (a finding, not an error),
1 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, EXPERIMENTS, env_out_root, env_threads
from .gridfn import InvalidInput
from .pesolver import Diverged, StepRejected


def _add_common(p):
    p.add_argument("--config", required=True, metavar="PATH",
                   help="JSON run configuration")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="output directory (default: FRACPE_OUT or ./fracpe-out)")
    p.add_argument("--seed", type=int, default=None, metavar="N",
                   help="override the config seed")
    p.add_argument("--threads", type=int, default=None, metavar="N",
                   help="worker threads (default: FRACPE_THREADS or config)")
    p.add_argument("--resume", metavar="DIR", default=None,
                   help="continue a previous run directory")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="fracpe",
        description="Spectral-Galerkin lab for stochastic primitive equations "
                    "driven by fractional noise.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(p)
    rp = sub.add_parser("report", help="render figures and summary for a run")
    rp.add_argument("run_dir", metavar="DIR")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            from .report import render_report

            written = render_report(args.run_dir)
            for path in written:
                print(path)
            return 0

        from .runner import resume, run

        if args.resume:
            result = resume(args.resume)
        else:
            overrides = {}
            if args.seed is not None:
                overrides["seed"] = args.seed
            threads = args.threads if args.threads is not None else env_threads()
            if threads is not None:
                overrides["threads"] = threads
            out = args.out
            if out is None and env_out_root():
                import os

                out = os.path.join(env_out_root(), args.command)
            result = run(args.config, out_dir=out, overrides=overrides,
                         expected=args.command)
            if result.run_dir:
                print(f"run dir: {result.run_dir}")
        print(result.summary)
        return result.exit_code
    except (ConfigError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StepRejected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Diverged as exc:
        print(f"error: trajectory diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
