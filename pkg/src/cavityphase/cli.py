"""Command line front end: `cavity-phase run|validate <config>`.

Exit codes: 0 success, 2 configuration error, 3 compute error.
"""

from __future__ import annotations

import argparse
import sys

from .jobs import ComputeError, ConfigError, JobConfig, run_job


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavity-phase",
        description="Phase diagrams of 2- and 3-level atoms in a cavity field",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a job configuration")
    p_run.add_argument("config", help="flat key-value job file")
    p_run.add_argument("--workers", type=int, default=1,
                       help="parallel workers for sample/grid evaluation")
    p_run.add_argument("--out", default=None,
                       help="output directory (overrides output.directory)")
    p_val = sub.add_parser("validate", help="check a job configuration")
    p_val.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = JobConfig.from_file(args.config)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"ok: {config.kind}")
        return 0
    outdir = args.out or config.get("output.directory", ".")
    workers = max(1, args.workers)
    try:
        manifest = run_job(config, outdir, workers=workers)
    except ComputeError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return 3
    for entry in manifest["files"]:
        print(f"wrote {entry['name']}  sha256={entry['sha256'][:16]}...")
    return 0


if __name__ == "__main__":
    sys.exit(main())
