"""Command-line entry point.

    ssmrecon <synth|build-ssm|slice|train|reconstruct|evaluate|stats-vectors>
             --config <path> [--subject <id>] [--stack <path>]

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import load_config
from .errors import ConfigError, DataError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssmrecon",
        description="Shape-space construction and slice-guided 3D reconstruction with volumetry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, needs_config: bool = True):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="pipeline config JSON")
        return p

    add("synth")
    add("build-ssm")
    add("slice")
    add("train")
    recon = add("reconstruct")
    recon.add_argument("--subject", help="subject id whose mask stack to reconstruct")
    recon.add_argument("--stack", help="path to a stack manifest (stack.json)")
    add("evaluate")
    add("stats-vectors", needs_config=False)
    return parser


def _run(args) -> int:
    if args.command == "stats-vectors":
        ok, table = pipeline.check_stats_vectors()
        print(table)
        print("all vectors pass" if ok else "vector check FAILED")
        return EXIT_OK if ok else EXIT_NUMERICAL

    cfg = load_config(args.config)
    if args.command == "synth":
        manifest = pipeline.cmd_synth(cfg)
        print(f"population written: {manifest}")
    elif args.command == "build-ssm":
        path = pipeline.cmd_build_ssm(cfg)
        print(f"shape space written: {path}")
    elif args.command == "slice":
        paths = pipeline.cmd_slice(cfg)
        print(f"mask stacks written: {len(paths)}")
    elif args.command == "train":
        path = pipeline.cmd_train(cfg)
        print(f"weights written: {path}")
    elif args.command == "reconstruct":
        out_path, volume = pipeline.cmd_reconstruct(cfg, subject=args.subject, stack_path=args.stack)
        print(f"reconstruction written: {out_path}")
        print(f"volume_cm3: {volume:.6f}")
    elif args.command == "evaluate":
        json_path, text_path = pipeline.cmd_evaluate(cfg)
        print(f"report written: {json_path}")
        sys.stdout.write(text_path.read_text(encoding="utf-8"))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
