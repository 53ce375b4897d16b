"""Command-line entry point.

Exit codes: 0 success, 1 validation/config error, 2 I/O error,
3 verification pass rate below the configured floor.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .cnf import DimacsError, GenerationError
from .pipeline import (
    ConfigError,
    PassRateError,
    RunConfig,
    cmd_analyze,
    cmd_export,
    cmd_generate,
    cmd_synthesize,
    corpus_stats,
    format_report,
    metrics_report,
)
from .teacher import SynthesisError
from .trace import TraceParseError

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_PASS_RATE = 0, 1, 2, 3


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.mode is not None or args.injection_prob is not None:
        inj = cfg.injection
        if args.mode is not None:
            inj = replace(inj, mode=args.mode)
        if args.injection_prob is not None:
            try:
                inj = replace(inj, injection_probability=args.injection_prob)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        cfg.injection = inj
    if args.strict is not None:
        cfg.strict = args.strict
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="root seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--mode", choices=["witness", "search"], help="teacher mode")
    common.add_argument("--injection-prob", type=float, help="per-instance injection probability")
    strictness = common.add_mutually_exclusive_group()
    strictness.add_argument("--strict", dest="strict", action="store_true", default=None,
                            help="parse traces with the strict grammar")
    strictness.add_argument("--lenient", dest="strict", action="store_false",
                            help="parse traces leniently")

    p = argparse.ArgumentParser(prog="sattrace", description="SAT backtracking-trace corpus toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write random satisfiable DIMACS instances")
    syn = sub.add_parser("synthesize", parents=[common], help="synthesize, verify and filter traces")
    syn.add_argument("--instances", type=Path, help="instance directory (default: <out>/instances)")
    sub.add_parser("export", parents=[common], help="write matched treatment/control datasets")
    ana = sub.add_parser("analyze", parents=[common], help="measure backtracking behaviour in responses")
    ana.add_argument("responses", type=Path, help="JSONL file of {id, response} records")
    ana.add_argument("--instances", type=Path, help="instance directory with manifest.jsonl")
    st = sub.add_parser("stats", parents=[common], help="summarize exported datasets")
    st.add_argument("--dataset", type=Path, help="dataset directory (default: <out>/dataset)")
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "generate":
            path = cmd_generate(cfg)
            print(f"wrote {cfg.count} instances to {path}")
        elif args.command == "synthesize":
            try:
                summary = cmd_synthesize(cfg, args.instances)
            except PassRateError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_PASS_RATE
            sys.stdout.write(summary.report())
        elif args.command == "export":
            for name, n in cmd_export(cfg).items():
                print(f"{name} = {n}")
        elif args.command == "analyze":
            strict = bool(args.strict)
            metrics = cmd_analyze(args.responses, args.instances, args.out, strict=strict)
            sys.stdout.write(metrics_report(metrics))
        elif args.command == "stats":
            sys.stdout.write(format_report(corpus_stats(args.dataset or Path(cfg.out) / "dataset")))
    except (ConfigError, DimacsError, TraceParseError, GenerationError, SynthesisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
