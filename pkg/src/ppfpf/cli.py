"""Command-line entry point.

Subcommands:
    run              run an experiment file (filters + optional oracle)
    oracle           run only the truth/stream simulation and grid solver
    presets          print the built-in experiment files
    config-reference print the config schema with defaults

Exit code 0 on success; on failure a machine-readable JSON object is
written to stderr and the exit code is 2 for configuration problems or
1 for runtime errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import ConfigError, config_reference_text, parse_config, preset_text
from .harness import run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppfpf",
        description="point-process particle filtering experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment file")
    run_p.add_argument("--config", required=True, help="experiment file path")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the file's base seed")
    run_p.add_argument("--out", default="out", help="output directory")

    oracle_p = sub.add_parser(
        "oracle", help="run only the grid reference solver on a fresh stream"
    )
    oracle_p.add_argument("--config", required=True)
    oracle_p.add_argument("--seed", type=int, default=None)
    oracle_p.add_argument("--out", default="out")

    sub.add_parser("presets", help="print the built-in experiment files")
    sub.add_parser("config-reference", help="print the config schema")
    return parser


def _load_config(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed).validate()
    source = Path(args.config).read_bytes()
    return cfg, source


def _emit_error(kind: str, exc: Exception) -> None:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "presets":
        print(preset_text())
        return 0
    if args.command == "config-reference":
        print(config_reference_text())
        return 0

    try:
        cfg, source = _load_config(args)
    except ConfigError as exc:
        _emit_error("config", exc)
        return 2

    try:
        rows = run_experiment(
            cfg, args.out, config_source=source,
            oracle_only=(args.command == "oracle"),
        )
    except Exception as exc:
        _emit_error("runtime", exc)
        return 1

    print(f"wrote {Path(args.out).resolve()}")
    for row in rows:
        mse = "" if row.mse is None else f" mse={row.mse:.6g}"
        var = (
            ""
            if row.avg_posterior_variance is None
            else f" avg_var={row.avg_posterior_variance:.6g}"
        )
        print(
            f"run {row.run_id} seed {row.seed} {row.filter_name}: "
            f"{row.status}{mse}{var} ({row.wall_clock_seconds:.2f}s)"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
