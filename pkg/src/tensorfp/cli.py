"""Command-line entry point for the experiment harness."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .harness import (
    ExperimentConfig,
    run_convergence_probe,
    run_crlb_only,
    run_imbalance_sweep,
    run_sweep,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="TOML experiment config")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--trials", type=int, help="override the trial count")
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument(
        "--methods", help="comma-separated subset of TALS,KRF,LS"
    )
    parser.add_argument("--jobs", type=int, help="parallel worker count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorfp",
        description="Monte-Carlo benchmarks for joint DoA, fading and "
        "RF-fingerprint estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("sweep-snr", "RMSE versus SNR for the configured methods"),
        ("sweep-amplitude", "RMSE versus amplitude-imbalance scaling"),
        ("sweep-phase", "RMSE versus phase-imbalance scaling"),
        ("convergence", "per-iteration loss traces"),
        ("crlb-only", "bound curves without running any estimator"),
    ]:
        _add_common(sub.add_parser(name, help=text))
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.methods is not None:
        overrides["methods"] = tuple(
            m.strip().upper() for m in args.methods.split(",") if m.strip()
        )
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        if args.command == "sweep-snr":
            run_sweep(config, args.out)
        elif args.command == "sweep-amplitude":
            run_imbalance_sweep(config, "amplitude", args.out)
        elif args.command == "sweep-phase":
            run_imbalance_sweep(config, "phase", args.out)
        elif args.command == "convergence":
            run_convergence_probe(config, args.out)
        else:
            run_crlb_only(config, args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
