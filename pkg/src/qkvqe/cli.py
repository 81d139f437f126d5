"""Command-line entry point for the experiment harness."""

from __future__ import annotations

import argparse
import sys

from . import experiments


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None, help="INI config file")
    sub.add_argument("--seed", type=int, default=None, help="base RNG seed")
    sub.add_argument("--repeats", type=int, default=None)
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--full-scale", action="store_true",
                     help="use publication-scale repeat counts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkvqe",
        description="Quantum-kernel surrogate experiments: regression sweeps, "
                    "Bayesian VQE, SPSA baseline, MPS kernels, dimension tables.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in experiments.EXPERIMENT_KINDS:
        sub = subs.add_parser(name)
        _add_common(sub)
    check = subs.add_parser(
        "crosscheck",
        help="verify that summary CSVs match the persisted trace files")
    check.add_argument("out_dir", help="experiment output directory")
    return parser


def _config_from_args(args) -> experiments.ExperimentConfig:
    return experiments.load_config(
        args.config, kind=args.command, seed=args.seed, repeats=args.repeats,
        out_dir=args.out, full_scale=True if args.full_scale else None)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "crosscheck":
        problems = experiments.verify_persisted_summaries(args.out_dir)
        for p in problems:
            print(p)
        print("crosscheck " + ("FAILED" if problems else "passed"))
        return 1 if problems else 0
    cfg = _config_from_args(args)
    if args.command == "regress":
        rows = experiments.run_regression_sweep(cfg, local=False)
        print(f"wrote {len(rows)} regression rows to {cfg.out_dir}")
    elif args.command == "regress-local":
        rows = experiments.run_regression_sweep(cfg, local=True)
        print(f"wrote {len(rows)} local-regression rows to {cfg.out_dir}")
    elif args.command == "bo":
        rows = experiments.run_bo_sweep(cfg)
        print(f"wrote {len(rows)} BO summaries to {cfg.out_dir}")
    elif args.command == "spsa":
        rows = experiments.run_spsa_sweep(cfg)
        print(f"wrote {len(rows)} SPSA summaries to {cfg.out_dir}")
    elif args.command == "mps-regress":
        rows = experiments.run_mps_regression(cfg)
        print(f"wrote {len(rows)} MPS-regression rows to {cfg.out_dir}")
    elif args.command == "feature-dim":
        rows = experiments.feature_dim_table(cfg)
        print(f"wrote {len(rows)} dimension rows to {cfg.out_dir}")
    elif args.command == "find-opt":
        theta, e = experiments.find_opt(cfg)
        print(f"optimum energy {e:.6f} written to {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
