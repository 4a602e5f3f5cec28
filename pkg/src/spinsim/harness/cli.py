"""``spinsim`` command line: one subcommand per experiment, one run per output directory.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

COMMANDS = {
    "characterize-mtj": ("NEGF conductance pair, angle sweep and dual-route current", "characterize_mtj"),
    "llgs-run": ("single macrospin trajectory", "llgs_run"),
    "dw-pulse": ("domain-wall pulse train and amplitude sweep", "dw_pulse"),
    "relu-sweep": ("ReLU cell DC transfer and step transient", "relu_sweep"),
    "maxpool-sweep": ("ReLU-max-pool trials against argmax", "maxpool_sweep"),
    "train": ("train the hardware UNet; metrics, ledger, weights, predictions", "train_cmd"),
    "eval": ("evaluate saved weights on the test split", "eval_cmd"),
    "energy-report": ("schedule arithmetic and count-model energies", "energy_report_cmd"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinsim", description="Spintronic UNet hardware simulator.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run config, or a manifest.json to replay")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory (one run per directory)")
    common.add_argument("--threads", type=int, help="BLAS/OpenMP thread cap")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (doc, _) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=doc)
    sc = sub.add_parser("scenario", parents=[common], help="run a named self-checking scenario")
    sc.add_argument("name", help="scenario name, 'all', or 'list'")
    return ap


def _run(args, argv: list[str]) -> int:
    cfg = load_config(args.config).with_overrides(args.seed, args.threads)
    for var in THREAD_VARS:
        os.environ[var] = str(cfg["threads"])

    # numerical modules are imported after the thread caps are in place
    from . import commands, scenarios
    from .io import RunLock, write_manifest, write_rows
    from ..numerics import NumericalError
    from ..hwnn import TrainingDiverged

    if args.command == "scenario" and args.name == "list":
        for name, (doc, _) in scenarios.SCENARIOS.items():
            print(f"{name:20s} {doc}")
        return EXIT_OK

    out = Path(args.out)
    try:
        with RunLock(out):
            if args.command == "scenario":
                names = list(scenarios.SCENARIOS) if args.name == "all" else [args.name]
                if any(n not in scenarios.SCENARIOS for n in names):
                    raise ConfigError(f"unknown scenario '{args.name}'; try 'spinsim scenario list'")
                artifacts, failed = [], 0
                for n in names:
                    rows = scenarios.run_scenario(n, cfg)
                    artifacts.append(write_rows(out / f"scenario_{n}.csv", rows))
                    bad = [r for r in rows if not r["passed"]]
                    failed += len(bad)
                    print(f"{n}: {len(rows) - len(bad)}/{len(rows)} checks passed")
                    for r in bad:
                        print(f"  FAIL {r['check']}: expected {r['expected']}, got {r['got']}")
            else:
                artifacts = getattr(commands, COMMANDS[args.command][1])(cfg, out)
                for a in artifacts:
                    if a.suffix in (".csv", ".json"):
                        print(a)
            write_manifest(out, argv, cfg.values, artifacts)
    except (NumericalError, TrainingDiverged) as exc:
        print(f"spinsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # module parameter validation rejected a configured value
        raise ConfigError(str(exc)) from None
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return _run(args, argv)
    except ConfigError as exc:
        print(f"spinsim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
