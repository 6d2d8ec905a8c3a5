"""Command-line front end for parameter sweeps.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .sweep import MODES, iter_sweep, load_config, write_outputs

log = logging.getLogger("pulsed_entanglement")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pulsed-entanglement",
        description="Sweep entanglement, steering and fidelity of the retrieved "
        "mechanical state over bath occupation, storage time and squeezing.",
    )
    ap.add_argument("config", type=Path, help="sweep configuration file (TOML)")
    ap.add_argument("--seed", type=int, help="override sweep.seed")
    ap.add_argument("--mode", choices=MODES, help="override sweep.mode")
    ap.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    ap.add_argument("--out-dir", type=Path, help="override sweep.output")
    ap.add_argument("--steps", type=int, help="override sweep.steps")
    ap.add_argument("--trajectories", type=int, help="override sweep.trajectories")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        cfg = load_config(args.config)
        overrides = {
            "seed": args.seed,
            "mode": args.mode,
            "steps": args.steps,
            "trajectories": args.trajectories,
            "output": None if args.out_dir is None else str(args.out_dir),
        }
        cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        errs = cfg.validate()
        if errs:
            raise ConfigError(errs)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.workers is not None and args.workers < 1:
        print("config error: --workers must be >= 1", file=sys.stderr)
        return 1

    rows = []
    try:
        for row in iter_sweep(cfg, args.workers):
            rows.append(row)
    except Exception as exc:  # noqa: BLE001
        log.error("sweep aborted after %d points: %s", len(rows), exc)
        if rows:
            try:
                write_outputs(rows, cfg.output)
            except OSError as io_exc:
                log.error("could not write partial results: %s", io_exc)
        return 2

    try:
        paths = write_outputs(rows, cfg.output)
    except OSError as exc:
        log.error("could not write results: %s", exc)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
