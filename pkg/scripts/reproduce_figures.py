"""Run every figure family with the default (device) configuration.

    python scripts/reproduce_figures.py [--out results] [--plot] [--seed N]

Writes the CSVs (and SVGs with --plot) of each subcommand into one
directory and fits the bundled calibration dataset.
"""
import argparse
import sys
import time
from pathlib import Path

from omx.cli import main as omx

ROOT = Path(__file__).resolve().parents[1]
COMMANDS = ("efficiency-sweep", "transient", "spectral-response", "mechanical-probe", "ringdown")


def main():
    ap = argparse.ArgumentParser(description="reproduce all figure families")
    ap.add_argument("--out", default="results")
    ap.add_argument("--config", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    common = ["--out", args.out, "--seed", str(args.seed)]
    if args.config:
        common += ["--config", args.config]
    if args.plot:
        common.append("--plot")
    status = 0
    for cmd in COMMANDS:
        t0 = time.perf_counter()
        code = omx([cmd] + common)
        print(f"{cmd}: exit {code} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        status = status or code
    code = omx(["calibrate", str(ROOT / "data" / "calibration_synthetic.csv")] + common)
    return status or code


if __name__ == "__main__":
    sys.exit(main())
