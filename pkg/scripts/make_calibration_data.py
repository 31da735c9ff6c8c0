"""Write the bundled synthetic calibration dataset.

Two probe sweeps (P1 at P2 = 0, P2 at P1 = 1 mW) plus efficiency curves at
P2 = 2, 11 and 21 mW, generated with k1 = 0.2/mW, k2 = 1/15 per mW and
eta1*eta2 = 0.2025, with 2% multiplicative noise.

    python scripts/make_calibration_data.py [--out data/calibration_synthetic.csv]
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from omx.calibration import synthetic_dataset, write_measurements

NOISE = 0.02


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "calibration_synthetic.csv"))
    ap.add_argument("--seed", type=int, default=2026)
    args = ap.parse_args()
    p1_grid = np.linspace(2.0, 30.0, 15)
    rows = synthetic_dataset(0.2, 1.0 / 15.0, 0.2025, p1_grid=p1_grid, noise=NOISE, seed=args.seed)
    # every row carries its standard error, so the fit is inverse-variance weighted
    rows = [replace(r, sigma=NOISE * abs(r.value)) for r in rows]
    write_measurements(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
