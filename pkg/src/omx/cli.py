"""``omx`` command line: one subcommand per figure family.

    omx <subcommand> [--config PATH] [--out DIR] [--seed N] [--plot]

Exit status: 0 success, 2 configuration/schema error, 3 numerical failure,
4 fit failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from . import experiments as ex
from .calibration import (
    CalibrationError,
    SchemaError,
    calibrate,
    efficiency_from_output_power,
    load_measurements,
)
from .config import ConfigError, RunConfig
from .detection import FitError
from .dynamics import NumericalError, StepSizeError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FIT = 0, 2, 3, 4


def _num(v) -> str:
    return repr(float(v))


def write_csv(path: Path, header: str, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_num(v) for v in row) + "\n")
    return path


def _tag(x: float) -> str:
    return f"{x:g}".replace(".", "p")


def plot_csv(path: Path, logx: bool = False, logy: bool = False) -> Path:
    """Line plot of every column against the first, as SVG next to the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    matplotlib.rcParams["svg.hashsalt"] = "omx"
    with open(path, encoding="utf-8") as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for j in range(1, data.shape[1]):
        ax.plot(data[:, 0], data[:, j], marker="o", ms=3, label=names[j])
    ax.set_xlabel(names[0])
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    out = path.with_suffix(".svg")
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_efficiency_sweep(cfg: RunConfig, out: Path):
    files = []
    for p2, rows in ex.efficiency_sweep(cfg).items():
        files.append(write_csv(out / f"efficiency_p2_{_tag(p2)}mw.csv", "p1_mw,chi_steady,chi_gated", rows))
    return files, cfg.efficiency.sweep_scale == "log"


def cmd_transient(cfg: RunConfig, out: Path):
    files = []
    for dur, rows in ex.transient(cfg).items():
        files.append(write_csv(out / f"transient_{_tag(dur)}us.csv", "gate_delay_us,output_power_w", rows))
    return files, cfg.transient.sweep_scale == "log"


def cmd_spectral_response(cfg: RunConfig, out: Path):
    files = []
    for dur, rows in ex.spectral_response(cfg).items():
        files.append(write_csv(out / f"spectral_{_tag(dur)}us.csv", "delta_hz,output_power_w", rows))
    return files, cfg.spectral.sweep_scale == "log"


def cmd_mechanical_probe(cfg: RunConfig, out: Path):
    p1_rows, p2_rows = ex.mechanical_probe(cfg)
    files = [
        write_csv(out / "mech_probe_p1_sweep.csv", "p1_mw,mech_intensity", p1_rows),
        write_csv(out / "mech_probe_p2_sweep.csv", "p2_mw,mech_intensity", p2_rows),
    ]
    return files, cfg.probe.sweep_scale == "log"


def cmd_calibrate(cfg: RunConfig, out: Path, data_path):
    rows = load_measurements(data_path)
    s = cfg.system
    rows = efficiency_from_output_power(rows, cfg.signal.power_mw, s.wavelength1_nm * 1e-9, s.wavelength2_nm * 1e-9)
    fit = calibrate(rows)
    report = out / "calibration_report.txt"
    report.write_text(fit.report(), encoding="utf-8")
    cov = out / "calibration_covariance.csv"
    cov.write_text(fit.covariance_csv(), encoding="utf-8")
    sys.stdout.write(fit.report())
    return [report, cov], False


def cmd_ringdown(cfg: RunConfig, out: Path):
    res = ex.ringdown(cfg)
    files = [
        write_csv(out / "ringdown_intensity.csv", "gate_delay_us,mech_intensity", zip(res.delays_us, res.intensity)),
    ]
    res.spectrum.to_csv(out / "ringdown_spectrum.csv")
    fit = out / "ringdown_fit.txt"
    fit.write_text(
        f"amplitude={float(res.exp_fit.amplitude)!r}\n"
        f"lifetime_s={float(res.exp_fit.lifetime)!r}\n"
        f"exp_residual={float(res.exp_fit.residual_norm)!r}\n"
        + res.lorentz.report()
        + f"linewidth_lifetime_mismatch={res.consistency!r}\n",
        encoding="utf-8",
    )
    sys.stdout.write(fit.read_text(encoding="utf-8"))
    return files + [out / "ringdown_spectrum.csv", fit], False


COMMANDS = {
    "efficiency-sweep": (cmd_efficiency_sweep, "conversion efficiency versus P1 at several P2"),
    "transient": (cmd_transient, "gated output power versus gate delay"),
    "spectral-response": (cmd_spectral_response, "gated output power versus signal detuning"),
    "mechanical-probe": (cmd_mechanical_probe, "probe-gated mechanical intensity versus P1 and P2"),
    "calibrate": (cmd_calibrate, "fit power-to-cooperativity constants and eta1*eta2"),
    "ringdown": (cmd_ringdown, "free ring-down: lifetime and displacement linewidth"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omx", description="Optomechanical wavelength-conversion simulator")
    parser.add_argument("--version", action="version", version=f"omx {__version__}")
    parser.add_argument("--dump-default-config", action="store_true", help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        if name == "calibrate":
            p.add_argument("data", help="measurement CSV (p1_mw,p2_mw,quantity,value,sigma)")
        p.add_argument("--config", help="key = value configuration file (defaults if omitted)")
        p.add_argument("--out", help="output directory (overrides run.output_dir)")
        p.add_argument("--seed", type=int, help="base RNG seed (overrides run.seed)")
        p.add_argument("--plot", action="store_true", help="also write an SVG plot per CSV")
        p.add_argument("--workers", type=int, help="worker threads for sweeps (0 = all cores)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_default_config:
        sys.stdout.write(RunConfig().dumps())
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.run.seed = args.seed
        if args.workers is not None:
            cfg.run.workers = args.workers
        out = Path(args.out or cfg.run.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        fn = COMMANDS[args.command][0]
        if args.command == "calibrate":
            files, logx = fn(cfg, out, args.data)
        else:
            files, logx = fn(cfg, out)
    except (ConfigError, SchemaError, OSError) as exc:
        print(f"omx: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, StepSizeError, ArithmeticError) as exc:
        print(f"omx: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FitError, CalibrationError, ValueError) as exc:
        print(f"omx: fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    if args.plot or cfg.run.plot:
        for f in files:
            if f.suffix == ".csv" and not f.name.startswith("calibration"):
                plot_csv(f, logx=logx)
    for f in files:
        print(os.fspath(f), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
