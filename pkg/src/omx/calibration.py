"""Inference of the power-to-cooperativity constants and the output
coupling product from mechanical-intensity and efficiency data."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .model import PowerCalibration, photon_flux, steady_state_efficiency

QUANTITIES = ("mech_intensity", "efficiency", "output_power")
CSV_HEADER = "p1_mw,p2_mw,quantity,value,sigma"

MAX_ITER = 200
STEP_TOL = 1e-10
START_GRID = np.geomspace(0.05, 1.0, 3)  # 1/mW


class SchemaError(ValueError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column!r}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class CalibrationError(RuntimeError):
    def __init__(self, message, best=None, residual=math.nan):
        super().__init__(message)
        self.best = best
        self.residual = residual


class InsufficientDataError(CalibrationError):
    pass


@dataclass(frozen=True)
class MeasurementRow:
    p1: float
    p2: float
    quantity: str
    value: float
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0:
            raise ValueError("powers must be non-negative")
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        if not math.isfinite(self.value):
            raise ValueError("value must be finite")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive when present")


@dataclass(frozen=True)
class FitResult:
    k1: float
    k2: float
    eta_product: Optional[float]
    residual_norm: float
    covariance: np.ndarray
    scale: float = 1.0

    @property
    def calibration(self) -> PowerCalibration:
        return PowerCalibration(self.k1, self.k2)

    def report(self) -> str:
        lines = [
            f"k1_per_mw={self.k1!r}",
            f"k2_per_mw={self.k2!r}",
            f"eta_product={'' if self.eta_product is None else repr(self.eta_product)}",
            f"intensity_scale={self.scale!r}",
            f"residual={self.residual_norm!r}",
            f"sigma_k1_per_mw={math.sqrt(max(self.covariance[0, 0], 0.0))!r}",
            f"sigma_k2_per_mw={math.sqrt(max(self.covariance[1, 1], 0.0))!r}",
        ]
        return "\n".join(lines) + "\n"

    def covariance_csv(self) -> str:
        out = ["param,k1_per_mw,k2_per_mw"]
        for name, row in zip(("k1_per_mw", "k2_per_mw"), self.covariance):
            out.append(f"{name},{float(row[0])!r},{float(row[1])!r}")
        return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# input


def _parse_float(text, line, column):
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"not a number: {text!r}", line, column) from None
    if not math.isfinite(value):
        raise SchemaError(f"not finite: {text!r}", line, column)
    return value


def load_measurements(source) -> List[MeasurementRow]:
    """Parse the measurement CSV (path or text stream).

    Header must be exactly ``p1_mw,p2_mw,quantity,value,sigma``; sigma may
    be empty. Powers stay in mW.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return load_measurements(fh)
    text = source.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise SchemaError(f"missing or wrong header, expected {CSV_HEADER!r}", 1)
    rows = []
    for lineno, rec in enumerate(csv.reader(io.StringIO("\n".join(lines[1:]))), start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != 5:
            raise SchemaError(f"expected 5 fields, got {len(rec)}", lineno)
        p1 = _parse_float(rec[0], lineno, "p1_mw")
        p2 = _parse_float(rec[1], lineno, "p2_mw")
        quantity = rec[2].strip()
        if quantity not in QUANTITIES:
            raise SchemaError(f"unknown quantity {quantity!r}", lineno, "quantity")
        value = _parse_float(rec[3], lineno, "value")
        sigma = None
        if rec[4].strip():
            sigma = _parse_float(rec[4], lineno, "sigma")
            if not sigma > 0:
                raise SchemaError("sigma must be positive", lineno, "sigma")
        for name, p in (("p1_mw", p1), ("p2_mw", p2)):
            if p < 0:
                raise SchemaError("negative power", lineno, name)
        rows.append(MeasurementRow(p1, p2, quantity, value, sigma))
    return rows


def write_measurements(rows: Iterable[MeasurementRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            sigma = "" if r.sigma is None else repr(r.sigma)
            fh.write(f"{r.p1!r},{r.p2!r},{r.quantity},{r.value!r},{sigma}\n")


def efficiency_from_output_power(rows: Sequence[MeasurementRow], p_in_mw, wavelength_in, wavelength_out):
    """Convert ``output_power`` rows (W) into photon-flux efficiency rows."""
    w_in = 2 * math.pi * 299792458.0 / wavelength_in
    w_out = 2 * math.pi * 299792458.0 / wavelength_out
    flux_in = photon_flux(p_in_mw * 1e-3, w_in)
    out = []
    for r in rows:
        if r.quantity != "output_power":
            out.append(r)
            continue
        f = photon_flux(1.0, w_out) / flux_in
        sigma = None if r.sigma is None else r.sigma * f
        out.append(MeasurementRow(r.p1, r.p2, "efficiency", r.value * f, sigma))
    return out


# --------------------------------------------------------------------------
# fits


def _weights(rows):
    if rows and all(r.sigma is not None for r in rows):
        return np.array([1.0 / r.sigma for r in rows]), True
    return np.ones(len(rows)), False


def intensity_shape(k1, k2, p1, p2):
    """Mechanical intensity up to a constant: C1 / (1 + C1 + C2)^2."""
    c1 = k1 * np.asarray(p1)
    c2 = k2 * np.asarray(p2)
    return c1 / (1.0 + c1 + c2) ** 2


def fit_proportionality(rows: Sequence[MeasurementRow], *, starts=START_GRID) -> FitResult:
    """Fit k1, k2 (and a nuisance intensity scale) to mechanical-intensity data.

    Needs a P1 sweep at P2 = 0 and a P2 sweep (P2 > 0), four points each.
    Weighted by 1/sigma when every row carries sigma.
    """
    rows = [r for r in rows if r.quantity == "mech_intensity"]
    n_p1 = sum(1 for r in rows if r.p2 == 0)
    n_p2 = sum(1 for r in rows if r.p2 > 0)
    if n_p1 < 4 or n_p2 < 4:
        raise InsufficientDataError(
            f"need >= 4 points in both the P1 sweep (have {n_p1}) and the P2 sweep (have {n_p2})"
        )
    p1 = np.array([r.p1 for r in rows])
    p2 = np.array([r.p2 for r in rows])
    d = np.array([r.value for r in rows])
    w, weighted = _weights(rows)
    if not np.any(d != 0):
        raise CalibrationError("all mechanical intensities are zero")

    def profile(u):
        f = intensity_shape(math.exp(u[0]), math.exp(u[1]), p1, p2)
        wf = w * f
        ff = float(wf @ wf)
        scale = float(wf @ (w * d)) / ff if ff > 0 else 0.0
        return scale, w * (scale * f - d)

    def resid(u):
        return profile(u)[1]

    best = None
    for k1_0 in starts:
        for k2_0 in starts:
            sol = least_squares(
                resid, np.log([k1_0, k2_0]), method="lm",
                xtol=STEP_TOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITER * 3,
            )
            k1, k2 = np.exp(sol.x)
            cost = float(sol.fun @ sol.fun)
            # residuals equal to 9 significant digits count as ties
            key = (float(f"{cost:.8e}"), float(k1), float(k2))
            if sol.status > 0 and (best is None or key < best[0]):
                best = (key, sol)
    if best is None:
        raise CalibrationError("no multi-start branch converged")
    sol = best[1]
    k1, k2 = (float(v) for v in np.exp(sol.x))
    scale, r = profile(sol.x)
    if not scale > 0:
        raise CalibrationError("fitted intensity scale is not positive", (k1, k2), float(np.linalg.norm(r)))
    jac = sol.jac / np.array([k1, k2])  # d r / d k
    n, npar = len(d), 3
    rss = float(r @ r)
    s2 = 1.0 if weighted else rss / max(n - npar, 1)
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.inf)
    rnorm = math.sqrt(rss) / float(np.linalg.norm(w * d))
    return FitResult(k1, k2, None, rnorm, cov, scale)


def efficiency_model(cal, p1, p2):
    """Efficiency for unit output coupling at the calibrated cooperativities."""
    return steady_state_efficiency(cal.k1 * np.asarray(p1, dtype=float), cal.k2 * np.asarray(p2, dtype=float))


def fit_eta(rows: Sequence[MeasurementRow], cal: FitResult) -> float:
    """One-parameter least-squares scale of the efficiency model: eta1*eta2."""
    rows = [r for r in rows if r.quantity == "efficiency"]
    if not rows:
        raise InsufficientDataError("no efficiency rows")
    m = efficiency_model(cal, [r.p1 for r in rows], [r.p2 for r in rows])
    d = np.array([r.value for r in rows])
    w, _ = _weights(rows)
    num = float(np.sum(w**2 * m * d))
    den = float(np.sum(w**2 * m * m))
    if not np.any(d != 0) or den == 0:
        raise CalibrationError("efficiency data carry no signal")
    eta = num / den
    if not 0 < eta <= 1:
        raise CalibrationError(f"fitted eta1*eta2 = {eta:.4g} outside (0, 1]", eta)
    return eta


def calibrate(rows: Sequence[MeasurementRow]) -> FitResult:
    fit = fit_proportionality(rows)
    if any(r.quantity == "efficiency" for r in rows):
        fit = replace(fit, eta_product=fit_eta(rows, fit))
    return fit


def predict_efficiency_curve(cal, p1_grid, p2, eta_product=None):
    """[(p1, chi)] from the calibrated constants and eta1*eta2."""
    eta = getattr(cal, "eta_product", None) if eta_product is None else eta_product
    if eta is None:
        raise ValueError("calibration has no eta1*eta2; run fit_eta first")
    p1 = np.asarray(p1_grid, dtype=float)
    chi = eta * efficiency_model(cal, p1, np.full_like(p1, p2))
    return [(float(a), float(b)) for a, b in zip(p1, np.atleast_1d(chi))]


def synthetic_dataset(
    k1: float,
    k2: float,
    eta_product: Optional[float] = None,
    *,
    p1_grid=np.linspace(0.0, 30.0, 16),
    p2_grid=np.linspace(0.0, 30.0, 16),
    p2_sweep_p1: float = 1.0,
    eff_p2=(2.0, 11.0, 21.0),
    eff_p1=np.linspace(1.0, 30.0, 10),
    scale: float = 1.0,
    noise: float = 0.0,
    seed: int = 0,
) -> List[MeasurementRow]:
    """Rows mirroring the two probe sweeps (and optional efficiency curves),
    with optional multiplicative Gaussian noise of relative size ``noise``."""
    rng = np.random.default_rng(seed)
    cal = PowerCalibration(k1, k2)
    rows = []

    def jitter(v):
        return float(v * (1 + noise * rng.standard_normal())) if noise else float(v)

    for p in p1_grid:
        rows.append(MeasurementRow(float(p), 0.0, "mech_intensity", jitter(scale * intensity_shape(k1, k2, p, 0.0))))
    for p in p2_grid:
        v = scale * intensity_shape(k1, k2, p2_sweep_p1, p)
        rows.append(MeasurementRow(float(p2_sweep_p1), float(p), "mech_intensity", jitter(v)))
    if eta_product is not None:
        for p2 in eff_p2:
            for p1 in eff_p1:
                chi = eta_product * efficiency_model(cal, p1, p2)
                rows.append(MeasurementRow(float(p1), float(p2), "efficiency", jitter(chi)))
    return rows
