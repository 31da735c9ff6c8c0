"""Gated spectrum-analyzer emulation and lineshape fits.

Spectra are two-sided densities of complex baseband records, normalized so
that ``sum(density) * df`` equals the mean squared amplitude inside the
gate. With records in sqrt(photons/s) the density is photon flux per Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import least_squares

from .dynamics import PulseProgram, TimeSeries, Trajectory
from .model import SystemParams, cooperativity

MAX_FIT_EVALS = 2000


class FitError(RuntimeError):
    """Raised when a fit cannot produce a trustworthy result.

    ``best`` holds the best parameter iterate (or None) and ``residual``
    its residual norm.
    """

    def __init__(self, message, best=None, residual=math.nan):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class GateWindow:
    start: float
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("gate length must be positive")

    @property
    def stop(self) -> float:
        return self.start + self.length

    @classmethod
    def centered(cls, center: float, length: float) -> "GateWindow":
        return cls(center - 0.5 * length, length)


@dataclass
class PowerSpectrum:
    f0: float
    df: float
    density: np.ndarray

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        if not self.df > 0:
            raise ValueError("df must be positive")

    @property
    def freqs(self) -> np.ndarray:
        return self.f0 + self.df * np.arange(len(self.density))

    @property
    def f_max(self) -> float:
        return self.f0 + self.df * (len(self.density) - 1)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("f_hz,density_w_per_hz\n")
            for f, d in zip(self.freqs, self.density):
                fh.write(f"{float(f)!r},{float(d)!r}\n")


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    area: float
    offset: float
    residual_norm: float

    def __call__(self, f):
        return lorentzian(f, self.center, self.fwhm, self.area, self.offset)

    def report(self) -> str:
        return (
            f"center_hz={self.center!r}\nfwhm_hz={self.fwhm!r}\narea_w={self.area!r}\n"
            f"offset={self.offset!r}\nresidual={self.residual_norm!r}\n"
        )


class ExponentialFit(NamedTuple):
    amplitude: float
    lifetime: float
    residual_norm: float


def lorentzian(f, center, fwhm, area, offset=0.0):
    hw = 0.5 * fwhm
    return offset + (area / math.pi) * hw / ((np.asarray(f) - center) ** 2 + hw**2)


def gated_power_spectrum(
    trace: TimeSeries,
    gate: GateWindow,
    *,
    pad_factor: int = 8,
    window: str = "rect",
    rbw_hz: float = 0.0,
    f_offset: float = 0.0,
    cal_factor: float = 1.0,
) -> PowerSpectrum:
    """Periodogram of the samples of ``trace`` inside ``gate``.

    The segment is zero padded to ``pad_factor`` times its length to sample
    the lineshape finely; padding does not change the integrated power.
    ``f_offset`` shifts the frequency axis (heterodyne carrier).
    """
    i0 = trace.index_of(gate.start)
    n = int(round(gate.length / trace.dt))
    if i0 < 0 or i0 + n > len(trace):
        raise ValueError(
            f"gate [{gate.start:g}, {gate.stop:g}) s lies outside the record "
            f"[{trace.t0:g}, {trace.t0 + len(trace) * trace.dt:g}) s"
        )
    if n < 16:
        raise ValueError(f"gate holds {n} samples, at least 16 required")
    x = np.asarray(trace.samples[i0 : i0 + n], dtype=complex)
    if window == "rect":
        norm = n
    elif window == "hann":
        w = np.hanning(n)
        x = x * w
        norm = float(np.sum(w**2))
    else:
        raise ValueError(f"unknown window {window!r}")
    m = max(int(pad_factor), 1) * n
    spec = np.fft.fftshift(np.fft.fft(x, m))
    density = np.abs(spec) ** 2 * trace.dt / norm
    df = 1.0 / (m * trace.dt)
    if rbw_hz > 0:
        # the sampled spectrum is periodic, so wrapping conserves total power
        sigma_bins = rbw_hz / (2 * math.sqrt(2 * math.log(2))) / df
        density = gaussian_filter1d(density, sigma_bins, mode="wrap")
    f0 = f_offset - (m // 2) * df
    return PowerSpectrum(f0, df, cal_factor * density)


def integrated_power(spectrum: PowerSpectrum, band: Sequence[float]) -> float:
    """Integral of the piecewise-linear density over ``band`` = (f_lo, f_hi)."""
    f_lo, f_hi = float(band[0]), float(band[1])
    if not f_hi > f_lo:
        raise ValueError(f"empty or inverted band ({f_lo}, {f_hi})")
    tol = 1e-9 * spectrum.df
    if f_lo < spectrum.f0 - tol or f_hi > spectrum.f_max + tol:
        raise ValueError("band extends beyond the spectrum")
    f = spectrum.freqs
    d = spectrum.density
    inside = (f > f_lo) & (f < f_hi)
    x = np.concatenate(([f_lo], f[inside], [f_hi]))
    y = np.concatenate(([np.interp(f_lo, f, d)], d[inside], [np.interp(f_hi, f, d)]))
    return float(np.trapezoid(y, x))


def total_power(spectrum: PowerSpectrum) -> float:
    """Mean squared amplitude in the gate (rectangle rule, exact Parseval)."""
    return float(np.sum(spectrum.density) * spectrum.df)


def half_max_width(x, y, i_peak: Optional[int] = None, baseline: float = 0.0):
    """Full width at half maximum by linear interpolation of the crossings.

    Returns (left, right) crossing positions. Raises ValueError when the
    curve does not fall below half maximum on both sides.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float) - baseline
    i = int(np.argmax(y)) if i_peak is None else i_peak
    half = 0.5 * y[i]
    left = np.nonzero(y[:i] <= half)[0]
    right = np.nonzero(y[i:] <= half)[0]
    if len(left) == 0 or len(right) == 0 or not half > 0:
        raise ValueError("no half-maximum crossing on both sides of the peak")
    l, r = left[-1], i + right[0]
    xl = np.interp(half, [y[l], y[l + 1]], [x[l], x[l + 1]])
    xr = np.interp(half, [y[r], y[r - 1]], [x[r], x[r - 1]])
    return xl, xr


def fit_lorentzian(
    spectrum: PowerSpectrum,
    initial_guess: Optional[LorentzianFit] = None,
    *,
    span_fwhm: Optional[float] = 40.0,
) -> LorentzianFit:
    """Least-squares fit of offset + Lorentzian to a single-peaked spectrum.

    Only points within ``span_fwhm`` initial linewidths of the initial
    center are used (None fits the whole spectrum).
    """
    f = spectrum.freqs
    d = spectrum.density
    top, bottom = float(np.max(d)), float(np.min(d))
    if not top - bottom > 1e-12 * max(abs(top), 1e-300):
        raise FitError("spectrum has no peak")
    if initial_guess is None:
        i = int(np.argmax(d))
        try:
            xl, xr = half_max_width(f, d, i, baseline=bottom)
        except ValueError as exc:
            raise FitError(f"cannot initialize fit: {exc}") from exc
        c0, w0 = float(f[i]), float(xr - xl)
        lo, hi = max(c0 - 10 * w0, f[0]), min(c0 + 10 * w0, f[-1])
        area0 = integrated_power(spectrum, (lo, hi)) - bottom * (hi - lo)
        guess = (c0, w0, max(area0, 0.5 * math.pi * w0 * (top - bottom)), bottom)
    else:
        g = initial_guess
        guess = (g.center, g.fwhm, g.area, g.offset)
    c0, w0, a0, b0 = guess
    if not w0 > 0:
        raise FitError("initial linewidth must be positive")
    if span_fwhm is not None:
        sel = np.abs(f - c0) <= span_fwhm * w0
        if np.count_nonzero(sel) < 8:
            raise FitError("too few spectral points in the fit span")
        f, d = f[sel], d[sel]

    # dimensionless coordinates keep the Jacobian well conditioned when the
    # center (~1e8 Hz) dwarfs the width (~1e4 Hz)
    h0 = top - bottom
    u = (f - c0) / w0
    z = d / h0

    def resid(p):
        uc, uw, ua, ub = p
        return lorentzian(u, uc, uw, ua, ub) - z

    p0 = np.array([0.0, 1.0, a0 / (h0 * w0), b0 / h0])
    sol = least_squares(resid, p0, method="lm", xtol=1e-12, ftol=1e-12, max_nfev=MAX_FIT_EVALS)
    uc, uw, ua, ub = sol.x
    rnorm = float(np.linalg.norm(sol.fun) / max(np.linalg.norm(z), 1e-300))
    best = (float(c0 + uc * w0), float(abs(uw) * w0), float(ua * h0 * w0), float(ub * h0))
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitError(f"Lorentzian fit did not converge: {sol.message}", best, rnorm)
    if not uw > 0 or ua < 0:
        raise FitError("Lorentzian fit converged to an unphysical lineshape", best, rnorm)
    return LorentzianFit(best[0], best[1], best[2], best[3], rnorm)


def fit_exponential(t, intensity) -> ExponentialFit:
    """Least-squares fit of A * exp(-t / tau) to positive intensities."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if len(t) != len(y) or len(t) < 2:
        raise ValueError("need at least two (t, intensity) points")
    if np.any(~(y > 0)):
        raise ValueError("intensities must be positive")
    slope, icept = (float(v) for v in np.polyfit(t - t[0], np.log(y), 1))
    if not slope < 0:
        raise FitError("intensities do not decay", None, math.nan)
    tau0, a0 = -1.0 / slope, math.exp(icept)
    scale = float(np.max(y))
    s = (t - t[0]) / tau0

    def resid(p):
        return p[0] * np.exp(-s / p[1]) - y / scale

    p0 = np.array([a0 / scale, 1.0])
    if len(t) == 2:
        rn = float(np.linalg.norm(resid(p0)))
        return ExponentialFit(float(a0 * math.exp(t[0] / tau0)), float(tau0), rn)
    sol = least_squares(resid, p0, method="lm", xtol=1e-12, ftol=1e-12, max_nfev=MAX_FIT_EVALS)
    amp, rel_tau = sol.x
    rnorm = float(np.linalg.norm(sol.fun) / np.linalg.norm(y / scale))
    tau = float(rel_tau * tau0)
    best = (float(amp * scale * math.exp(t[0] / tau)), tau)
    if sol.status <= 0 or not tau > 0:
        raise FitError(f"exponential fit did not converge: {sol.message}", best, rnorm)
    return ExponentialFit(best[0], tau, rnorm)


# --------------------------------------------------------------------------
# measurement chain


def heterodyne_trace(traj: Trajectory, params: SystemParams) -> TimeSeries:
    """Complex baseband record of the mode-2 output (the converted signal)."""
    return TimeSeries(traj.t0, traj.dt, math.sqrt(params.mode2.kappa_ext) * traj.alpha2)


def probe_output_trace(traj: Trajectory, params: SystemParams, program: PulseProgram, s_in=0.0) -> TimeSeries:
    s = program.signal(s_in, traj.times)
    return TimeSeries(traj.t0, traj.dt, math.sqrt(params.mode1.kappa_ext) * traj.alpha1 - s)


def probe_gain(params: SystemParams, g_probe: float) -> float:
    """Output flux per phonon of the probe's anti-Stokes sideband,
    4 g^2 kappa_ext / kappa^2 = eta1 * C_probe * gamma_m."""
    k1 = params.mode1
    return 4.0 * g_probe**2 * k1.kappa_ext / k1.kappa_total**2


def mechanical_intensity_probe(
    params: SystemParams,
    program: PulseProgram,
    trajectory: Trajectory,
    *,
    gate_length: float = 1e-6,
    s_in=0.0,
    **spectrum_kw,
) -> float:
    """|beta|^2 estimate from the gated spectrum of the weak probe's output.

    The gate of ``gate_length`` sits at the center of the probe window; the
    spectrally integrated power is divided by the probe transduction gain.
    """
    probe = program.probe
    if probe is None:
        raise ValueError("pulse program has no probe window")
    if program.drive1_on is not None and probe.overlaps(program.drive1_on):
        raise ValueError("probe window overlaps the drive-1 window")
    c_probe = cooperativity(probe.g_probe, params.mech.gamma_m, params.mode1.kappa_total)
    if c_probe > 0.05:
        raise ValueError(f"probe cooperativity {c_probe:.3g} is not weak (> 0.05)")
    if probe.g_probe == 0:
        raise ValueError("probe coupling is zero")
    gate = GateWindow.centered(probe.center, gate_length)
    trace = probe_output_trace(trajectory, params, program, s_in)
    spec = gated_power_spectrum(trace, gate, **spectrum_kw)
    return total_power(spec) / probe_gain(params, probe.g_probe)
