"""Scenario runners behind the CLI subcommands.

Each returns plain data (lists of rows, fits); writing files is the CLI's
job. Sweep points run on a thread pool (the integrator kernel releases the
GIL) and come back in sweep order.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .config import RunConfig, sweep_values
from .detection import (
    ExponentialFit,
    GateWindow,
    LorentzianFit,
    PowerSpectrum,
    fit_exponential,
    fit_lorentzian,
    gated_power_spectrum,
    heterodyne_trace,
    mechanical_intensity_probe,
    total_power,
)
from .dynamics import ProbeWindow, PulseProgram, TimeSeries, integrate, sweep_seed
from .model import ModeState, coupling_from_cooperativity, optical_power, steady_state_efficiency


def parallel_map(fn: Callable, items: Sequence, workers: int = 0) -> list:
    n = workers or os.cpu_count() or 1
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _gated_output_flux(cfg: RunConfig, params, program: PulseProgram, gate: GateWindow, seed: int) -> float:
    """Mean converted-signal photon flux inside ``gate``."""
    s_in = cfg.signal_amplitude(params)
    traj = integrate(params, program, s_in, cfg.dt, gate.stop, cfg.thermal_drive(seed))
    spec = gated_power_spectrum(heterodyne_trace(traj, params), gate, **cfg.spectrum_kw())
    return cfg.detection.cal_factor * total_power(spec)


# --------------------------------------------------------------------------
# conversion efficiency versus P1 at several P2


def efficiency_sweep(cfg: RunConfig) -> Dict[float, List[Tuple[float, float, float]]]:
    """{p2_mw: [(p1_mw, chi_steady, chi_gated), ...]}"""
    e = cfg.efficiency
    p1_grid = sweep_values(e)
    gate = GateWindow(cfg.detection.gate_start_us * 1e-6, cfg.detection.gate_length_us * 1e-6)
    program = cfg.pulse_program()
    jobs = []
    for j, (p2, eta_prod) in enumerate(zip(e.p2_mw, e.eta_product)):
        eta = math.sqrt(eta_prod)
        for i, p1 in enumerate(p1_grid):
            jobs.append((j, p2, eta, float(p1), sweep_seed(cfg.run.seed, j * len(p1_grid) + i)))

    def run(job):
        _, p2, eta, p1, seed = job
        params = cfg.system_params(p1, p2, eta, eta)
        chi_ss = steady_state_efficiency(params.c1, params.c2, eta, eta)
        flux_in = cfg.signal_amplitude(params) ** 2
        chi_gated = _gated_output_flux(cfg, params, program, gate, seed) / flux_in if flux_in > 0 else 0.0
        return p1, float(chi_ss), float(chi_gated)

    results = parallel_map(run, jobs, cfg.run.workers)
    out: Dict[float, list] = {p2: [] for p2 in e.p2_mw}
    for job, row in zip(jobs, results):
        out[job[1]].append(row)
    return out


# --------------------------------------------------------------------------
# output power versus gate delay


def transient(cfg: RunConfig) -> Dict[float, List[Tuple[float, float]]]:
    """{duration_us: [(gate_delay_us, output_power_w), ...]}"""
    tr = cfg.transient
    delays = sweep_values(tr)
    gl = tr.gate_length_us * 1e-6
    params = cfg.system_params(tr.p1_mw, tr.p2_mw)
    s_in = cfg.signal_amplitude(params)
    w2 = params.mode2.resonance

    def run(job):
        k, duration = job
        program = cfg.pulse_program(duration)
        t_end = float(delays[-1]) * 1e-6 + gl
        traj = integrate(params, program, s_in, cfg.dt, t_end, cfg.thermal_drive(sweep_seed(cfg.run.seed, k)))
        het = heterodyne_trace(traj, params)
        rows = []
        for d in delays:
            spec = gated_power_spectrum(het, GateWindow(float(d) * 1e-6, gl), **cfg.spectrum_kw())
            flux = cfg.detection.cal_factor * total_power(spec)
            rows.append((float(d), float(optical_power(flux, w2))))
        return rows

    results = parallel_map(run, list(enumerate(tr.durations_us)), cfg.run.workers)
    return dict(zip(tr.durations_us, results))


def transient_output(cfg: RunConfig, p1_mw, p2_mw, duration_us, t_end_us, gate_length_us, delays_us):
    """Gated output photon flux at each delay for one drive setting."""
    params = cfg.system_params(p1_mw, p2_mw)
    program = cfg.pulse_program(duration_us)
    traj = integrate(params, program, cfg.signal_amplitude(params), cfg.dt, t_end_us * 1e-6)
    het = heterodyne_trace(traj, params)
    return np.array(
        [
            total_power(gated_power_spectrum(het, GateWindow(d * 1e-6, gate_length_us * 1e-6), **cfg.spectrum_kw()))
            for d in delays_us
        ]
    )


# --------------------------------------------------------------------------
# output power versus signal detuning


def spectral_response(cfg: RunConfig, p1_mw=None, p2_mw=None) -> Dict[float, List[Tuple[float, float]]]:
    """{duration_us: [(delta_hz, output_power_w), ...]}; the gate is centered
    in the second half of the pulse."""
    sp = cfg.spectral
    p1 = sp.p1_mw if p1_mw is None else p1_mw
    p2 = sp.p2_mw if p2_mw is None else p2_mw
    deltas = sweep_values(sp)
    params = cfg.system_params(p1, p2)
    w2 = params.mode2.resonance
    jobs = [
        (dur, float(dh), sweep_seed(cfg.run.seed, j * len(deltas) + i))
        for j, dur in enumerate(sp.durations_us)
        for i, dh in enumerate(deltas)
    ]

    def run(job):
        dur, dh, seed = job
        program = cfg.pulse_program(dur, delta=2 * math.pi * dh)
        gate = GateWindow.centered(0.75 * dur * 1e-6, sp.gate_length_us * 1e-6)
        return dh, float(optical_power(_gated_output_flux(cfg, params, program, gate, seed), w2))

    results = parallel_map(run, jobs, cfg.run.workers)
    out: Dict[float, list] = {d: [] for d in sp.durations_us}
    for job, row in zip(jobs, results):
        out[job[0]].append(row)
    return out


# --------------------------------------------------------------------------
# mechanical intensity read out by a delayed weak probe


def _probe_intensity(cfg: RunConfig, p1: float, p2: float, seed: int) -> float:
    params = cfg.system_params(p1, p2)
    program = cfg.probe_program(params)
    traj = integrate(params, program, cfg.signal_amplitude(params), cfg.dt, program.probe.stop, cfg.thermal_drive(seed))
    return mechanical_intensity_probe(
        params, program, traj, gate_length=cfg.probe.gate_length_us * 1e-6, **cfg.spectrum_kw()
    )


def mechanical_probe(cfg: RunConfig):
    """Returns (p1 sweep rows at P2 = 0, p2 sweep rows at fixed P1)."""
    grid = [float(v) for v in sweep_values(cfg.probe)]
    n = len(grid)
    jobs = [(p, 0.0, sweep_seed(cfg.run.seed, i)) for i, p in enumerate(grid)]
    jobs += [(cfg.probe.p2_sweep_p1_mw, p, sweep_seed(cfg.run.seed, n + i)) for i, p in enumerate(grid)]
    vals = parallel_map(lambda j: _probe_intensity(cfg, *j), jobs, cfg.run.workers)
    return list(zip(grid, vals[:n])), list(zip(grid, vals[n:]))


# --------------------------------------------------------------------------
# free ring-down: gate-delay series and displacement spectrum


@dataclass
class RingdownResult:
    delays_us: np.ndarray
    intensity: np.ndarray
    exp_fit: ExponentialFit
    spectrum: PowerSpectrum
    lorentz: LorentzianFit

    @property
    def consistency(self) -> float:
        """Relative mismatch of 2*pi*linewidth against 1/lifetime."""
        return float(abs(2 * math.pi * self.lorentz.fwhm * self.exp_fit.lifetime - 1.0))


def ringdown_intensities(cfg: RunConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Probe-gated |beta|^2 of a freely decaying mode at each probe delay.

    The probe pulse starts at the delay; the gate sits at its center.
    """
    r = cfg.ringdown
    delays = sweep_values(r)
    params = cfg.system_params(0.0, 0.0)
    p = cfg.probe
    g = float(coupling_from_cooperativity(p.cooperativity, params.mech.gamma_m, params.mode1.kappa_total))
    y0 = ModeState(0j, 0j, complex(math.sqrt(r.initial_phonons)))

    def run(job):
        i, d = job
        start = float(d) * 1e-6
        probe = ProbeWindow(start, start + p.duration_us * 1e-6, g)
        program = PulseProgram(probe=probe)
        traj = integrate(params, program, 0.0, cfg.dt, probe.stop, cfg.thermal_drive(sweep_seed(cfg.run.seed, i)), y0=y0)
        return mechanical_intensity_probe(params, program, traj, gate_length=p.gate_length_us * 1e-6, **cfg.spectrum_kw())

    vals = parallel_map(run, list(enumerate(delays)), cfg.run.workers)
    gate_centers = delays + 0.5 * p.duration_us
    return gate_centers, np.array(vals)


def ringdown_spectrum(cfg: RunConfig) -> PowerSpectrum:
    """Displacement spectrum of the free decay, on the heterodyne frequency
    axis (offset omega_m / 2 pi)."""
    r = cfg.ringdown
    params = cfg.system_params(0.0, 0.0)
    y0 = ModeState(0j, 0j, complex(math.sqrt(r.initial_phonons)))
    t_rec = r.spectrum_record_us * 1e-6
    traj = integrate(
        params, PulseProgram(), 0.0, cfg.dt, t_rec, cfg.thermal_drive(sweep_seed(cfg.run.seed, 10**6)),
        y0=y0, record_stride=r.spectrum_stride,
    )
    rec = TimeSeries(traj.t0, traj.dt, traj.beta)
    gate = GateWindow(0.0, t_rec)
    return gated_power_spectrum(rec, gate, f_offset=cfg.system.omega_m_hz, **cfg.spectrum_kw())


def ringdown(cfg: RunConfig) -> RingdownResult:
    t_us, intensity = ringdown_intensities(cfg)
    exp_fit = fit_exponential(t_us * 1e-6, intensity)
    spectrum = ringdown_spectrum(cfg)
    lorentz = fit_lorentzian(spectrum)
    return RingdownResult(t_us, intensity, exp_fit, spectrum, lorentz)
