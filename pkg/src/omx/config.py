"""Flat ``section.key = value`` run configuration.

Frequencies are ordinary (Hz) and times are in microseconds in the file;
conversion to angular rates and seconds happens here. Defaults describe the
silica-microsphere device (800 nm -> 637 nm conversion).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields
from typing import List

import numpy as np

from .dynamics import ProbeWindow, PulseProgram, ThermalDrive, Window
from .model import (
    C_LIGHT,
    TWO_PI,
    CouplingParams,
    MechanicalModeParams,
    OpticalModeParams,
    PowerCalibration,
    SystemParams,
    coupling_from_cooperativity,
    photon_flux,
)


class ConfigError(ValueError):
    def __init__(self, message, path=None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class SystemSection:
    kappa1_hz: float = 30e6
    kappa2_hz: float = 30e6
    eta1: float = 0.45
    eta2: float = 0.45
    omega_m_hz: float = 101e6
    gamma_m_hz: float = 20e3
    drive_detuning1_hz: float = -101e6
    drive_detuning2_hz: float = -101e6
    wavelength1_nm: float = 800.0
    wavelength2_nm: float = 637.0


@dataclass
class CalibrationSection:
    k1_per_mw: float = 0.2
    k2_per_mw: float = 1.0 / 15.0
    eta_product: float = 0.2025


@dataclass
class SignalSection:
    power_mw: float = 0.2
    detuning_hz: float = 101e6


@dataclass
class PulseSection:
    duration_us: float = 6.0
    envelope: str = "rectangular"
    rise_time_us: float = 0.05
    repetition_period_us: float = 120.0
    dt_ns: float = 0.5


@dataclass
class DetectionSection:
    gate_start_us: float = 4.0
    gate_length_us: float = 1.0
    pad_factor: int = 8
    window: str = "rect"
    rbw_hz: float = 0.0
    cal_factor: float = 1.0


@dataclass
class EfficiencySection:
    p2_mw: List[float] = field(default_factory=lambda: [2.0, 11.0, 21.0])
    eta_product: List[float] = field(default_factory=lambda: [0.2025, 0.2025, 0.25])
    sweep_start: float = 0.0
    sweep_stop: float = 30.0
    sweep_points: int = 31
    sweep_scale: str = "linear"


@dataclass
class TransientSection:
    p1_mw: float = 25.0
    p2_mw: float = 6.0
    durations_us: List[float] = field(default_factory=lambda: [6.0, 3.0])
    gate_length_us: float = 0.5
    sweep_start: float = 0.0
    sweep_stop: float = 8.0
    sweep_points: int = 33
    sweep_scale: str = "linear"


@dataclass
class SpectralSection:
    p1_mw: float = 16.0
    p2_mw: float = 3.0
    durations_us: List[float] = field(default_factory=lambda: [6.0, 3.0])
    gate_length_us: float = 1.0
    sweep_start: float = 100.2e6
    sweep_stop: float = 101.8e6
    sweep_points: int = 81
    sweep_scale: str = "linear"


@dataclass
class ProbeSection:
    drive_duration_us: float = 80.0
    delay_us: float = 1.0
    duration_us: float = 3.0
    gate_length_us: float = 1.0
    cooperativity: float = 0.01
    p2_sweep_p1_mw: float = 1.0
    sweep_start: float = 0.0
    sweep_stop: float = 30.0
    sweep_points: int = 31
    sweep_scale: str = "linear"


@dataclass
class RingdownSection:
    initial_phonons: float = 1e4
    sweep_start: float = 0.0
    sweep_stop: float = 30.0
    sweep_points: int = 16
    sweep_scale: str = "linear"
    spectrum_record_us: float = 160.0
    spectrum_stride: int = 100


@dataclass
class ThermalSection:
    enabled: bool = False
    n_th: float = 0.0


@dataclass
class RunSection:
    seed: int = 0
    workers: int = 0
    output_dir: str = "."
    plot: bool = False


SECTIONS = (
    ("system", SystemSection),
    ("calibration", CalibrationSection),
    ("signal", SignalSection),
    ("pulse", PulseSection),
    ("detection", DetectionSection),
    ("efficiency", EfficiencySection),
    ("transient", TransientSection),
    ("spectral", SpectralSection),
    ("probe", ProbeSection),
    ("ringdown", RingdownSection),
    ("thermal", ThermalSection),
    ("run", RunSection),
)

_CHOICES = {
    "pulse.envelope": ("rectangular", "raised-edge"),
    "detection.window": ("rect", "hann"),
}


@dataclass
class RunConfig:
    system: SystemSection = field(default_factory=SystemSection)
    calibration: CalibrationSection = field(default_factory=CalibrationSection)
    signal: SignalSection = field(default_factory=SignalSection)
    pulse: PulseSection = field(default_factory=PulseSection)
    detection: DetectionSection = field(default_factory=DetectionSection)
    efficiency: EfficiencySection = field(default_factory=EfficiencySection)
    transient: TransientSection = field(default_factory=TransientSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    ringdown: RingdownSection = field(default_factory=RingdownSection)
    thermal: ThermalSection = field(default_factory=ThermalSection)
    run: RunSection = field(default_factory=RunSection)

    # ---------------------------------------------------------------- io

    def dumps(self) -> str:
        out = []
        for name, _ in SECTIONS:
            sec = getattr(self, name)
            for f in fields(sec):
                out.append(f"{name}.{f.name} = {_format(getattr(sec, f.name))}")
            out.append("")
        return "\n".join(out)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        cfg = cls()
        sections = dict(SECTIONS)
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            sec_name, _, attr = key.partition(".")
            if sec_name not in sections or attr not in {f.name for f in fields(sections[sec_name])}:
                raise ConfigError("unknown key", key)
            sec = getattr(cfg, sec_name)
            default = getattr(sections[sec_name](), attr)
            setattr(sec, attr, _parse(value, default, key))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.loads(fh.read())
        except OSError as exc:
            raise ConfigError(str(exc), os.fspath(path)) from None

    # ---------------------------------------------------------- validation

    def validate(self) -> None:
        for key, choices in _CHOICES.items():
            sec, attr = key.split(".")
            if getattr(getattr(self, sec), attr) not in choices:
                raise ConfigError(f"must be one of {choices}", key)
        for name, _ in SECTIONS:
            sec = getattr(self, name)
            if hasattr(sec, "sweep_points"):
                if sec.sweep_points < 2:
                    raise ConfigError("need at least 2 sweep points", f"{name}.sweep_points")
                if sec.sweep_scale not in ("linear", "log"):
                    raise ConfigError("must be 'linear' or 'log'", f"{name}.sweep_scale")
                if sec.sweep_scale == "log" and not (sec.sweep_start > 0 and sec.sweep_stop > 0):
                    raise ConfigError("log sweep needs positive bounds", f"{name}.sweep_start")
        positive = [
            "pulse.duration_us", "pulse.dt_ns", "pulse.repetition_period_us",
            "detection.gate_length_us", "transient.gate_length_us", "spectral.gate_length_us",
            "probe.drive_duration_us", "probe.duration_us", "probe.gate_length_us",
            "probe.delay_us", "ringdown.spectrum_record_us", "ringdown.spectrum_stride",
            "system.wavelength1_nm", "system.wavelength2_nm", "detection.cal_factor",
            "calibration.k1_per_mw", "calibration.k2_per_mw", "detection.pad_factor",
        ]
        for key in positive:
            sec, attr = key.split(".")
            if not getattr(getattr(self, sec), attr) > 0:
                raise ConfigError("must be positive", key)
        non_negative = [
            "signal.power_mw", "transient.p1_mw", "transient.p2_mw", "spectral.p1_mw",
            "spectral.p2_mw", "probe.p2_sweep_p1_mw", "thermal.n_th", "detection.rbw_hz",
            "detection.gate_start_us", "ringdown.initial_phonons", "run.workers",
        ]
        for key in non_negative:
            sec, attr = key.split(".")
            if getattr(getattr(self, sec), attr) < 0:
                raise ConfigError("must be non-negative", key)
        if not 0 < self.probe.cooperativity <= 0.05:
            raise ConfigError("probe must be weak: 0 < C_probe <= 0.05", "probe.cooperativity")
        if len(self.efficiency.eta_product) != len(self.efficiency.p2_mw):
            raise ConfigError("needs one entry per efficiency.p2_mw", "efficiency.eta_product")
        for i, eta in enumerate(self.efficiency.eta_product):
            if not 0 <= eta <= 1:
                raise ConfigError("must lie in [0, 1]", f"efficiency.eta_product[{i}]")
        for key in ("efficiency.p2_mw", "transient.durations_us", "spectral.durations_us"):
            sec, attr = key.split(".")
            vals = getattr(getattr(self, sec), attr)
            if not vals or any(v < 0 for v in vals):
                raise ConfigError("must be a non-empty list of non-negative values", key)
        if not 0 <= self.calibration.eta_product <= 1:
            raise ConfigError("must lie in [0, 1]", "calibration.eta_product")
        try:
            self.system_params()
        except ValueError as exc:
            raise ConfigError(str(exc), "system") from None

    # ---------------------------------------------------------- conversion

    def system_params(self, p1_mw: float = 0.0, p2_mw: float = 0.0, eta1=None, eta2=None) -> SystemParams:
        """SystemParams in rad/s with couplings set from drive powers."""
        s = self.system
        eta1 = s.eta1 if eta1 is None else eta1
        eta2 = s.eta2 if eta2 is None else eta2
        k1, k2 = TWO_PI * s.kappa1_hz, TWO_PI * s.kappa2_hz
        mode1 = OpticalModeParams(k1, eta1 * k1, TWO_PI * C_LIGHT / (s.wavelength1_nm * 1e-9), TWO_PI * s.drive_detuning1_hz)
        mode2 = OpticalModeParams(k2, eta2 * k2, TWO_PI * C_LIGHT / (s.wavelength2_nm * 1e-9), TWO_PI * s.drive_detuning2_hz)
        mech = MechanicalModeParams(TWO_PI * s.omega_m_hz, TWO_PI * s.gamma_m_hz)
        c1, c2 = self.power_calibration().cooperativities(p1_mw, p2_mw)
        coupling = CouplingParams(
            coupling_from_cooperativity(c1, mech.gamma_m, k1),
            coupling_from_cooperativity(c2, mech.gamma_m, k2),
        )
        return SystemParams(mode1, mode2, mech, coupling)

    def power_calibration(self) -> PowerCalibration:
        return PowerCalibration(self.calibration.k1_per_mw, self.calibration.k2_per_mw)

    def signal_amplitude(self, params: SystemParams) -> float:
        """sqrt(photon flux) of the input signal."""
        return math.sqrt(photon_flux(self.signal.power_mw * 1e-3, params.mode1.resonance))

    @property
    def delta(self) -> float:
        return TWO_PI * self.signal.detuning_hz

    @property
    def dt(self) -> float:
        return self.pulse.dt_ns * 1e-9

    def pulse_program(self, duration_us=None, delta=None, probe=None) -> PulseProgram:
        d = (self.pulse.duration_us if duration_us is None else duration_us) * 1e-6
        w = Window(0.0, d)
        rep = max(self.pulse.repetition_period_us * 1e-6, d if probe is None else probe.stop)
        return PulseProgram(
            pulse_duration=d,
            envelope_shape=self.pulse.envelope,
            rise_time=self.pulse.rise_time_us * 1e-6,
            drive1_on=w,
            drive2_on=w,
            signal_on=w,
            probe=probe,
            signal_detuning=self.delta if delta is None else delta,
            repetition_period=rep,
        )

    def probe_program(self, params: SystemParams) -> PulseProgram:
        p = self.probe
        start = (p.drive_duration_us + p.delay_us) * 1e-6
        g = coupling_from_cooperativity(p.cooperativity, params.mech.gamma_m, params.mode1.kappa_total)
        win = ProbeWindow(start, start + p.duration_us * 1e-6, float(g))
        return self.pulse_program(p.drive_duration_us, probe=win)

    def thermal_drive(self, seed: int) -> ThermalDrive:
        return ThermalDrive(self.thermal.enabled, self.thermal.n_th, seed)

    def spectrum_kw(self) -> dict:
        d = self.detection
        return dict(pad_factor=d.pad_factor, window=d.window, rbw_hz=d.rbw_hz)


def sweep_values(section) -> np.ndarray:
    if section.sweep_scale == "log":
        return np.geomspace(section.sweep_start, section.sweep_stop, section.sweep_points)
    return np.linspace(section.sweep_start, section.sweep_stop, section.sweep_points)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(float(v)) for v in value)
    return str(value)


def _parse(text: str, default, path: str):
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            v = float(text)
            if not math.isfinite(v):
                raise ValueError(text)
            return v
        if isinstance(default, list):
            vals = [float(v) for v in text.split(",") if v.strip()]
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(text)
            return vals
        return text
    except ValueError:
        raise ConfigError(f"invalid value {text!r}", path) from None
