"""Parameters and closed-form steady-state results for two optical modes
coupled to one mechanical mode through red-detuned drives.

All rates are angular (rad/s). Conversion from ordinary frequency happens
at the configuration boundary (see :mod:`omx.config`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

HBAR = 1.054571817e-34  # J s
C_LIGHT = 299792458.0  # m/s

TWO_PI = 2.0 * math.pi


class SingularSystemError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OpticalModeParams:
    kappa_total: float
    kappa_ext: float
    resonance: float = 0.0
    drive_detuning: float = 0.0

    def __post_init__(self):
        if not self.kappa_total > 0:
            raise ValueError(f"kappa_total must be positive, got {self.kappa_total}")
        if not 0 <= self.kappa_ext <= self.kappa_total:
            raise ValueError(
                f"kappa_ext must lie in [0, kappa_total], got {self.kappa_ext}"
            )

    @property
    def eta(self) -> float:
        return self.kappa_ext / self.kappa_total


@dataclass(frozen=True)
class MechanicalModeParams:
    omega_m: float
    gamma_m: float

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError(f"omega_m must be positive, got {self.omega_m}")
        if not self.gamma_m > 0:
            raise ValueError(f"gamma_m must be positive, got {self.gamma_m}")


@dataclass(frozen=True)
class CouplingParams:
    g1: float = 0.0
    g2: float = 0.0

    def __post_init__(self):
        if self.g1 < 0 or self.g2 < 0:
            raise ValueError("coupling rates must be non-negative")


@dataclass(frozen=True)
class SystemParams:
    mode1: OpticalModeParams
    mode2: OpticalModeParams
    mech: MechanicalModeParams
    coupling: CouplingParams = field(default_factory=CouplingParams)

    def __post_init__(self):
        if not self.resolved_sideband:
            warnings.warn(
                "omega_m does not exceed both optical linewidths; "
                "the linearized red-sideband model may be inaccurate",
                stacklevel=2,
            )

    @property
    def resolved_sideband(self) -> bool:
        return self.mech.omega_m > max(self.mode1.kappa_total, self.mode2.kappa_total)

    @property
    def c1(self) -> float:
        return cooperativity(self.coupling.g1, self.mech.gamma_m, self.mode1.kappa_total)

    @property
    def c2(self) -> float:
        return cooperativity(self.coupling.g2, self.mech.gamma_m, self.mode2.kappa_total)

    def with_cooperativities(self, c1: float, c2: float) -> "SystemParams":
        g1 = coupling_from_cooperativity(c1, self.mech.gamma_m, self.mode1.kappa_total)
        g2 = coupling_from_cooperativity(c2, self.mech.gamma_m, self.mode2.kappa_total)
        return replace(self, coupling=CouplingParams(g1, g2))

    @classmethod
    def from_cooperativities(
        cls,
        c1: float,
        c2: float,
        *,
        kappa1: float = TWO_PI * 30e6,
        kappa2: float = TWO_PI * 30e6,
        eta1: float = 0.45,
        eta2: float = 0.45,
        omega_m: float = TWO_PI * 101e6,
        gamma_m: float = TWO_PI * 20e3,
        wavelength1: float = 800e-9,
        wavelength2: float = 637e-9,
    ) -> "SystemParams":
        """Device with both drives on the red sideband (detuning -omega_m)."""
        mode1 = OpticalModeParams(kappa1, eta1 * kappa1, TWO_PI * C_LIGHT / wavelength1, -omega_m)
        mode2 = OpticalModeParams(kappa2, eta2 * kappa2, TWO_PI * C_LIGHT / wavelength2, -omega_m)
        mech = MechanicalModeParams(omega_m, gamma_m)
        g1 = coupling_from_cooperativity(c1, gamma_m, kappa1)
        g2 = coupling_from_cooperativity(c2, gamma_m, kappa2)
        return cls(mode1, mode2, mech, CouplingParams(g1, g2))


@dataclass(frozen=True)
class PowerCalibration:
    """Cooperativity per milliwatt of drive power, C_i = k_i * P_i."""

    k1: float = 0.2
    k2: float = 1.0 / 15.0

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("proportionality constants must be positive")

    def cooperativities(self, p1_mw, p2_mw):
        return self.k1 * p1_mw, self.k2 * p2_mw


@dataclass(frozen=True)
class ModeState:
    alpha1: complex = 0j
    alpha2: complex = 0j
    beta: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2, self.beta], dtype=complex)

    @classmethod
    def from_array(cls, y) -> "ModeState":
        return cls(complex(y[0]), complex(y[1]), complex(y[2]))

    @property
    def excitation_number(self) -> float:
        return abs(self.alpha1) ** 2 + abs(self.alpha2) ** 2 + abs(self.beta) ** 2


def cooperativity(g, gamma_m, kappa):
    """C = 4 g^2 / (gamma_m kappa)."""
    if not (gamma_m > 0 and kappa > 0):
        raise ValueError("gamma_m and kappa must be positive")
    if np.any(np.asarray(g) < 0):
        raise ValueError("coupling rate must be non-negative")
    return 4.0 * np.square(g) / (gamma_m * kappa)


def coupling_from_cooperativity(c, gamma_m, kappa):
    if not (gamma_m > 0 and kappa > 0):
        raise ValueError("gamma_m and kappa must be positive")
    if np.any(np.asarray(c) < 0):
        raise ValueError("cooperativity must be non-negative")
    return 0.5 * np.sqrt(c * gamma_m * kappa)


def _check_eff_args(c1, c2, eta1, eta2):
    if np.any(np.asarray(c1) < 0) or np.any(np.asarray(c2) < 0):
        raise ValueError("cooperativities must be non-negative")
    for eta in (eta1, eta2):
        if np.any((np.asarray(eta) < 0) | (np.asarray(eta) > 1)):
            raise ValueError("output coupling ratios must lie in [0, 1]")


def steady_state_efficiency(c1, c2, eta1=1.0, eta2=1.0):
    """Output/input photon-flux ratio with both drives on the red sideband
    and the signal on cavity resonance.

    Accepts scalars or numpy arrays (broadcast).
    """
    _check_eff_args(c1, c2, eta1, eta2)
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    out = eta1 * eta2 * 4.0 * c1 * c2 / (1.0 + c1 + c2) ** 2
    return out if out.ndim else float(out)


def mechanical_intensity_ss(c1, c2, eta1, gamma_m, input_flux):
    """Steady-state |beta|^2 for an on-resonance signal of ``input_flux``
    photons/s entering mode 1."""
    _check_eff_args(c1, c2, eta1, 1.0)
    if not gamma_m > 0:
        raise ValueError("gamma_m must be positive")
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    out = eta1 * c1 * 4.0 * input_flux / (gamma_m * (1.0 + c1 + c2) ** 2)
    return out if out.ndim else float(out)


def optimal_c1(c2):
    """C1 that maximizes the conversion efficiency at fixed C2."""
    if np.any(np.asarray(c2) < 0):
        raise ValueError("C2 must be non-negative")
    return 1.0 + c2


def system_matrix(params: SystemParams, signal_detuning: float, g1=None, g2=None) -> np.ndarray:
    """Matrix A of dy/dt = A y + b for y = (alpha1, alpha2, beta), in the
    frame rotating at the signal frequency.

    ``signal_detuning`` is the signal offset from drive 1 (delta).
    """
    m1, m2, mech = params.mode1, params.mode2, params.mech
    g1 = params.coupling.g1 if g1 is None else g1
    g2 = params.coupling.g2 if g2 is None else g2
    d_s = signal_detuning + m1.drive_detuning
    return np.array(
        [
            [1j * d_s - m1.kappa_total / 2, 0.0, -1j * g1],
            [0.0, 1j * (d_s + m2.drive_detuning - m1.drive_detuning) - m2.kappa_total / 2, -1j * g2],
            [-1j * g1, -1j * g2, 1j * (signal_detuning - mech.omega_m) - mech.gamma_m / 2],
        ],
        dtype=complex,
    )


def steady_state_amplitudes(params: SystemParams, signal_detuning: float, s_in: complex) -> ModeState:
    a = system_matrix(params, signal_detuning)
    b = np.array([math.sqrt(params.mode1.kappa_ext) * s_in, 0.0, 0.0], dtype=complex)
    try:
        y = np.linalg.solve(a, -b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    return ModeState.from_array(y)


def photon_flux(power_w, angular_frequency):
    """Photons per second carried by ``power_w`` at the given optical frequency."""
    return power_w / (HBAR * angular_frequency)


def optical_power(flux, angular_frequency):
    return flux * HBAR * angular_frequency
