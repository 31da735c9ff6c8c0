"""Time-domain integration of the linearized three-mode equations of motion.

The state y = (alpha1, alpha2, beta) lives in the frame rotating at the
signal frequency, so a resonant steady state is time independent. The
deterministic part is marched with classical fixed-step RK4; the optional
classical thermal force on beta is added per step (Euler-Maruyama).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numba
import numpy as np
from scipy.integrate import cumulative_simpson

from .model import ModeState, SystemParams, system_matrix

CHUNK_STEPS = 1 << 16

SignalInput = Union[complex, float, Callable[[np.ndarray], np.ndarray]]


class StepSizeError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# pulse programs


@dataclass(frozen=True)
class Window:
    start: float
    stop: float

    def __post_init__(self):
        if self.start < 0 or not self.stop > self.start:
            raise ValueError(f"invalid window [{self.start}, {self.stop})")

    def overlaps(self, other: "Window") -> bool:
        return self.start < other.stop and other.start < self.stop

    @property
    def length(self) -> float:
        return self.stop - self.start

    @property
    def center(self) -> float:
        return 0.5 * (self.start + self.stop)


@dataclass(frozen=True)
class ProbeWindow(Window):
    g_probe: float = 0.0


@dataclass(frozen=True)
class PulseProgram:
    """Timing of the two drives, the input signal and an optional probe.

    A window of ``None`` means that field is never on. ``signal_detuning``
    (delta, signal frequency minus drive-1 frequency) of ``None`` means the
    degenerate choice delta = omega_m.
    """

    pulse_duration: float = 6e-6
    envelope_shape: str = "rectangular"
    rise_time: float = 50e-9
    drive1_on: Optional[Window] = None
    drive2_on: Optional[Window] = None
    signal_on: Optional[Window] = None
    probe: Optional[ProbeWindow] = None
    signal_detuning: Optional[float] = None
    repetition_period: float = math.inf

    def __post_init__(self):
        if self.envelope_shape not in ("rectangular", "raised-edge"):
            raise ValueError(f"unknown envelope shape {self.envelope_shape!r}")
        if self.envelope_shape == "raised-edge" and not self.rise_time > 0:
            raise ValueError("raised-edge envelope needs a positive rise time")
        for w in (self.drive1_on, self.drive2_on, self.signal_on, self.probe):
            if w is not None and w.stop > self.repetition_period:
                raise ValueError("window extends past the repetition period")
        if self.probe is not None and self.drive1_on is not None:
            if self.probe.overlaps(self.drive1_on):
                raise ValueError("probe window overlaps the drive-1 window")

    @classmethod
    def synchronized(cls, duration: float = 6e-6, start: float = 0.0, **kw) -> "PulseProgram":
        """Both drives and the signal share one window, as in the experiment."""
        w = Window(start, start + duration)
        return cls(pulse_duration=duration, drive1_on=w, drive2_on=w, signal_on=w, **kw)

    @classmethod
    def continuous(cls, **kw) -> "PulseProgram":
        w = Window(0.0, math.inf)
        return cls(pulse_duration=math.inf, drive1_on=w, drive2_on=w, signal_on=w, **kw)

    def delta(self, params: SystemParams) -> float:
        return params.mech.omega_m if self.signal_detuning is None else self.signal_detuning

    def envelope(self, window: Optional[Window], t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if window is None:
            return np.zeros_like(t)
        on = (t >= window.start) & (t < window.stop)
        env = on.astype(float)
        if self.envelope_shape == "raised-edge":
            rise = min(self.rise_time, 0.5 * window.length)
            up = on & (t < window.start + rise)
            env[up] = 0.5 * (1 - np.cos(np.pi * (t[up] - window.start) / rise))
            down = on & (t > window.stop - rise)
            env[down] = 0.5 * (1 - np.cos(np.pi * (window.stop - t[down]) / rise))
        return env

    def couplings(self, params: SystemParams, t):
        """Time-dependent effective couplings G1(t), G2(t)."""
        g1 = params.coupling.g1 * self.envelope(self.drive1_on, t)
        if self.probe is not None:
            g1 = g1 + self.probe.g_probe * self.envelope(self.probe, t)
        g2 = params.coupling.g2 * self.envelope(self.drive2_on, t)
        return g1, g2

    def signal(self, s_in: SignalInput, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if callable(s_in):
            return np.broadcast_to(np.asarray(s_in(t), dtype=complex), t.shape).copy()
        return complex(s_in) * self.envelope(self.signal_on, t)


@dataclass(frozen=True)
class ThermalDrive:
    enabled: bool = False
    n_th: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")


# --------------------------------------------------------------------------
# records


@dataclass
class TimeSeries:
    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if len(self.samples) == 0:
            raise ValueError("empty time series")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    def __len__(self):
        return len(self.samples)

    def index_of(self, t: float) -> int:
        return int(round((t - self.t0) / self.dt))

    def slice(self, start: float, stop: float) -> "TimeSeries":
        """Samples with start <= t < stop (on the sample grid)."""
        i0 = max(self.index_of(start), 0)
        i1 = min(self.index_of(stop), len(self.samples))
        if i1 <= i0:
            raise ValueError(f"[{start}, {stop}) selects no samples")
        return TimeSeries(self.t0 + i0 * self.dt, self.dt, self.samples[i0:i1])


@dataclass
class Trajectory(TimeSeries):
    """Time series of ModeState rows, columns (alpha1, alpha2, beta)."""

    step_error: float = 0.0

    @property
    def alpha1(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def alpha2(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def beta(self) -> np.ndarray:
        return self.samples[:, 2]

    def state(self, i: int) -> ModeState:
        return ModeState.from_array(self.samples[i])

    @property
    def final(self) -> ModeState:
        return self.state(-1)

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


TRAJECTORY_HEADER = "t_s,re_alpha1,im_alpha1,re_alpha2,im_alpha2,re_beta,im_beta"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    t = traj.times
    y = traj.samples
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for i in range(len(t)):
            row = (t[i], y[i, 0].real, y[i, 0].imag, y[i, 1].real, y[i, 1].imag, y[i, 2].real, y[i, 2].imag)
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    y = data[:, 1::2] + 1j * data[:, 2::2]
    dt = data[1, 0] - data[0, 0] if len(data) > 1 else 1.0
    return Trajectory(float(data[0, 0]), float(dt), y)


# --------------------------------------------------------------------------
# equations of motion


def derivative(state: ModeState, t: float, params: SystemParams, program: PulseProgram, s_in: complex) -> ModeState:
    """Right-hand side of the equations of motion at time ``t``.

    ``s_in`` is the signal amplitude already evaluated at ``t``.
    """
    g1, g2 = program.couplings(params, t)
    a = system_matrix(params, program.delta(params), float(g1), float(g2))
    b = np.array([math.sqrt(params.mode1.kappa_ext) * s_in, 0.0, 0.0], dtype=complex)
    return ModeState.from_array(a @ state.as_array() + b)


def max_rate(params: SystemParams, delta: float) -> float:
    d_s = delta + params.mode1.drive_detuning
    return max(
        params.mode1.kappa_total,
        params.mode2.kappa_total,
        abs(delta - params.mech.omega_m) + params.mech.gamma_m,
        abs(d_s),
        abs(d_s + params.mode2.drive_detuning - params.mode1.drive_detuning),
    )


def thermal_step_noise(dt: float, gamma_m: float, n_th: float, rng: np.random.Generator, size=None):
    """Complex Gaussian force increment on beta with E|dW|^2 = gamma_m n_th dt.

    A free mode driven by these increments relaxes to <|beta|^2> = n_th.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_th == 0:
        return 0j if size is None else np.zeros(size, dtype=complex)
    sigma = math.sqrt(0.5 * gamma_m * n_th * dt)
    xi = rng.standard_normal(2 if size is None else (size, 2))
    z = sigma * (xi[..., 0] + 1j * xi[..., 1])
    return complex(z) if size is None else z


@numba.njit(cache=True, nogil=True)
def _rhs(y0, y1, y2, a11, a22, a33, sk, g1, g2, s):
    d0 = a11 * y0 - 1j * g1 * y2 + sk * s
    d1 = a22 * y1 - 1j * g2 * y2
    d2 = a33 * y2 - 1j * (g1 * y0 + g2 * y1)
    return d0, d1, d2


@numba.njit(cache=True, nogil=True)
def _rk4_step(y0, y1, y2, h, a11, a22, a33, sk, g1a, g2a, sa, g1b, g2b, sb, g1c, g2c, sc):
    k10, k11, k12 = _rhs(y0, y1, y2, a11, a22, a33, sk, g1a, g2a, sa)
    hh = 0.5 * h
    k20, k21, k22 = _rhs(y0 + hh * k10, y1 + hh * k11, y2 + hh * k12, a11, a22, a33, sk, g1b, g2b, sb)
    k30, k31, k32 = _rhs(y0 + hh * k20, y1 + hh * k21, y2 + hh * k22, a11, a22, a33, sk, g1b, g2b, sb)
    k40, k41, k42 = _rhs(y0 + h * k30, y1 + h * k31, y2 + h * k32, a11, a22, a33, sk, g1c, g2c, sc)
    h6 = h / 6.0
    return (
        y0 + h6 * (k10 + 2 * k20 + 2 * k30 + k40),
        y1 + h6 * (k11 + 2 * k21 + 2 * k31 + k41),
        y2 + h6 * (k12 + 2 * k22 + 2 * k32 + k42),
    )


@numba.njit(cache=True, nogil=True)
def _march(y, h, nsteps, a11, a22, a33, sk, g1, g2, s, noise, stride, phase, out, monitor_every, err):
    """Advance ``y`` in place by ``nsteps`` RK4 steps.

    g1, g2, s have shape (nsteps, 3): drive values at the start (right
    limit), midpoint and end (left limit) of each step, so envelope edges
    on the step grid are integrated exactly. State is written to ``out``
    after every step whose global index (phase + k + 1) is a multiple of
    ``stride``. ``err`` accumulates the step-doubling estimate as
    [max |error|, max |y|]. Returns the number of rows written, or -(k+1)
    if the state became non-finite at step k.
    """
    y0, y1, y2 = y[0], y[1], y[2]
    use_noise = noise.shape[0] > 0
    nout = 0
    for k in range(nsteps):
        if monitor_every > 0 and (phase + k) % monitor_every == 0 and k + 1 < nsteps and not use_noise:
            b0, b1, b2 = _rk4_step(
                y0, y1, y2, 2 * h, a11, a22, a33, sk,
                g1[k, 0], g2[k, 0], s[k, 0], g1[k + 1, 0], g2[k + 1, 0], s[k + 1, 0],
                g1[k + 1, 2], g2[k + 1, 2], s[k + 1, 2],
            )
            m0, m1, m2 = _rk4_step(
                y0, y1, y2, h, a11, a22, a33, sk,
                g1[k, 0], g2[k, 0], s[k, 0], g1[k, 1], g2[k, 1], s[k, 1], g1[k, 2], g2[k, 2], s[k, 2],
            )
            m0, m1, m2 = _rk4_step(
                m0, m1, m2, h, a11, a22, a33, sk,
                g1[k + 1, 0], g2[k + 1, 0], s[k + 1, 0], g1[k + 1, 1], g2[k + 1, 1], s[k + 1, 1],
                g1[k + 1, 2], g2[k + 1, 2], s[k + 1, 2],
            )
            e = max(abs(m0 - b0), abs(m1 - b1), abs(m2 - b2)) / 15.0
            if e > err[0]:
                err[0] = e
        y0, y1, y2 = _rk4_step(
            y0, y1, y2, h, a11, a22, a33, sk,
            g1[k, 0], g2[k, 0], s[k, 0], g1[k, 1], g2[k, 1], s[k, 1], g1[k, 2], g2[k, 2], s[k, 2],
        )
        if use_noise:
            y2 += noise[k]
        nrm = max(abs(y0), abs(y1), abs(y2))
        if not nrm < np.inf:
            return -(k + 1)
        if nrm > err[1]:
            err[1] = nrm
        if (phase + k + 1) % stride == 0:
            out[nout, 0] = y0
            out[nout, 1] = y1
            out[nout, 2] = y2
            nout += 1
    y[0], y[1], y[2] = y0, y1, y2
    return nout


def integrate(
    params: SystemParams,
    program: PulseProgram,
    s_in: SignalInput,
    dt: float,
    t_end: float,
    thermal: Optional[ThermalDrive] = None,
    *,
    y0: Optional[ModeState] = None,
    record_stride: int = 1,
    monitor_every: int = 4096,
) -> Trajectory:
    """Integrate from t = 0 to ``t_end`` with fixed step ``dt``.

    ``s_in`` is either a constant amplitude (gated by the program's signal
    window) or a vectorized callable t -> amplitude. The returned record
    starts with the initial state and holds every ``record_stride``-th step.
    """
    delta = program.delta(params)
    limit = 0.1 / max_rate(params, delta)
    if not 0 < dt <= limit * (1 + 1e-9):
        raise StepSizeError(f"dt = {dt:g} s exceeds the stability/accuracy limit {limit:g} s")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    nsteps = int(math.ceil(t_end / dt - 1e-9))
    stride = int(record_stride)
    if stride < 1:
        raise ValueError("record_stride must be >= 1")

    a = system_matrix(params, delta, 0.0, 0.0)
    a11, a22, a33 = complex(a[0, 0]), complex(a[1, 1]), complex(a[2, 2])
    sk = math.sqrt(params.mode1.kappa_ext)

    noisy = thermal is not None and thermal.enabled and thermal.n_th > 0
    rng = np.random.default_rng(thermal.seed) if noisy else None
    no_noise = np.zeros(0, dtype=complex)

    y = (y0.as_array() if y0 is not None else np.zeros(3, dtype=complex)).copy()
    rows = [y.copy()[None, :]]
    err = np.zeros(2)
    err[1] = float(np.max(np.abs(y)))
    done = 0
    while done < nsteps:
        m = min(CHUNK_STEPS, nsteps - done)
        # start (right limit), midpoint and end (left limit) of each step
        tk = (done + np.arange(m))[:, None] * dt
        t = tk + np.array([1e-9, 0.5, 1 - 1e-9]) * dt
        g1, g2 = program.couplings(params, t)
        s = program.signal(s_in, t)
        noise = thermal_step_noise(dt, params.mech.gamma_m, thermal.n_th, rng, size=m) if noisy else no_noise
        out = np.empty(((done + m) // stride - done // stride, 3), dtype=complex)
        n = _march(y, dt, m, a11, a22, a33, sk, g1, g2, s, noise, stride, done, out, monitor_every, err)
        if n < 0:
            k = done - n - 1
            raise NumericalError(f"non-finite state at step {k} (t = {k * dt:.6g} s)")
        rows.append(out[:n])
        done += m
    samples = np.concatenate(rows)
    step_error = err[0] / err[1] if err[1] > 0 else 0.0
    return Trajectory(0.0, dt * stride, samples, step_error=step_error)


# --------------------------------------------------------------------------
# input-output and diagnostics


def output_field(state, params: SystemParams, s_in, mode_index: int):
    """Emitted field amplitude of optical mode 1 or 2.

    ``state`` may be a ModeState or a Trajectory (vectorized over samples).
    """
    if isinstance(state, Trajectory):
        a1, a2 = state.alpha1, state.alpha2
    else:
        a1, a2 = state.alpha1, state.alpha2
    if mode_index == 1:
        return math.sqrt(params.mode1.kappa_ext) * a1 - s_in
    if mode_index == 2:
        return math.sqrt(params.mode2.kappa_ext) * a2
    raise ValueError(f"mode_index must be 1 or 2, got {mode_index}")


def flux_balance_residual(state: ModeState, params: SystemParams, s_in: complex) -> float:
    """Relative mismatch between absorbed input power and dissipation.

    Zero at any true steady state: the coherent coupling terms exchange
    excitations without creating or destroying them.
    """
    loss = (
        params.mode1.kappa_total * abs(state.alpha1) ** 2
        + params.mode2.kappa_total * abs(state.alpha2) ** 2
        + params.mech.gamma_m * abs(state.beta) ** 2
    )
    gain = 2 * math.sqrt(params.mode1.kappa_ext) * (np.conj(s_in) * state.alpha1).real
    flux = abs(s_in) ** 2
    if flux == 0:
        return 0.0 if loss == 0 else math.inf
    return abs(loss - gain) / flux


def excitation_balance(traj: Trajectory, params: SystemParams, program: PulseProgram, s_in: SignalInput):
    """Residual of N(t) - N(0) = int (injection - dissipation) dt along a
    trajectory, integrated with cumulative Simpson.

    Returns (residual array, scale) where scale is max N along the record.
    Only meaningful over stretches with continuous drives.
    """
    t = traj.times
    y = traj.samples
    # left limits, so a record ending on a falling edge sees the drive on
    tl = t.copy()
    tl[1:] -= 1e-9 * traj.dt
    s = program.signal(s_in, tl)
    n = np.sum(np.abs(y) ** 2, axis=1)
    rate = (
        2 * math.sqrt(params.mode1.kappa_ext) * (np.conj(s) * y[:, 0]).real
        - params.mode1.kappa_total * np.abs(y[:, 0]) ** 2
        - params.mode2.kappa_total * np.abs(y[:, 1]) ** 2
        - params.mech.gamma_m * np.abs(y[:, 2]) ** 2
    )
    integral = cumulative_simpson(rate, dx=traj.dt, initial=0.0)
    return (n - n[0]) - integral, float(np.max(n))


def sweep_seed(base_seed: int, index: int) -> int:
    """Independent, reproducible seed for sweep point ``index``."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])
