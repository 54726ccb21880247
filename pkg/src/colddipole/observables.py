"""Fluorescence observables computed from amplitude samples."""
from __future__ import annotations

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .core import SPHERICAL_TO_CARTESIAN, transverse_frame
from .coupling import CouplingMatrix, DriveVector
from .dynamics import AmplitudeState

# one steradian of emission integrated over the sphere gives the decay rate
# of population times this constant (8 pi / 3 with k0 = 1)
ANGULAR_CONSTANT = 8.0 * math.pi / 3.0


@dataclass(frozen=True)
class ObservableSeries:
    times: np.ndarray
    P_ex: np.ndarray
    I_total: np.ndarray
    I_forward: np.ndarray
    gamma_inst: np.ndarray
    tau_inst: np.ndarray

    COLUMNS = ("t", "P_ex", "I_total", "I_forward", "gamma_inst", "tau_inst")

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.times, self.P_ex, self.I_total, self.I_forward,
                                self.gamma_inst, self.tau_inst])


@dataclass(frozen=True)
class Spectrum:
    omega: np.ndarray
    density: np.ndarray
    window_center: float
    window_width: float
    per_direction: np.ndarray | None = None


def dipoles(beta: np.ndarray) -> np.ndarray:
    """Cartesian dipole amplitudes, shape (N, 3), from sublevel amplitudes."""
    return np.asarray(beta).reshape(-1, 3) @ SPHERICAL_TO_CARTESIAN.T


def radiated_field(beta: np.ndarray, positions: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Far-field vector sum_i d_i exp(-i n . r_i) for each direction, shape (D, 3)."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    phases = np.exp(-1j * (directions @ np.asarray(positions, dtype=float).reshape(-1, 3).T))
    return phases @ dipoles(beta)


def far_field_amplitude(state: AmplitudeState, positions, direction, polarization) -> complex:
    """Amplitude of polarization ``polarization`` emitted along ``direction``."""
    n = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    field = radiated_field(state.beta, positions, n)[0]
    return complex(np.vdot(np.asarray(polarization, dtype=complex), field))


def directional_intensity(beta, positions, directions) -> np.ndarray:
    """Intensity summed over both transverse polarizations, per direction."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    field = radiated_field(beta, positions, directions)
    longitudinal = np.einsum("dk,dk->d", directions, field)
    return np.einsum("dk,dk->d", field, field.conj()).real - np.abs(longitudinal) ** 2


def polarization_pair(direction) -> np.ndarray:
    """Two orthonormal transverse polarizations for ``direction``, shape (2, 3)."""
    e1, e2 = transverse_frame(np.asarray(direction, dtype=float))
    return np.stack([e1, e2]).astype(complex)


def total_excited_population(state: AmplitudeState) -> float:
    beta = np.asarray(state.beta)
    return float(np.vdot(beta, beta).real)


def total_intensity(state: AmplitudeState, V: CouplingMatrix, drive: DriveVector,
                    detuning: float = 0.0) -> float:
    """Total emitted power -dP/dt after the pulse."""
    if drive.pulse_active or np.any(drive.values):
        raise ValueError("total_intensity is defined only after the drive is off")
    from .dynamics import rhs

    return float(-2.0 * np.vdot(state.beta, rhs(state, V, drive, detuning)).real)


def angular_intensity(beta, positions, order: int = 41) -> float:
    """Far-field intensity integrated over the sphere (Lebedev rule)."""
    from scipy.integrate import lebedev_rule

    nodes, weights = lebedev_rule(order)
    return float(weights @ directional_intensity(beta, positions, nodes.T))


def instantaneous_rate(times, intensity, smooth: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Decay rate -d ln I/dt and delay time 1/rate on the sample grid.

    Centered differences in the interior, one-sided at the ends. Samples with
    I <= 0 (and their neighbours' derivatives) come out as NaN. ``smooth``
    applies a boxcar of that many samples to ln I first.
    """
    t = np.asarray(times, dtype=float)
    I = np.asarray(intensity, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_i = np.where(I > 0, np.log(np.where(I > 0, I, 1.0)), np.nan)
    if smooth > 1:
        log_i = boxcar(log_i, smooth)
    if t.size < 2:
        return np.full(t.shape, np.nan), np.full(t.shape, np.nan)
    gamma = -np.gradient(log_i, t)
    gamma[~(I > 0)] = np.nan
    with np.errstate(divide="ignore"):
        tau = 1.0 / gamma
    return gamma, tau


def boxcar(values: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average; shrinks the window at the edges."""
    values = np.asarray(values, dtype=float)
    half = width // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(values.size)
    lo = np.clip(idx - half, 0, values.size)
    hi = np.clip(idx + half + 1, 0, values.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def average_rate(times, intensity, t1: float, t2: float) -> float:
    """Mean decay rate ln(I(t1)/I(t2)) / (t2 - t1); ln I interpolated linearly."""
    if not t2 > t1:
        raise ValueError("average_rate needs t2 > t1")
    t = np.asarray(times, dtype=float)
    I = np.asarray(intensity, dtype=float)
    log_i = np.log(I)
    lo, hi = np.interp([t1, t2], t, log_i)
    return float((lo - hi) / (t2 - t1))


def stft_spectrum(times, amplitudes, window_center: float, window_width: float,
                  *, oversample: int = 1) -> Spectrum:
    """Rectangular-window Fourier spectrum of complex far-field amplitudes.

    ``amplitudes`` has shape (T,), (T, D) or (T, D, P): D detection channels
    (directions), each with P polarization components whose densities add.
    The transform is F(w) = sum_k a(t_k) exp(i w t_k) dt, so a component
    exp(-i w_s t) peaks at w = w_s. ``density`` is averaged over channels.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(amplitudes, dtype=complex)
    if a.ndim == 1:
        a = a[:, None, None]
    elif a.ndim == 2:
        a = a[:, :, None]
    lo = window_center - window_width / 2
    hi = window_center + window_width / 2
    if t.size < 2:
        raise ValueError("need at least two samples")
    step = t[1] - t[0]
    if lo < t[0] - 1e-9 * step or hi > t[-1] + step * (1 + 1e-9):
        raise ValueError("window exceeds the sampled range")
    first = int(np.ceil((lo - t[0]) / step - 1e-9))
    count = int(round(window_width / step))
    sel = slice(first, first + count)
    ts = t[sel]
    if ts.size != count or not np.allclose(np.diff(ts), step, rtol=1e-9, atol=0):
        raise ValueError("window exceeds the sampled range or the grid is not uniform")
    size = count * int(oversample)
    spec = np.fft.fft(a[sel], n=size, axis=0)
    # fft uses exp(-2 pi i j k / size); reverse the frequency axis for exp(+i w t)
    omega = -2.0 * np.pi * np.fft.fftfreq(size, d=step)
    spec = spec * (step * np.exp(1j * omega * ts[0]))[:, None, None]
    order = np.argsort(omega, kind="stable")
    omega = omega[order]
    per_dir = (np.abs(spec[order]) ** 2).sum(axis=2)
    return Spectrum(omega, per_dir.mean(axis=1), window_center, window_width, per_dir)


def spectral_fwhm(spectrum: Spectrum) -> float:
    """Full width at half maximum around the peak, with linear interpolation."""
    w, d = spectrum.omega, spectrum.density
    k = int(np.argmax(d))
    half = d[k] / 2
    left = k
    while left > 0 and d[left] > half:
        left -= 1
    right = k
    while right < d.size - 1 and d[right] > half:
        right += 1
    if d[left] > half or d[right] > half:
        return math.nan

    def cross(i, j):
        return w[i] + (half - d[i]) * (w[j] - w[i]) / (d[j] - d[i])

    return float(cross(right - 1, right) - cross(left + 1, left))


def detection_directions(forward=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Cube-pattern directions (faces, edges, vertices), minus the forward one."""
    forward = np.asarray(forward, dtype=float)
    dirs = []
    for v in itertools.product((-1, 0, 1), repeat=3):
        if v == (0, 0, 0):
            continue
        n = np.asarray(v, dtype=float) / np.linalg.norm(v)
        if abs(n @ forward - 1.0) < 1e-9:
            continue
        dirs.append(n)
    return np.array(dirs)
