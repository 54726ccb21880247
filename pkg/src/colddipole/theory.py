"""Closed-form benchmarks and plateau extraction from simulated delay curves."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, special

from .observables import boxcar

CROSS_SECTION = 6.0 * math.pi  # resonant J=0->1 cross-section, units of k0^-2
CUBE_ALPHA = 3.0


@dataclass(frozen=True)
class TheoryInputs:
    b0: float
    b_v: float
    alpha: float = CUBE_ALPHA
    tau0: float = 1.0

    def __post_init__(self):
        if not self.b_v > 0:
            raise ValueError("b_v must be positive")
        if self.b_v > self.b0 * (1 + 1e-12):
            raise ValueError("b_v cannot exceed b0")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def slab_rate(self) -> float:
        return slab_initial_rate(self.b0, self.b_v)

    @property
    def tau_d(self) -> float:
        return diffusion_time(self.b0, self.alpha, self.tau0)


def doppler_factor(v0: float, detuning: float = 0.0, profile: str = "lorentzian") -> float:
    """b_v / b0: the resonant line shape averaged over the Gaussian velocity law.

    ``profile="lorentzian"`` evaluates 1 / (1 + (2 (delta - v))^2) averaged over
    one velocity component with standard deviation ``v0``. ``profile="voigt"``
    is the same average written with the Faddeeva function; it allows a
    nonzero laser detuning.
    """
    if v0 < 0:
        raise ValueError("v0 must be non-negative")
    if profile not in ("lorentzian", "voigt"):
        raise ValueError(f"unknown profile {profile!r}")
    if v0 == 0:
        return 1.0 / (1.0 + 4.0 * detuning**2)
    if profile == "voigt":
        z = (detuning + 0.5j) / (math.sqrt(2.0) * v0)
        return float(math.sqrt(math.pi / 8.0) / v0 * special.wofz(z).real)

    def integrand(u):
        return math.exp(-0.5 * u * u) / (1.0 + 4.0 * (detuning - v0 * u) ** 2)

    # the Lorentzian has width 1/(2 v0) in u; split there to keep quad honest
    w = 1.0 / (2.0 * v0)
    c = detuning / v0
    edges = sorted({-math.inf, c - 20 * w, c - w, c, c + w, c + 20 * w, math.inf})
    total = sum(integrate.quad(integrand, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                for a, b in zip(edges[:-1], edges[1:]) if b > a)
    return total / math.sqrt(2.0 * math.pi)


def optical_thickness(density: float, L: float, v0: float, *, detuning: float = 0.0,
                      profile: str = "lorentzian") -> tuple[float, float]:
    """Resonant optical thickness b0 and its Doppler-reduced value b_v."""
    if not density > 0 or not L > 0:
        raise ValueError("density and L must be positive")
    b0 = density * CROSS_SECTION * L
    return b0, b0 * doppler_factor(v0, detuning, profile)


def slab_initial_rate(b0: float, b_v: float) -> float:
    """Initial collective decay rate of a flat slab under resonant excitation."""
    if not b_v > 0:
        raise ValueError("b_v must be positive")
    return b0 / (2.0 * -math.expm1(-b_v / 2.0))


def diffusion_time(b0: float, alpha: float = CUBE_ALPHA, tau0: float = 1.0) -> float:
    """Diffusive trapping time 3 b0^2 / (alpha pi^2) in units of tau0."""
    if not b0 > 0:
        raise ValueError("b0 must be positive")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return 3.0 * b0 * b0 / (alpha * math.pi**2) * tau0


@dataclass(frozen=True)
class Plateau:
    tau_d: float
    window: tuple[float, float] | None
    found: bool
    threshold: float

    @classmethod
    def none(cls, threshold: float) -> "Plateau":
        return cls(math.nan, None, False, threshold)


def fit_plateau(times, tau, window: tuple[float, float] | None = None, *,
                threshold: float = 0.01, smoothing: int = 1, min_points: int = 3) -> Plateau:
    """Longest run of samples with |d ln tau/dt| < threshold; returns its mean tau.

    Only samples inside ``window`` (inclusive) are considered. ``smoothing``
    applies a boxcar of that many samples to tau before differentiating.
    Returns ``Plateau(found=False)`` when no run of ``min_points`` samples
    qualifies.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(tau, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if t.size < max(min_points, 2):
        return Plateau.none(threshold)
    if smoothing > 1:
        y = boxcar(y, smoothing)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.gradient(np.log(y), t)
    ok = np.isfinite(slope) & (np.abs(slope) < threshold) & (y > 0)
    best, best_len, start = None, 0, None
    for k, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            span = t[k - 1] - t[start]
            if k - start >= min_points and (best is None or span > best_len):
                best, best_len = (start, k), span
            start = None
    if best is None:
        return Plateau.none(threshold)
    lo, hi = best
    return Plateau(float(np.mean(y[lo:hi])), (float(t[lo]), float(t[hi - 1])), True, threshold)


def renormalized_diffusion_times(b0_values, sim_tau0: float, alpha: float = CUBE_ALPHA) -> np.ndarray:
    """Model times scaled so that the first entry equals the simulated reference."""
    model = np.array([diffusion_time(b, alpha) for b in b0_values])
    return model * (sim_tau0 / model[0])
