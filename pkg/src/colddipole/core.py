"""Ensemble configuration, atom sampling and ballistic kinematics.

All quantities are dimensionless: lengths in units of 1/k0, times in units
of 1/gamma, velocities in gamma/k0.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial import cKDTree

SUBLEVELS = (-1, 0, 1)
EXCLUSION_RADIUS = 1e-3

_SQRT_HALF = math.sqrt(0.5)
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EnsembleConfig:
    """Parameters of a disordered cubic cloud.

    ``box_edge`` is derived from ``n_atoms`` and ``density`` when omitted. If
    both are supplied they must agree.
    """

    n_atoms: int
    density: float = 0.005
    box_edge: float | None = None
    v0: float = 0.0
    seed: int = 0
    realizations: int = 1

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.v0 < 0:
            raise ValueError("v0 must be non-negative")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.box_edge is None:
            object.__setattr__(self, "box_edge", (self.n_atoms / self.density) ** (1.0 / 3.0))
        else:
            if self.box_edge <= 0:
                raise ValueError("box_edge must be positive")
            implied = self.n_atoms / self.box_edge**3
            if abs(implied - self.density) > 1e-12 * self.density:
                raise ValueError(
                    f"density {self.density} inconsistent with n_atoms/box_edge**3 = {implied}"
                )

    @property
    def doppler_width(self) -> float:
        """FWHM of the Doppler-broadened line, 2*sqrt(2 ln 2)*k0*v0."""
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * self.v0


@dataclass(frozen=True)
class AtomSet:
    """Positions and velocities of N atoms at ``reference_time``.

    ``box_edge=None`` means free space (no walls), used for prescribed
    two-atom trajectories.
    """

    positions: np.ndarray
    velocities: np.ndarray
    reference_time: float = 0.0
    box_edge: float | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True).reshape(-1, 3)
        vel = np.array(self.velocities, dtype=float, copy=True).reshape(-1, 3)
        if pos.shape != vel.shape:
            raise ValueError("positions and velocities must have the same count")
        if self.box_edge is not None and (np.any(pos < 0) or np.any(pos > self.box_edge)):
            raise ValueError("positions must lie inside [0, L]^3")
        pos.flags.writeable = False
        vel.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Pulse:
    """Rectangular weak excitation pulse occupying ``[start, start + duration]``."""

    rabi_amplitude: float = 1e-2
    detuning: float = 0.0
    duration: float = 50.0
    propagation_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    polarization: str = "right-circular"
    start: float = 0.0

    POLARIZATIONS = ("right-circular", "left-circular", "linear-x", "linear-y")

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        k = np.asarray(self.propagation_direction, dtype=float)
        if k.shape != (3,) or abs(np.linalg.norm(k) - 1.0) > 1e-12:
            raise ValueError("propagation_direction must be a unit 3-vector")
        if self.polarization not in self.POLARIZATIONS:
            raise ValueError(f"unknown polarization {self.polarization!r}")
        object.__setattr__(self, "propagation_direction", tuple(float(c) for c in k))

    @property
    def end(self) -> float:
        return self.start + self.duration

    def is_active(self, t: float) -> bool:
        return self.start <= t <= self.end

    def polarization_vector(self) -> np.ndarray:
        """Complex unit polarization of the incident field (lab frame)."""
        e1, e2 = transverse_frame(np.asarray(self.propagation_direction))
        if self.polarization == "right-circular":
            return -(e1 + 1j * e2) * _SQRT_HALF
        if self.polarization == "left-circular":
            return (e1 - 1j * e2) * _SQRT_HALF
        if self.polarization == "linear-x":
            return e1.astype(complex)
        return e2.astype(complex)


def flat_index(atom: int, m: int) -> int:
    """Flat amplitude index of sublevel ``m`` of ``atom``."""
    if m not in SUBLEVELS:
        raise ValueError(f"sublevel must be one of {SUBLEVELS}, got {m!r}")
    return 3 * atom + (m + 1)


def split_index(e: int) -> tuple[int, int]:
    """Inverse of :func:`flat_index`."""
    atom, r = divmod(int(e), 3)
    return atom, r - 1


def spherical_basis(m: int) -> np.ndarray:
    """Condon-Shortley spherical unit vector e_m in Cartesian components."""
    if m == 0:
        return np.array([0.0, 0.0, 1.0], dtype=complex)
    if m == 1:
        return -np.array([1.0, 1j, 0.0]) * _SQRT_HALF
    if m == -1:
        return np.array([1.0, -1j, 0.0]) * _SQRT_HALF
    raise ValueError(f"sublevel must be one of {SUBLEVELS}, got {m!r}")


# columns are e_{-1}, e_0, e_{+1}; maps sublevel amplitudes to Cartesian dipoles
SPHERICAL_TO_CARTESIAN = np.stack([spherical_basis(m) for m in SUBLEVELS], axis=1)


def transverse_frame(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real orthonormal (e1, e2) with e1 x e2 = k; (x, y) for k = +z.

    Obtained by the minimal rotation carrying +z onto k.
    """
    k = np.asarray(k, dtype=float)
    k = k / np.linalg.norm(k)
    z = np.array([0.0, 0.0, 1.0])
    c = float(k @ z)
    if c > 1.0 - 1e-15:
        rot = np.eye(3)
    elif c < -1.0 + 1e-15:
        rot = np.diag([1.0, -1.0, -1.0])
    else:
        ax = np.cross(z, k)
        s = np.linalg.norm(ax)
        ax /= s
        kx = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
        rot = np.eye(3) + s * kx + (1 - c) * kx @ kx
    return rot[:, 0].copy(), rot[:, 1].copy()


def realization_rng(seed: int, realization_index: int) -> np.random.Generator:
    """Counter-based stream for one realization.

    Philox keyed by the 128-bit value ``(realization_index << 64) | seed``;
    every realization owns an independent key, so draws never depend on the
    order in which realizations are evaluated.
    """
    if realization_index < 0:
        raise ValueError("realization_index must be non-negative")
    key = (int(realization_index) << 64) | (int(seed) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def close_pairs(pos: np.ndarray, radius: float) -> np.ndarray:
    """Index pairs (i < j) closer than ``radius``, shape (P, 2)."""
    pairs = cKDTree(pos).query_pairs(radius, output_type="ndarray")
    return pairs.reshape(-1, 2)


def sample_atoms(config: EnsembleConfig, realization_index: int) -> AtomSet:
    """Draw uniform positions in the box and Gaussian velocities.

    Positions are drawn first, then unit normals scaled by ``v0``; the same
    (seed, index) therefore yields the same positions for every ``v0``.
    Atoms closer than the exclusion radius are redrawn from the same stream.
    """
    rng = realization_rng(config.seed, realization_index)
    n, edge = config.n_atoms, config.box_edge
    pos = rng.uniform(0.0, edge, size=(n, 3))
    vel = config.v0 * rng.standard_normal(size=(n, 3))
    if n > 1:
        for _ in range(100):
            bad = close_pairs(pos, EXCLUSION_RADIUS)
            if len(bad) == 0:
                break
            redraw = np.unique(bad[:, 1])
            pos[redraw] = rng.uniform(0.0, edge, size=(len(redraw), 3))
    return AtomSet(pos, vel, reference_time=0.0, box_edge=edge)


def fold(y: np.ndarray, edge: float) -> tuple[np.ndarray, np.ndarray]:
    """Specular folding of free coordinates into [0, edge].

    Returns the folded coordinates and the velocity sign (+1 or -1) of each.
    """
    u = np.mod(y, 2.0 * edge)
    upper = u > edge
    x = np.where(upper, 2.0 * edge - u, u)
    return x, np.where(upper, -1.0, 1.0)


def positions_at(atoms: AtomSet, t: float) -> np.ndarray:
    """Positions at time ``t`` under uniform motion with elastic walls."""
    return _kinematics(atoms, t - atoms.reference_time)[0]


def velocities_at(atoms: AtomSet, t: float) -> np.ndarray:
    """Instantaneous velocities at ``t`` (signs flipped by wall reflections)."""
    return _kinematics(atoms, t - atoms.reference_time)[1]


def advance(atoms: AtomSet, t: float) -> AtomSet:
    """AtomSet re-referenced at time ``t``."""
    pos, vel = _kinematics(atoms, t - atoms.reference_time)
    return AtomSet(pos, vel, reference_time=t, box_edge=atoms.box_edge)


def _kinematics(atoms: AtomSet, elapsed: float) -> tuple[np.ndarray, np.ndarray]:
    if elapsed < 0:
        raise ValueError("cannot evaluate positions before the reference time")
    free = atoms.positions + atoms.velocities * elapsed
    if atoms.box_edge is None:
        return free, atoms.velocities.copy()
    x, sign = fold(free, atoms.box_edge)
    return x, atoms.velocities * sign
