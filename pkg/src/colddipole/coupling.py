"""Dipole-dipole kernel and laser drive vector.

The kernel is stored in the sublevel basis e = 3*i + (m + 1). With
gamma = 4 |d|^2 k0^3 / (3 hbar) the pair block between atoms i != j is

    V[(i, m), (j, m')] = -3/2 * e_m^dagger G(r_ij) e_m'
    G(r) = [(1 - i r - r^2) I - (3 - 3 i r - r^2) n n^T] e^{i r} / r^3

so that the amplitude equations read
d beta/dt = (i delta - 1/2) beta - i Omega/2 + (i/2) V beta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._kernels_py import fill_kernel_cartesian, pair_scalars, sublevel_projections
from .core import EXCLUSION_RADIUS, SPHERICAL_TO_CARTESIAN, Pulse, close_pairs


class DegeneratePairError(ValueError):
    """Two atoms coincide (or sit inside the exclusion radius)."""

    def __init__(self, i: int, j: int, distance: float):
        super().__init__(f"atoms {i} and {j} are {distance:.3e} apart (degenerate pair)")
        self.pair = (i, j)
        self.distance = distance


@dataclass(frozen=True)
class CouplingMatrix:
    matrix: np.ndarray
    time_tag: float = 0.0
    basis: str = "spherical"

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[0] // 3


@dataclass(frozen=True)
class DriveVector:
    values: np.ndarray
    pulse_active: bool


def pair_block(r_vec) -> np.ndarray:
    """3x3 kernel block for one ordered pair with separation ``r_vec``."""
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        raise DegeneratePairError(0, 1, 0.0)
    a, b = pair_scalars(np.array(r))
    w = sublevel_projections(r_vec / r)
    return -1.5 * (a * np.eye(3) - b * np.outer(w.conj(), w))


def to_cartesian(matrix: np.ndarray) -> np.ndarray:
    """Re-express a sublevel-basis operator in per-atom Cartesian components.

    In the sublevel basis the kernel obeys V^T = S V S, with S sending m to
    -m with sign (-1)^m; in Cartesian components it is plainly symmetric.
    """
    n = matrix.shape[0] // 3
    u = SPHERICAL_TO_CARTESIAN
    blocks = matrix.reshape(n, 3, n, 3)
    return np.einsum("ap,ipjq,bq->iajb", u, blocks, u.conj()).reshape(3 * n, 3 * n)


def assemble(
    positions,
    t: float = 0.0,
    *,
    exclusion_radius: float = EXCLUSION_RADIUS,
    basis: str = "spherical",
    out: np.ndarray | None = None,
) -> CouplingMatrix:
    """Build the 3N x 3N kernel for the given positions.

    Raises :class:`DegeneratePairError` naming the first pair closer than
    ``exclusion_radius``.
    """
    pos = np.ascontiguousarray(positions, dtype=float).reshape(-1, 3)
    n = pos.shape[0]
    if n > 1 and exclusion_radius > 0:
        bad = close_pairs(pos, exclusion_radius)
        if len(bad):
            i, j = (int(k) for k in bad[0])
            raise DegeneratePairError(i, j, float(np.linalg.norm(pos[i] - pos[j])))
    if basis not in ("spherical", "cartesian"):
        raise ValueError(f"unknown basis {basis!r}")
    if out is None:
        out = np.empty((3 * n, 3 * n), dtype=complex)
    if basis == "cartesian":
        fill_kernel_cartesian(pos, out)
    else:
        _backend.fill_kernel(pos, out)
    return CouplingMatrix(out, float(t), basis)


def drive_vector(positions, pulse: Pulse, t: float) -> DriveVector:
    """Rabi frequencies Omega_e = Omega0 (e_m^dagger u_L) exp(i k_L . r_i).

    Zero outside ``[pulse.start, pulse.end]``.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = pos.shape[0]
    if not pulse.is_active(t):
        return DriveVector(np.zeros(3 * n, dtype=complex), False)
    return DriveVector(drive_amplitudes(pos, pulse), True)


def drive_amplitudes(pos: np.ndarray, pulse: Pulse) -> np.ndarray:
    """Drive vector assuming the pulse is on."""
    coupling = pulse.rabi_amplitude * (SPHERICAL_TO_CARTESIAN.conj().T @ pulse.polarization_vector())
    phase = np.exp(1j * (pos @ np.asarray(pulse.propagation_direction)))
    return (phase[:, None] * coupling[None, :]).reshape(-1)
