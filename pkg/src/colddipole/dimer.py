"""Two-atom collective modes: closed forms, fly-by dynamics, mode tracking.

Mode classes are keyed by ``(epsilon, p)``; ``q`` follows from ``p``
(q = -2 for the axial class p = 0, q = 1 for the doubly degenerate
transverse class p = 1). ``epsilon = +1`` is the exchange-symmetric
combination of the two atoms, ``-1`` the antisymmetric one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .core import SPHERICAL_TO_CARTESIAN, AtomSet, Pulse
from .coupling import assemble
from .dynamics import IntegrationPlan, integrate

# Column order of the relative-population outputs (dimer_flyby.csv pop_class1..4).
CLASS_ORDER = ((1, 1), (-1, 1), (-1, 0), (1, 0))
DEGENERACY_TOL = 1e-9


def q_of(p: int) -> int:
    if p == 0:
        return -2
    if p == 1:
        return 1
    raise ValueError(f"p must be 0 or 1, got {p!r}")


def shift_and_width(kr, epsilon: int, p: int) -> tuple:
    """Collective shift and width (units of gamma) of class (epsilon, p)."""
    x = np.asarray(kr, dtype=float)
    q = q_of(p)
    s, c = np.sin(x), np.cos(x)
    shift = 0.75 * epsilon * (q * (c / x**3 + s / x**2) - p * c / x)
    width = 1.0 - 1.5 * epsilon * (q * (s / x**3 - c / x**2) - p * s / x)
    return shift, width


@dataclass(frozen=True)
class DimerMode:
    epsilon: int
    p: int
    q: int
    shift: float
    width: float
    eigenvectors: np.ndarray  # (degeneracy, 6) in the (atom, m) basis
    degenerate: bool

    @property
    def key(self) -> tuple[int, int]:
        return (self.epsilon, self.p)

    @property
    def eigenvector(self) -> np.ndarray:
        return self.eigenvectors[0]

    @property
    def label(self) -> str:
        return f"eps={self.epsilon:+d},p={self.p},|q|={abs(self.q)}"


def _frame(axis, plane_vector=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    ref = None if plane_vector is None else np.asarray(plane_vector, dtype=float)
    if ref is None or np.linalg.norm(np.cross(n, ref)) < 1e-12:
        ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    out_of_plane = np.cross(n, ref)
    out_of_plane /= np.linalg.norm(out_of_plane)
    in_plane = np.cross(out_of_plane, n)
    return n, in_plane, out_of_plane


def class_vectors(axis, epsilon: int, p: int, plane_vector=None) -> np.ndarray:
    """Orthonormal eigenvectors of class (epsilon, p) for separation along ``axis``.

    Rows are sublevel-basis 6-vectors. For the transverse class the first row
    is the dipole perpendicular to the plane spanned by ``axis`` and
    ``plane_vector``, the second lies in that plane.
    """
    n, in_plane, out_of_plane = _frame(axis, plane_vector)
    dipoles = [n] if p == 0 else [out_of_plane, in_plane]
    rows = []
    for d in dipoles:
        amp = SPHERICAL_TO_CARTESIAN.conj().T @ d
        rows.append(np.concatenate([amp, epsilon * amp]) / math.sqrt(2.0))
    return np.array(rows)


def dimer_modes(kr: float, axis=(0.0, 0.0, 1.0)) -> list[DimerMode]:
    """The four distinct stationary modes at separation ``kr`` (in 1/k0)."""
    if not kr > 0:
        raise ValueError("kr must be positive")
    modes = []
    for eps, p in CLASS_ORDER:
        shift, width = shift_and_width(kr, eps, p)
        modes.append(DimerMode(eps, p, q_of(p), float(shift), float(width),
                               class_vectors(axis, eps, p), p == 1))
    return modes


def effective_matrix(r_vec) -> np.ndarray:
    """6x6 generator -1/2 I + (i/2) V of the free two-atom dynamics."""
    V = assemble(np.array([[0.0, 0.0, 0.0], r_vec], dtype=float)).matrix
    return -0.5 * np.eye(6) + 0.5j * V


def numerical_modes(r_vec) -> tuple[np.ndarray, np.ndarray, list[list[int]]]:
    """Eigenvalues, unit right eigenvectors (columns) and degenerate groups."""
    lam, right = sla.eig(effective_matrix(r_vec))
    groups: list[list[int]] = []
    for k in np.argsort(lam.imag + 1e3 * lam.real):
        for g in groups:
            if abs(lam[g[0]] - lam[k]) < DEGENERACY_TOL * max(1.0, abs(lam[k])):
                g.append(int(k))
                break
        else:
            groups.append([int(k)])
    for g in groups:
        q, _ = np.linalg.qr(right[:, g])
        right[:, g] = q
    right /= np.linalg.norm(right, axis=0)
    return lam, right, groups


class ModeTracker:
    """Labels instantaneous eigenvectors by continuity with the previous geometry.

    Starts from the closed-form class subspaces at the first geometry seen.
    """

    def __init__(self):
        self.subspaces: dict[tuple[int, int], np.ndarray] | None = None
        self.flags: list[str] = []

    def _reference(self, r_vec) -> dict[tuple[int, int], np.ndarray]:
        if self.subspaces is None:
            return {(e, p): class_vectors(r_vec, e, p) for e, p in CLASS_ORDER}
        return self.subspaces

    def populations(self, beta, r_vec) -> np.ndarray:
        beta = np.asarray(beta, dtype=complex)
        if not np.vdot(beta, beta).real > 0:
            raise ValueError("amplitudes must be nonzero")
        r_vec = np.asarray(r_vec, dtype=float)
        lam, right, groups = numerical_modes(r_vec)
        if np.linalg.cond(right) > 1e8:
            self.flags.append(f"near-defective geometry at r={r_vec.tolist()}, perturbed")
            r_vec = r_vec * (1.0 + 1e-7)
            lam, right, groups = numerical_modes(r_vec)
        ref = self._reference(r_vec)
        slots = [key for key in CLASS_ORDER for _ in range(ref[key].shape[0])]
        overlap = np.zeros((6, len(slots)))
        for s, key in enumerate(slots):
            basis = ref[key]
            overlap[:, s] = np.linalg.norm(basis.conj() @ right, axis=0)
        rows, cols = linear_sum_assignment(-overlap)
        label = {int(r): slots[c] for r, c in zip(rows, cols)}
        coeff = np.linalg.solve(right, beta)
        pops = np.zeros(len(CLASS_ORDER))
        new_sub: dict[tuple[int, int], list] = {key: [] for key in CLASS_ORDER}
        for k in range(6):
            key = label[k]
            pops[CLASS_ORDER.index(key)] += abs(coeff[k]) ** 2
            new_sub[key].append(right[:, k])
        self.subspaces = {key: np.array(v) for key, v in new_sub.items()}
        return pops / pops.sum()


def mode_populations(amplitudes, r_vec, tracker: ModeTracker | None = None) -> np.ndarray:
    """Relative populations of the four classes, in :data:`CLASS_ORDER`."""
    return (tracker or ModeTracker()).populations(amplitudes, r_vec)


@dataclass(frozen=True)
class FlybyScenario:
    """Fixed atom at the origin; mover on a straight line at constant speed.

    ``start`` is the mover's initial position and ``direction`` its unit
    velocity direction. :meth:`from_closest_approach` builds the geometry
    with closest approach ``r_m`` along x and motion along +z.
    """

    start: tuple[float, float, float]
    v_rel: float
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    initial_mode: object = (1, 0)
    transverse: str = "out-of-plane"

    def __post_init__(self):
        if self.v_rel < 0:
            raise ValueError("v_rel must be non-negative")
        if self.transverse not in ("out-of-plane", "in-plane"):
            raise ValueError("transverse must be 'out-of-plane' or 'in-plane'")
        if not np.linalg.norm(self.start) > 0:
            raise ValueError("initial separation must be positive")

    @classmethod
    def from_closest_approach(cls, r0: float, r_m: float, v_rel: float, initial_mode=(1, 0),
                              transverse: str = "out-of-plane") -> "FlybyScenario":
        if not 0 < r_m <= r0:
            raise ValueError("need 0 < r_m <= r0")
        z0 = -math.sqrt(r0 * r0 - r_m * r_m)
        return cls((r_m, 0.0, z0), v_rel, (0.0, 0.0, 1.0), initial_mode, transverse)

    @property
    def r0(self) -> float:
        return float(np.linalg.norm(self.start))

    @property
    def closest_approach_time(self) -> float:
        if self.v_rel == 0:
            return 0.0
        return float(-np.dot(self.start, self.direction) / self.v_rel)

    def separation(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self.start) + np.multiply.outer(t, np.asarray(self.direction)) * self.v_rel

    def initial_vector(self) -> np.ndarray:
        mode = self.initial_mode
        if isinstance(mode, tuple) and len(mode) == 2:
            vecs = class_vectors(self.start, mode[0], mode[1], plane_vector=self.direction)
            vec = vecs[0] if mode[1] == 0 or self.transverse == "out-of-plane" else vecs[1]
        else:
            vec = np.asarray(mode, dtype=complex).reshape(6)
        return vec / np.linalg.norm(vec)

    def atoms(self) -> AtomSet:
        vel = np.asarray(self.direction, dtype=float) * self.v_rel
        return AtomSet([[0.0, 0.0, 0.0], self.start], [[0.0, 0.0, 0.0], vel], box_edge=None)


def extreme_classes(kr: float) -> tuple[tuple[int, int], tuple[int, int]]:
    """(longest-lived, shortest-lived) class keys at separation ``kr``."""
    modes = dimer_modes(kr)
    widths = [m.width for m in modes]
    return modes[int(np.argmin(widths))].key, modes[int(np.argmax(widths))].key


@dataclass
class FlybyResult:
    times: np.ndarray
    kr: np.ndarray
    P_ex: np.ndarray
    I_total: np.ndarray
    amplitudes: np.ndarray
    populations: np.ndarray
    metadata: dict = field(default_factory=dict)


def flyby(scenario: FlybyScenario, plan: IntegrationPlan) -> FlybyResult:
    """Free decay of a prepared two-atom state along the prescribed trajectory."""
    atoms = scenario.atoms()
    run = integrate(atoms, Pulse(rabi_amplitude=0.0, duration=0.0), plan,
                    beta0=scenario.initial_vector())
    tracker = ModeTracker()
    times, kr, pex, inten, amps, pops = [], [], [], [], [], []
    for s in run:
        r_vec = s.positions[1] - s.positions[0]
        times.append(s.t)
        kr.append(float(np.linalg.norm(r_vec)))
        pex.append(float(np.vdot(s.beta, s.beta).real))
        inten.append(s.intensity)
        amps.append(s.beta)
        pops.append(tracker.populations(s.beta, r_vec))
    meta = dict(run.metadata)
    meta.update({
        "geometry": "fixed atom at origin, mover on a straight line",
        "start": list(scenario.start),
        "direction": list(scenario.direction),
        "v_rel": scenario.v_rel,
        "initial_mode": str(scenario.initial_mode),
        "transverse": scenario.transverse,
        "tracker_flags": tracker.flags,
    })
    return FlybyResult(np.array(times), np.array(kr), np.array(pex), np.array(inten),
                       np.array(amps), np.array(pops), meta)
