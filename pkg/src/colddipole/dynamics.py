"""Time integration of the single-excitation amplitude equations.

The integrator is a fixed-step integrating-factor (Lawson) fourth-order
Runge-Kutta scheme. Within a kernel window the stiff part

    A = (i delta - 1/2) I + (i/2) V_near

is propagated exactly by matrix exponentials, where ``V_near`` holds the
blocks of atom clusters linked by separations below ``near_radius``. The
remaining far-field coupling and the drive are stepped explicitly. With
``near_radius = 0`` the scheme reduces to classical RK4 applied after the
trivial diagonal integrating factor.

The kernel is frozen over windows of ``kernel_rebuild_interval`` steps and
evaluated at the window midpoint; the drive phase exp(i k_L . r_i(t)) is
re-evaluated at every Runge-Kutta stage.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import expm
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import EXCLUSION_RADIUS, AtomSet, Pulse, _kinematics, close_pairs
from .coupling import CouplingMatrix, DriveVector, _backend, drive_amplitudes


class DivergenceError(FloatingPointError):
    def __init__(self, t: float):
        super().__init__(f"amplitudes became non-finite at t = {t:.6g}")
        self.t = t


@dataclass(frozen=True)
class AmplitudeState:
    """Amplitudes at time ``t``.

    ``intensity`` is the total emitted power -dP/dt evaluated with the kernel
    used by the integrator; it is NaN while the drive is on.
    """

    t: float
    beta: np.ndarray
    positions: np.ndarray | None = None
    intensity: float = math.nan


@dataclass(frozen=True)
class IntegrationPlan:
    dt: float = 0.01
    t_end: float = 60.0
    sample_stride: int = 1
    kernel_rebuild_interval: int = 1
    drive_dt: float | None = None
    near_radius: float = 0.6
    # optional fine step for the first ``early_span`` after the pulse ends;
    # every fine step is sampled
    early_dt: float | None = None
    early_span: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.drive_dt is not None and not self.drive_dt > 0:
            raise ValueError("drive_dt must be positive")
        if self.kernel_rebuild_interval < 1:
            raise ValueError("kernel_rebuild_interval must be >= 1")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.near_radius < 0:
            raise ValueError("near_radius must be non-negative")
        if self.early_dt is not None and not self.early_dt > 0:
            raise ValueError("early_dt must be positive")
        if self.early_span < 0:
            raise ValueError("early_span must be non-negative")

    @property
    def step_during_drive(self) -> float:
        return self.dt if self.drive_dt is None else self.drive_dt


def default_rebuild_interval(velocities: np.ndarray, dt: float, budget: float = 1e-2) -> int:
    """Largest interval with k0 * v99 * dt * interval <= budget (at least 1)."""
    speeds = np.linalg.norm(np.asarray(velocities).reshape(-1, 3), axis=1)
    v99 = float(np.percentile(speeds, 99)) if speeds.size else 0.0
    if v99 == 0.0:
        return 1_000_000
    return max(1, int(budget / (v99 * dt)))


def rhs(state: AmplitudeState, V: CouplingMatrix, drive: DriveVector, detuning: float = 0.0) -> np.ndarray:
    """Time derivative of the amplitudes."""
    beta = np.asarray(state.beta)
    if V.matrix.shape != (beta.size, beta.size) or drive.values.shape != beta.shape:
        raise ValueError(
            f"dimension mismatch: beta {beta.shape}, V {V.matrix.shape}, drive {drive.values.shape}"
        )
    return (1j * detuning - 0.5) * beta - 0.5j * drive.values + 0.5j * (V.matrix @ beta)


class _Window:
    """Frozen kernel split into an explicit far part and exact near clusters."""

    def __init__(self, buffer: np.ndarray, pos: np.ndarray, h: float, detuning: float, near_radius: float):
        self.far = buffer
        _backend.fill_kernel(pos, buffer)
        diag = 1j * detuning - 0.5
        self.diag = diag
        self.scalar = np.exp(diag * h / 2)
        self.scalar2 = self.scalar * self.scalar
        self.groups = []
        n = pos.shape[0]
        pairs = close_pairs(pos, near_radius) if near_radius > 0 and n > 1 else np.empty((0, 2), int)
        if len(pairs) == 0:
            return
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
        members = np.unique(labels[pairs[:, 0]])
        by_size: dict[int, list[np.ndarray]] = {}
        for lab in members:
            atoms = np.flatnonzero(labels == lab)
            idx = (3 * atoms[:, None] + np.arange(3)).reshape(-1)
            by_size.setdefault(idx.size, []).append(idx)
        for size, idx_list in by_size.items():
            idx = np.stack(idx_list)
            blocks = buffer[idx[:, :, None], idx[:, None, :]]
            gen = 0.5j * blocks + diag * np.eye(size)
            half = expm(gen * (h / 2))
            self.groups.append((idx, gen, half, half @ half))
            buffer[idx[:, :, None], idx[:, None, :]] = 0.0

    def exp_half(self, u: np.ndarray) -> np.ndarray:
        out = self.scalar * u
        for idx, _, half, _ in self.groups:
            out[idx] = np.einsum("pij,pj->pi", half, u[idx])
        return out

    def stiff(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        for idx, gen, _, _ in self.groups:
            out[idx] = np.einsum("pij,pj->pi", gen, u[idx])
        return out


class Integrator:
    """Iterable over sampled :class:`AmplitudeState` objects.

    Iterating runs the integration; ``metadata`` is filled as it proceeds.
    """

    def __init__(self, atoms: AtomSet, pulse: Pulse, plan: IntegrationPlan,
                 beta0: np.ndarray | None = None, t_start: float | None = None):
        self.atoms = atoms
        self.pulse = pulse
        self.plan = plan
        self.t_start = pulse.start if t_start is None else float(t_start)
        if self.t_start < atoms.reference_time:
            raise ValueError("integration cannot start before the atoms' reference time")
        n3 = 3 * atoms.n_atoms
        self.beta0 = np.zeros(n3, complex) if beta0 is None else np.array(beta0, dtype=complex).reshape(n3)
        self.metadata = {
            "dt": plan.dt,
            "drive_dt": plan.step_during_drive,
            "kernel_rebuild_interval": plan.kernel_rebuild_interval,
            "near_radius": plan.near_radius,
            "early_dt": plan.early_dt,
            "early_span": plan.early_span,
            "kernel_backend": _backend.BACKEND,
            "kernel_rebuilds": 0,
            "close_pair_events": [],
        }

    def _phases(self):
        # spans are measured from t_start so that shifting the whole scenario
        # in time leaves every elapsed time bit-identical
        t0, pulse = self.t_start, self.pulse
        lead = t0 - pulse.start
        if lead < 0:
            raise ValueError("integration must start at or after the pulse start")
        total = self.plan.t_end - t0
        if total < 0:
            raise ValueError("t_end precedes the start time")
        drive_span = min(max(pulse.duration - lead, 0.0), total)
        early = 0.0
        if self.plan.early_dt is not None and self.plan.early_span > 0:
            already = max(lead - pulse.duration, 0.0)
            early = min(max(self.plan.early_span - already, 0.0), total - drive_span)
        phases = []
        if drive_span > 0:
            phases.append((0.0, drive_span, self.plan.step_during_drive, True, self.plan.sample_stride))
        if early > 0:
            phases.append((drive_span, early, self.plan.early_dt, False, 1))
        rest = total - drive_span - early
        if rest > 0 or not phases:
            phases.append((drive_span + early, rest, self.plan.dt, False, self.plan.sample_stride))
        out = []
        for start, span, h, driven, stride in phases:
            steps = int(round(span / h))
            if abs(steps * h - span) > 1e-9 * max(1.0, span):
                raise ValueError(f"a span of {span} is not a whole number of steps of {h}")
            out.append((start, steps, h, driven, stride))
        return out

    def __iter__(self):
        atoms, pulse, plan = self.atoms, self.pulse, self.plan
        t0 = self.t_start
        offset = t0 - atoms.reference_time
        n = atoms.n_atoms
        detuning = pulse.detuning
        buffer = np.empty((3 * n, 3 * n), dtype=complex)
        u = self.beta0.copy()
        interval = plan.kernel_rebuild_interval
        phases = self._phases()
        static = not np.any(atoms.velocities)

        def pos_at(elapsed):
            return _kinematics(atoms, offset + elapsed)[0]

        for p_index, (start, steps, h, driven, stride) in enumerate(phases):
            last_phase = p_index == len(phases) - 1

            def nonlinear(win, elapsed, v, pos=None):
                out = 0.5j * (win.far @ v)
                if driven:
                    if pos is None:
                        pos = pos_at(elapsed)
                    out -= 0.5j * drive_amplitudes(pos, pulse)
                return out

            win = None
            for k in range(steps + 1):
                elapsed = start + k * h
                if k < steps and k % interval == 0 and (win is None or not static):
                    span = min(interval, steps - k) * h
                    mid = pos_at(elapsed + span / 2)
                    self._check_close(mid, t0 + elapsed + span / 2)
                    win = _Window(buffer, mid, h, detuning, plan.near_radius)
                    self.metadata["kernel_rebuilds"] += 1
                if k == steps and win is None:
                    mid = pos_at(elapsed)
                    win = _Window(buffer, mid, h, detuning, plan.near_radius)
                    self.metadata["kernel_rebuilds"] += 1
                pos_now = pos_at(elapsed)
                k1 = nonlinear(win, elapsed, u, pos_now) if k < steps else None
                emit = k % stride == 0 or k == steps
                if k == steps and not last_phase:
                    emit = False
                if emit:
                    if driven:
                        intensity = math.nan
                    else:
                        full = win.stiff(u) + (k1 if k1 is not None else 0.5j * (win.far @ u))
                        intensity = float(-2.0 * np.vdot(u, full).real)
                    yield AmplitudeState(t0 + elapsed, u.copy(), pos_now, intensity)
                if k == steps:
                    break
                eu = win.exp_half(u)
                ek1 = win.exp_half(k1)
                pos_mid = pos_at(elapsed + h / 2) if driven else None
                k2 = nonlinear(win, elapsed + h / 2, eu + (h / 2) * ek1, pos_mid)
                k3 = nonlinear(win, elapsed + h / 2, eu + (h / 2) * k2, pos_mid)
                e2u = win.exp_half(eu)
                k4 = nonlinear(win, elapsed + h, e2u + h * win.exp_half(k3))
                u = e2u + (h / 6.0) * (win.exp_half(ek1 + 2.0 * k2 + 2.0 * k3) + k4)
                if not np.isfinite(u).all():
                    raise DivergenceError(t0 + start + (k + 1) * h)

    def _check_close(self, pos: np.ndarray, t: float) -> None:
        if pos.shape[0] < 2:
            return
        for i, j in close_pairs(pos, EXCLUSION_RADIUS):
            self.metadata["close_pair_events"].append(
                {"t": t, "pair": [int(i), int(j)], "distance": float(np.linalg.norm(pos[i] - pos[j]))}
            )


def integrate(atoms: AtomSet, pulse: Pulse, plan: IntegrationPlan, *,
              beta0: np.ndarray | None = None, t_start: float | None = None) -> Integrator:
    """Integrate from ``t_start`` (default: pulse start, beta = 0) to ``plan.t_end``."""
    return Integrator(atoms, pulse, plan, beta0=beta0, t_start=t_start)
