from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colddipole.core import (
    EXCLUSION_RADIUS,
    AtomSet,
    EnsembleConfig,
    Pulse,
    advance,
    close_pairs,
    flat_index,
    fold,
    positions_at,
    realization_rng,
    sample_atoms,
    spherical_basis,
    split_index,
    transverse_frame,
    velocities_at,
)


def test_box_edge_derived_from_density():
    cfg = EnsembleConfig(625, density=0.005)
    assert cfg.box_edge == pytest.approx(50.0, rel=1e-12)
    assert cfg.n_atoms / cfg.box_edge**3 == pytest.approx(0.005, rel=1e-12)


def test_inconsistent_density_rejected():
    with pytest.raises(ValueError):
        EnsembleConfig(625, density=0.005, box_edge=40.0)


@pytest.mark.parametrize("kwargs", [dict(n_atoms=0), dict(n_atoms=3, v0=-1.0), dict(n_atoms=3, realizations=0),
                                    dict(n_atoms=3, density=0.0), dict(n_atoms=2.5)])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        EnsembleConfig(**kwargs)


def test_doppler_width():
    assert EnsembleConfig(1, v0=1.0).doppler_width == pytest.approx(2 * math.sqrt(2 * math.log(2)))


def test_flat_index_bijective():
    seen = set()
    for i in range(7):
        for m in (-1, 0, 1):
            e = flat_index(i, m)
            assert split_index(e) == (i, m)
            seen.add(e)
    assert seen == set(range(21))
    with pytest.raises(ValueError):
        flat_index(0, 2)


def test_spherical_basis_convention():
    assert np.array_equal(spherical_basis(0), [0, 0, 1])
    gram = np.array([[np.vdot(spherical_basis(a), spherical_basis(b)) for b in (-1, 0, 1)] for a in (-1, 0, 1)])
    assert np.allclose(gram, np.eye(3), atol=1e-15)
    assert np.vdot(spherical_basis(1), [1, 0, 0]) == pytest.approx(-1 / math.sqrt(2))
    with pytest.raises(ValueError):
        spherical_basis(3)


def test_transverse_frame_right_handed(rng):
    e1, e2 = transverse_frame(np.array([0.0, 0.0, 1.0]))
    assert np.array_equal(e1, [1, 0, 0]) and np.array_equal(e2, [0, 1, 0])
    for _ in range(20):
        k = rng.normal(size=3)
        k /= np.linalg.norm(k)
        e1, e2 = transverse_frame(k)
        assert np.allclose(np.cross(e1, e2), k, atol=1e-14)
    e1, e2 = transverse_frame(np.array([0.0, 0.0, -1.0]))
    assert np.allclose(np.cross(e1, e2), [0, 0, -1])


def test_pulse_validation():
    with pytest.raises(ValueError):
        Pulse(duration=-1)
    with pytest.raises(ValueError):
        Pulse(propagation_direction=(0, 0, 2))
    with pytest.raises(ValueError):
        Pulse(polarization="elliptical")
    p = Pulse(duration=50, start=0)
    assert p.is_active(50.0) and not p.is_active(50.0 + 1e-9)


def test_sampling_v0_zero_gives_zero_velocities():
    atoms = sample_atoms(EnsembleConfig(50, v0=0.0, seed=3), 0)
    assert not np.any(atoms.velocities)


def test_sampling_statistics():
    atoms = sample_atoms(EnsembleConfig(10_000, v0=0.5, seed=11), 0)
    v = atoms.velocities
    assert np.all(np.abs(v.mean(axis=0)) < 3 * 0.5 / math.sqrt(10_000))
    # standard error of the sample standard deviation is sigma / sqrt(2 n)
    assert np.all(np.abs(v.std(axis=0) - 0.5) < 3 * 0.5 / math.sqrt(2 * 10_000))


def test_sampling_deterministic_and_independent():
    cfg = EnsembleConfig(40, v0=0.3, seed=5)
    a, b = sample_atoms(cfg, 2), sample_atoms(cfg, 2)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.velocities, b.velocities)
    c = sample_atoms(cfg, 3)
    assert not np.array_equal(a.positions, c.positions)


def test_common_positions_across_v0():
    a = sample_atoms(EnsembleConfig(40, v0=0.0, seed=5), 1)
    b = sample_atoms(EnsembleConfig(40, v0=1.0, seed=5), 1)
    assert np.array_equal(a.positions, b.positions)


def test_pooled_position_mean():
    cfg = EnsembleConfig(100, seed=9, realizations=1000)
    pooled = np.concatenate([sample_atoms(cfg, k).positions for k in range(cfg.realizations)])
    se = cfg.box_edge / math.sqrt(12 * pooled.shape[0])
    assert np.all(np.abs(pooled.mean(axis=0) - cfg.box_edge / 2) < 3 * se)


def test_exclusion_radius_respected():
    atoms = sample_atoms(EnsembleConfig(2000, density=50.0, seed=1), 0)
    assert len(close_pairs(atoms.positions, EXCLUSION_RADIUS)) == 0


def test_realization_rng_rejects_negative_index():
    with pytest.raises(ValueError):
        realization_rng(0, -1)


def test_atomset_invariants():
    with pytest.raises(ValueError):
        AtomSet([[0, 0, 0]], [[0, 0, 0], [1, 1, 1]])
    with pytest.raises(ValueError):
        AtomSet([[0, 0, 11]], [[0, 0, 0]], box_edge=10.0)
    atoms = AtomSet([[0, 0, 0]], [[0, 0, 0]])
    with pytest.raises(ValueError):
        atoms.positions[0, 0] = 1.0


def test_single_reflection():
    L = 10.0
    atoms = AtomSet([[0.9 * L, 1, 1]], [[0.2 * L, 0, 0]], box_edge=L)
    assert positions_at(atoms, 1.0)[0, 0] == pytest.approx(0.9 * L, abs=1e-12)
    assert velocities_at(atoms, 1.0)[0, 0] == pytest.approx(-0.2 * L)


def test_two_reflections_restore_phase():
    L = 10.0
    atoms = AtomSet([[0.5 * L, 1, 1]], [[L, 0, 0]], box_edge=L)
    assert positions_at(atoms, 2.0)[0, 0] == pytest.approx(0.5 * L, abs=1e-12)
    assert velocities_at(atoms, 2.0)[0, 0] == pytest.approx(L)


def test_static_atoms_stay_put():
    atoms = sample_atoms(EnsembleConfig(20, seed=1), 0)
    assert np.array_equal(positions_at(atoms, 123.4), atoms.positions)


def test_positions_before_reference_rejected():
    atoms = AtomSet([[1, 1, 1]], [[0, 0, 0]], reference_time=5.0, box_edge=2.0)
    with pytest.raises(ValueError):
        positions_at(atoms, 4.0)


def test_free_space_has_no_walls():
    atoms = AtomSet([[0, 0, 0]], [[1, 0, 0]])
    assert positions_at(atoms, 100.0)[0, 0] == 100.0


@settings(max_examples=200, deadline=None)
@given(y=st.floats(-1e4, 1e4), edge=st.floats(0.5, 100))
def test_fold_lands_in_box(y, edge):
    x, sign = fold(np.array([y]), edge)
    assert 0.0 <= x[0] <= edge
    assert sign[0] in (-1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(y=st.floats(-500, 500), edge=st.floats(1.0, 50))
def test_fold_is_continuous(y, edge):
    h = 1e-7
    a, _ = fold(np.array([y]), edge)
    b, sign = fold(np.array([y + h]), edge)
    assert abs(b[0] - a[0]) <= 2 * h + 1e-9 * edge
    # the sign is the local slope of the triangle wave
    if min(a[0], edge - a[0]) > 10 * h:
        assert (b[0] - a[0]) * sign[0] > 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), t=st.floats(0, 500))
def test_folding_idempotence_and_reversal(seed, t):
    atoms = sample_atoms(EnsembleConfig(5, density=0.01, v0=0.7, seed=seed), 0)
    later = advance(atoms, t)
    assert np.array_equal(positions_at(later, t), later.positions)
    back = AtomSet(later.positions, -later.velocities, reference_time=0.0, box_edge=atoms.box_edge)
    assert np.allclose(positions_at(back, t), atoms.positions, rtol=0, atol=1e-12)
