from __future__ import annotations

import math

import numpy as np
import pytest

from colddipole.dimer import (
    CLASS_ORDER,
    FlybyScenario,
    ModeTracker,
    class_vectors,
    dimer_modes,
    effective_matrix,
    extreme_classes,
    flyby,
    mode_populations,
    numerical_modes,
    shift_and_width,
)
from colddipole.dynamics import IntegrationPlan

KR_GRID = np.geomspace(0.3, 30.0, 30)


def random_axis(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("kr", KR_GRID)
def test_closed_form_matches_numerical_eigenvalues(kr, rng):
    axis = random_axis(rng)
    lam = np.sort_complex(np.linalg.eigvals(effective_matrix(kr * axis)))
    expected = []
    for mode in dimer_modes(kr, axis=axis):
        expected += [-0.5 * mode.width - 1j * mode.shift] * (2 if mode.degenerate else 1)
    expected = np.sort_complex(np.array(expected))
    assert np.max(np.abs(lam - expected)) < 1e-9


@pytest.mark.parametrize("kr", KR_GRID[::5])
def test_class_vectors_are_eigenvectors(kr, rng):
    axis = random_axis(rng)
    M = effective_matrix(kr * axis)
    for mode in dimer_modes(kr, axis=axis):
        lam = -0.5 * mode.width - 1j * mode.shift
        for v in mode.eigenvectors:
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-14)
            assert np.max(np.abs(M @ v - lam * v)) < 1e-10


@pytest.mark.parametrize("kr", [0.4, 1.0, 3.5, 12.0])
def test_width_sums(kr):
    modes = {m.key: m for m in dimer_modes(kr)}
    for p in (0, 1):
        assert modes[(1, p)].width + modes[(-1, p)].width == pytest.approx(2.0, abs=1e-12)
    total = sum(m.width * (2 if m.degenerate else 1) for m in modes.values())
    assert total == pytest.approx(6.0, abs=1e-12)


def test_far_limit():
    for mode in dimer_modes(1e3):
        assert abs(mode.width - 1.0) < 2e-3
        assert abs(mode.shift) < 1e-3


def test_two_degenerate_pairs_and_positivity():
    for kr in KR_GRID:
        modes = dimer_modes(kr)
        assert sum(m.degenerate for m in modes) == 2
        assert all(m.width > 0 for m in modes)
        lam, _, groups = numerical_modes(np.array([0.0, 0.0, kr]))
        assert sorted(len(g) for g in groups) == [1, 1, 2, 2]


def test_nonpositive_separation_rejected():
    for kr in (0.0, -1.0):
        with pytest.raises(ValueError):
            dimer_modes(kr)


def test_shift_and_width_vectorized():
    shift, width = shift_and_width(KR_GRID, 1, 0)
    assert shift.shape == width.shape == KR_GRID.shape
    assert np.all(np.isfinite(width))


def test_extreme_classes():
    assert extreme_classes(3.5) == ((1, 1), (-1, 1))
    assert extreme_classes(math.sqrt(10.0)) == ((-1, 0), (1, 0))


def test_populations_of_eigenvector(rng):
    axis = random_axis(rng)
    kr = 2.7
    for mode in dimer_modes(kr, axis=axis):
        for v in mode.eigenvectors:
            pops = mode_populations(v, kr * axis)
            expected = np.zeros(4)
            expected[CLASS_ORDER.index(mode.key)] = 1.0
            assert np.max(np.abs(pops - expected)) < 1e-12


def test_populations_sum_to_one(rng):
    for _ in range(10):
        beta = rng.normal(size=6) + 1j * rng.normal(size=6)
        pops = mode_populations(beta, rng.uniform(0.5, 8) * random_axis(rng))
        assert pops.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(pops >= 0)


def test_populations_reject_zero_state():
    with pytest.raises(ValueError):
        ModeTracker().populations(np.zeros(6), [0, 0, 1.0])


def test_in_plane_and_out_of_plane_vectors_orthogonal():
    vecs = class_vectors([0.3, 0.0, -1.0], 1, 1, plane_vector=[0, 0, 1])
    assert abs(np.vdot(vecs[0], vecs[1])) < 1e-15


@pytest.mark.parametrize("key", CLASS_ORDER)
def test_static_pair_decays_as_pure_mode(key):
    scenario = FlybyScenario((0.4, 0.0, -2.0), 0.0, initial_mode=key, transverse="in-plane")
    res = flyby(scenario, IntegrationPlan(dt=0.01, t_end=4.0, sample_stride=20))
    mode = {m.key: m for m in dimer_modes(scenario.r0)}[key]
    assert np.max(np.abs(res.P_ex / np.exp(-mode.width * res.times) - 1)) < 1e-8
    others = np.delete(res.populations, CLASS_ORDER.index(key), axis=1)
    assert np.max(others) < 1e-10


def test_closest_approach_geometry():
    sc = FlybyScenario.from_closest_approach(3.5, 0.1, 0.2)
    assert sc.r0 == pytest.approx(3.5, rel=1e-14)
    tc = sc.closest_approach_time
    assert np.linalg.norm(sc.separation(tc)) == pytest.approx(0.1, rel=1e-12)
    s = np.linspace(0, tc, 7)
    d_before = np.linalg.norm(sc.separation(tc - s), axis=-1)
    d_after = np.linalg.norm(sc.separation(tc + s), axis=-1)
    assert np.allclose(d_before, d_after, rtol=1e-12)


def test_reflected_trajectory_mirrors_separations():
    a = FlybyScenario((1.0, 0.0, -3.0), 0.05)
    T = 120.0
    b = FlybyScenario(tuple(a.separation(T)), 0.05, direction=(0.0, 0.0, -1.0))
    t = np.linspace(0, T, 25)
    assert np.allclose(np.linalg.norm(b.separation(t), axis=-1),
                       np.linalg.norm(a.separation(T - t), axis=-1), rtol=1e-13)


@pytest.mark.parametrize("r_m", [0.0, -0.1, 4.0])
def test_closest_approach_validation(r_m):
    with pytest.raises(ValueError):
        FlybyScenario.from_closest_approach(3.5, r_m, 0.2)


def test_scenario_validation():
    with pytest.raises(ValueError):
        FlybyScenario((0, 0, 1), -0.1)
    with pytest.raises(ValueError):
        FlybyScenario((0, 0, 0), 0.1)
    with pytest.raises(ValueError):
        FlybyScenario((0, 0, 1), 0.1, transverse="sideways")


def test_flyby_records_track():
    sc = FlybyScenario.from_closest_approach(3.5, 0.5, 0.5, initial_mode=(1, 1), transverse="in-plane")
    res = flyby(sc, IntegrationPlan(dt=0.005, t_end=14.0, sample_stride=20))
    assert res.kr.min() == pytest.approx(0.5, abs=0.05)
    assert np.allclose(res.populations.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diff(res.P_ex) <= 0)
    assert res.metadata["transverse"] == "in-plane"
