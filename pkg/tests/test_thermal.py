import numpy as np
import pytest

from phaserandom.sampling import stream
from phaserandom.statecore import DimensionCapError, hs_distance_sq, is_density_matrix
from phaserandom.thermal import (
    BipartiteSplit,
    RestrictedSubspace,
    build_subspace,
    canonical_state,
    flatness_family,
    hamiltonian_subspace,
    random_subspace,
    reduced_eigenstate,
    restricted_amplitudes,
    rho_hat_s,
    shared_system_subspace,
    thermal_sweep,
    thermalization_lhs,
)


def random_amps(d, seed):
    a = np.abs(stream(seed, 7).standard_normal(d))
    return a / np.linalg.norm(a)


def test_split_validation():
    assert BipartiteSplit(2, 8).dim == 16
    with pytest.raises(ValueError):
        BipartiteSplit(1, 8)
    with pytest.raises(DimensionCapError):
        BipartiteSplit(2, 2**14)


def test_subspace_must_be_orthonormal():
    with pytest.raises(ValueError):
        RestrictedSubspace(np.ones((4, 2)))


def test_build_subspace_windows():
    rng = stream(0, 0)
    g = rng.standard_normal((8, 8))
    w, v = np.linalg.eigh(g + g.T)
    assert build_subspace(w, v, 0.0, 1e3).d_r == 8
    with pytest.raises(ValueError):
        build_subspace(w, v, 1e4, 1.0)
    gap = np.min(np.diff(w))
    assert build_subspace(w, v, w[3], gap / 2).d_r == 1
    # boundaries are strict
    with pytest.raises(ValueError):
        build_subspace(w, v, w[3] + gap / 2, gap / 2 * (1 - 1e-12))


def test_reduced_eigenstate_examples():
    split = BipartiteSplit(2, 2)
    s = np.array([0.6, 0.8j])
    eps = np.array([1.0, 0.0])
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    product = RestrictedSubspace(np.kron(s, eps)[:, None])
    assert np.allclose(reduced_eigenstate(product, 0, split), np.outer(s, s.conj()))
    entangled = RestrictedSubspace(bell[:, None])
    assert np.allclose(reduced_eigenstate(entangled, 0, split), np.eye(2) / 2)
    with pytest.raises(IndexError):
        reduced_eigenstate(entangled, 1, split)
    big = BipartiteSplit(2, 4)
    rho = reduced_eigenstate(random_subspace(big, 3, stream(1, 0)), 2, big)
    assert abs(np.trace(rho) - 1) < 1e-10 and is_density_matrix(rho)


def test_rho_hat_examples():
    split = BipartiteSplit(2, 8)
    one = random_subspace(split, 1, stream(2, 0))
    assert np.allclose(rho_hat_s([1.0], one, split), reduced_eigenstate(one, 0, split))
    assert np.allclose(canonical_state(one, split), rho_hat_s([1.0], one, split))
    sub = random_subspace(split, 5, stream(2, 1))
    amps = np.zeros(5)
    amps[0] = 1
    assert np.allclose(rho_hat_s(amps, sub, split), reduced_eigenstate(sub, 0, split))
    assert np.allclose(rho_hat_s(np.full(5, 1 / np.sqrt(5)), sub, split), canonical_state(sub, split))


def test_canonical_state_examples():
    split = BipartiteSplit(3, 4)
    full = RestrictedSubspace(np.eye(12))
    assert np.allclose(canonical_state(full, split), np.eye(3) / 3)
    shared = shared_system_subspace(split, 3, stream(3, 0))
    rho = canonical_state(shared, split)
    assert purity_of(rho) == pytest.approx(1.0)


def purity_of(rho):
    return float(np.sum(np.abs(rho) ** 2))


@pytest.mark.parametrize("seed", range(5))
def test_lhs_equals_hs_distance(seed):
    split = BipartiteSplit(2, 8)
    sub = random_subspace(split, 6, stream(seed, 1))
    amps = random_amps(6, seed)
    lhs = thermalization_lhs(amps, sub, split)
    oracle = hs_distance_sq(rho_hat_s(amps, sub, split), canonical_state(sub, split))
    assert lhs >= -1e-12
    assert abs(lhs - oracle) < 1e-10


def test_extreme_cases_vanish():
    split = BipartiteSplit(2, 8)
    sub = hamiltonian_subspace(split, 6, stream(4, 0))
    assert sub.d_r == 6
    assert thermalization_lhs(np.full(6, 1 / np.sqrt(6)), sub, split) <= 1e-12
    shared = shared_system_subspace(split, 6, stream(4, 1))
    assert thermalization_lhs(random_amps(6, 4), shared, split) <= 1e-12


def test_restricted_amplitudes_uses_moduli():
    split = BipartiteSplit(2, 4)
    sub = random_subspace(split, 3, stream(5, 0))
    phi0 = sub.vectors @ np.array([0.6, -0.8j, 0.0])
    assert np.allclose(restricted_amplitudes(phi0, sub), [0.6, 0.8, 0.0])
    with pytest.raises(ValueError):
        restricted_amplitudes(np.zeros(8), sub)


def test_sweep_rows():
    split = BipartiteSplit(2, 16)
    rows = thermal_sweep(split, 8, 10, 0, "equal")
    assert all(r.lhs <= 1e-12 and r.trace_distance < 1e-8 and r.extreme for r in rows)
    rows = thermal_sweep(split, 8, 10, 0, "random", "shared")
    assert all(r.lhs <= 1e-12 for r in rows)
    rows = thermal_sweep(split, 8, 10, 0, "peaked")
    assert all(abs(r.lhs - r.hs_sq) < 1e-10 and r.trace_distance >= 0 for r in rows)
    assert rows == thermal_sweep(split, 8, 10, 0, "peaked")


def test_flatter_amplitudes_thermalize_better_on_average():
    # recorded trend only; the endpoints are far apart so this is robust
    split = BipartiteSplit(2, 16)
    spike = np.mean([r.lhs for r in thermal_sweep(split, 8, 40, 1, flatness_family(0.0))])
    flat = np.mean([r.lhs for r in thermal_sweep(split, 8, 40, 1, flatness_family(1.0))])
    assert flat < spike
