from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from phaserandom.circuit import (
    CircuitInstance,
    GateRecord,
    apply_gate,
    estimate_expected_entropy,
    estimate_trajectory,
    expected_entropy_limit,
    kappa,
    kappa_all,
    mixing_time_bound,
    replay,
    run_circuit,
    sample_circuit,
    sample_gate,
    single_run_input,
    state_digest,
    walsh_hadamard,
)
from phaserandom.ensembles import EnsembleSpec, analytic_eqsep_max, analytic_phase_average, equal_amplitudes, random_amplitudes
from phaserandom.sampling import stream
from phaserandom.statecore import basis_state

BELL_PROFILE = np.array([1, 0, 0, 1]) / np.sqrt(2)


def random_state(n, seed):
    rng = stream(seed, 0)
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def brute_limit(p, A, n):
    """Double sum over basis pairs, written out."""
    bits = lambda a: [(a >> (n - 1 - k)) & 1 for k in range(n)]
    rest = [k for k in range(n) if k not in A]
    total = 0.0
    for a, b in product(range(2**n), repeat=2):
        ba, bb = bits(a), bits(b)
        same_a = all(ba[k] == bb[k] for k in A)
        same_r = all(ba[k] == bb[k] for k in rest)
        total += p[a] * p[b] * (same_a + same_r)
    return 1 - total + sum(q * q for q in p)


def test_gate_sampling_n2():
    rng = stream(0, 0)
    assert all((g.i, g.j) == (0, 1) for g in (sample_gate(2, t, rng) for t in range(1, 50)))


def test_pair_frequencies_n5():
    inst = sample_circuit(5, 100_000, stream(1, 0))
    pairs = np.array([(g.i, g.j) for g in inst.gates])
    _, counts = np.unique(pairs, axis=0, return_counts=True)
    assert counts.size == 10
    assert np.all(np.abs(counts / 100_000 - 0.1) < 0.005)


def test_angles_uniform():
    inst = sample_circuit(3, 100_000, stream(2, 0))
    angles = np.array([g.alpha for g in inst.gates])
    counts, _ = np.histogram(angles, bins=16, range=(0, 2 * np.pi))
    expected = 100_000 / 16
    assert np.all(np.abs(counts - expected) < 4 * np.sqrt(expected))


def test_gate_record_validation():
    with pytest.raises(ValueError):
        GateRecord(1, 2, 2, 0.1, 0.1)
    with pytest.raises(ValueError):
        GateRecord(0, 0, 1, 0.1, 0.1)
    with pytest.raises(ValueError):
        GateRecord(1, 0, 1, 7.0, 0.1)
    with pytest.raises(ValueError):
        apply_gate(basis_state("00"), GateRecord(1, 0, 2, 0.1, 0.1))


def test_gate_on_all_zeros_is_identity():
    s = basis_state("000")
    out = apply_gate(s, GateRecord(1, 0, 2, 1.3, 2.1))
    assert np.allclose(out.amplitudes, s.amplitudes)


def test_pure_cz():
    psi = np.full(8, 1 / np.sqrt(8), dtype=complex)
    out = apply_gate(psi, GateRecord(1, 0, 2, 0.0, 0.0)).amplitudes
    signs = np.array([1, 1, 1, 1, 1, -1, 1, -1])
    assert np.allclose(out, psi * signs)


def test_gate_phases_per_amplitude():
    psi = random_state(3, 4)
    alpha, beta = 0.7, 2.9
    out = apply_gate(psi, GateRecord(1, 1, 2, alpha, beta)).amplitudes
    for a in range(8):
        ai, aj = (a >> 1) & 1, a & 1
        factor = np.exp(1j * (alpha * ai + beta * aj)) * (-1) ** (ai * aj)
        assert out[a] == pytest.approx(psi[a] * factor)


def test_gates_commute():
    psi = random_state(4, 5)
    g1, g2 = GateRecord(1, 0, 3, 0.4, 1.1), GateRecord(1, 3, 1, 2.2, 5.0)
    a = apply_gate(apply_gate(psi, g1), g2).amplitudes
    b = apply_gate(apply_gate(psi, g2), g1).amplitudes
    assert np.max(np.abs(a - b)) < 1e-12


def test_basis_state_stays_unentangled():
    traj, _ = run_circuit(basis_state("0110"), 200, [0, 1], stream(6, 0), record_every=10)
    assert np.allclose(traj.values, 0.0, atol=1e-14)


def test_bell_profile_stays_at_half():
    psi, rng = single_run_input(BELL_PROFILE, 7)
    traj, _ = run_circuit(psi, 100, [0], rng, record_every=1)
    assert len(traj.steps) == 101
    assert np.allclose(traj.values, 0.5, atol=1e-12)


def test_norm_and_moduli_preserved():
    psi = random_state(5, 8)
    traj, inst, final = run_circuit(psi, 10_000, [0, 1], stream(8, 1), return_state=True)
    assert abs(np.linalg.norm(final.amplitudes) - 1) < 1e-9
    assert np.max(np.abs(np.abs(final.amplitudes) - np.abs(psi))) < 1e-12
    assert traj.steps[-1] == 10_000 and traj.steps[1] == 5


def test_instance_roundtrip_and_replay():
    psi, rng = single_run_input(equal_amplitudes(4), 9)
    _, inst, final = run_circuit(psi, 300, [0], rng, return_state=True)
    inst = CircuitInstance(inst.n, inst.gates, 9)
    back = CircuitInstance.from_text(inst.to_text())
    assert back == inst
    assert state_digest(replay(back, psi)) == state_digest(final.amplitudes)
    with pytest.raises(ValueError):
        CircuitInstance.from_text("4 2 0\n1 1 2 0.1 0.2\n")


@pytest.mark.parametrize(
    "r, A, value",
    [(np.array([1, 1, 0, 0]) / np.sqrt(2), [0], 0.0), (BELL_PROFILE, [0], 0.5)],
)
def test_limit_examples(r, A, value):
    assert expected_entropy_limit(r, A) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("n, na", [(2, 1), (4, 1), (4, 2), (6, 3), (7, 2)])
def test_limit_equal_amplitudes_is_eqsep(n, na):
    assert expected_entropy_limit(equal_amplitudes(n), range(na)) == pytest.approx(analytic_eqsep_max(n, na), abs=1e-14)


def test_limit_n6_half_cut_exact_value():
    # 1 - (2^3 + 2^3 - 1) / 2^6
    assert analytic_eqsep_max(6, 3, exact=True) == Fraction(49, 64)
    assert expected_entropy_limit(equal_amplitudes(6), [0, 1, 2]) == pytest.approx(49 / 64, abs=1e-15)


@pytest.mark.parametrize("seed", range(4))
def test_limit_matches_brute_force_and_phase_average(seed):
    n = 4
    r = random_amplitudes(n, stream(seed, 3))
    A = [0, 2]
    lim = expected_entropy_limit(r, A)
    assert lim == pytest.approx(brute_limit(r**2, A, n), abs=1e-12)
    assert lim == pytest.approx(analytic_phase_average(EnsembleSpec(r), A), abs=1e-9)


def test_limit_permutation_invariance():
    n = 5
    r = random_amplitudes(n, stream(10, 0))
    perm = [3, 0, 4, 1, 2]
    t = (r**2).reshape((2,) * n).transpose(perm).reshape(-1)
    A = [0, 2]
    # qubit perm[k] of the original becomes qubit k of the permuted profile
    A_new = [perm.index(q) for q in A]
    assert expected_entropy_limit(np.sqrt(t), A_new) == pytest.approx(expected_entropy_limit(r, A), abs=1e-14)


def test_kappa_examples():
    n = 4
    eq = equal_amplitudes(n)
    assert kappa(eq, []) == 0.0
    for g in ([0], [1, 3], [0, 1, 2, 3]):
        assert kappa(eq, g) == pytest.approx(2.0**-n)
    r = np.zeros(16)
    r[0] = 1
    assert np.all(kappa_all(r) == 0)


def test_kappa_all_matches_direct_and_sums_to_one():
    n = 5
    r = random_amplitudes(n, stream(11, 0))
    k = kappa_all(r)
    for mask in range(1, 2**n):
        gamma = [q for q in range(n) if mask >> (n - 1 - q) & 1]
        assert k[mask] == pytest.approx(kappa(r, gamma), abs=1e-14)
    # nonempty sectors plus the diagonal collision sum_a p_a^2
    assert k.sum() + np.sum(r**4) == pytest.approx(1.0, abs=1e-12)


def test_walsh_hadamard_is_involutive():
    v = stream(0, 0).standard_normal(32)
    assert np.allclose(walsh_hadamard(walsh_hadamard(v)) / 32, v)


def test_mixing_time_bound_examples():
    r = np.zeros(16)
    r[0] = 1
    assert mixing_time_bound(r, 0.01) == 0.0
    assert mixing_time_bound(equal_amplitudes(4), 0.01) == pytest.approx(13.150347630467653, rel=1e-12)
    assert np.isfinite(mixing_time_bound(equal_amplitudes(6), 0.01))
    with pytest.raises(ValueError):
        mixing_time_bound(equal_amplitudes(3), 0.0)


def test_mixing_bound_formula_by_hand():
    # equal amplitudes, N=4: kappa = 1/16 in every sector; take the max over gamma = 1..3
    vals = []
    for g in (1, 2, 3):
        k = 1 / 16
        pref = 4 * 3 / (2 * g * (4 - g))
        vals.append((pref * 2 ** (4 - g) * k) ** 2 * (4 - g - np.log(0.01 * k / 16)))
    assert mixing_time_bound(equal_amplitudes(4), 0.01) == pytest.approx(max(vals), rel=1e-14)


def test_depth_zero_is_input_ensemble():
    r = random_amplitudes(4, stream(12, 0))
    est = estimate_expected_entropy(r, [0, 1], 0, 4000, 3)
    assert est.within(analytic_phase_average(EnsembleSpec(r), [0, 1]))


def test_single_run_reproducible():
    a = estimate_expected_entropy(equal_amplitudes(4), [0], 50, 1, 42)
    b = estimate_expected_entropy(equal_amplitudes(4), [0], 50, 1, 42)
    assert a.mean == b.mean


def test_batched_runs_match_single_runs():
    r = random_amplitudes(3, stream(13, 0))
    est = estimate_expected_entropy(r, [1], 40, 5, 17)
    vals = []
    for run in range(5):
        psi, rng = single_run_input(r, 17, run)
        traj, _ = run_circuit(psi, 40, [1], rng, record_every=40)
        vals.append(traj.values[-1])
    assert est.mean == pytest.approx(np.mean(vals), abs=1e-13)


def test_theorem_limit_equal_amplitudes_n6():
    est = estimate_expected_entropy(equal_amplitudes(6), [0, 1, 2], 500, 200, 2024)
    assert abs(est.mean - 49 / 64) < 0.01


@pytest.mark.parametrize("n", [4, 6, 8])
def test_approach_within_ten_n_squared(n):
    A = list(range(n // 2))
    est = estimate_expected_entropy(equal_amplitudes(n), A, 10 * n * n, 200, n)
    assert abs(est.mean - expected_entropy_limit(equal_amplitudes(n), A)) < 0.02


def test_trajectory_steps():
    steps, ests = estimate_trajectory(equal_amplitudes(3), [0], 10, 20, 0, 4)
    assert steps == [0, 4, 8, 10] and len(ests) == 4
