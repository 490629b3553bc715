import numpy as np
from hypothesis import given, settings, strategies as st

from phaserandom.circuit import expected_entropy_limit, kappa_all
from phaserandom.ensembles import (
    EnsembleSpec,
    ExplicitBasis,
    analytic_eqsep_max,
    analytic_phase_average,
    analytic_random_average,
    phase_distance,
    random_amplitudes,
    random_product_basis,
    random_unitary,
    separable_bound,
)
from phaserandom.markov import (
    PauliDistribution,
    canonical_path_bound,
    evolve_full_chain,
    reduced_transition,
    spectral_gap,
)
from phaserandom.sampling import stream
from phaserandom.statecore import (
    complement,
    linear_entropy,
    purity,
    reduced_density,
    subsystem_purity,
    trace_distance,
    von_neumann_entropy,
)
from phaserandom.thermal import BipartiteSplit, random_subspace, thermalization_lhs

seeds = st.integers(0, 2**31 - 1)
fast = settings(max_examples=40, deadline=None)


@st.composite
def state_and_mask(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    seed = draw(seeds)
    rng = stream(seed, 0)
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    size = draw(st.integers(1, n - 1))
    A = tuple(sorted(draw(st.permutations(range(n)))[:size]))
    return v / np.linalg.norm(v), A, n


def random_density(d, seed):
    rng = stream(seed, 1)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@fast
@given(state_and_mask())
def test_schmidt_symmetry(sm):
    psi, A, n = sm
    assert abs(linear_entropy(psi, A) - linear_entropy(psi, complement(A, n))) < 1e-10


@fast
@given(state_and_mask(max_n=7))
def test_linear_entropy_lower_bounds_von_neumann(sm):
    psi, A, _ = sm
    el = linear_entropy(psi, A)
    assert -np.log2(1 - el) <= von_neumann_entropy(reduced_density(psi, A)) + 1e-8


@fast
@given(state_and_mask(max_n=10))
def test_purity_routes_agree(sm):
    psi, A, _ = sm
    if len(A) <= 6:
        assert abs(subsystem_purity(psi, A) - purity(reduced_density(psi, A))) < 1e-10


@fast
@given(st.integers(1, 3), seeds)
def test_trace_distance_metric(q, seed):
    d = 2**q
    a, b, c = (random_density(d, seed + k) for k in range(3))
    assert abs(trace_distance(a, b) - trace_distance(b, a)) < 1e-12
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9
    assert 0 <= trace_distance(a, b) <= 1


def test_eqsep_beats_haar_everywhere():
    for n in range(2, 21):
        for na in range(1, n):
            assert analytic_eqsep_max(n, na, exact=True) > analytic_random_average(n, na, exact=True)


@fast
@given(st.integers(2, 7), seeds)
def test_product_basis_average_under_separable_bound(n, seed):
    rng = stream(seed, 2)
    spec = EnsembleSpec(random_amplitudes(n, rng), random_product_basis(n, rng))
    A = list(range(1 + seed % (n - 1)))
    avg = analytic_phase_average(spec, A)
    s_sep, cap = separable_bound(spec)
    assert -1e-12 <= avg <= s_sep + 1e-12
    assert s_sep <= cap + 1e-10


@fast
@given(st.integers(2, 5), seeds)
def test_phase_average_range(n, seed):
    rng = stream(seed, 3)
    spec = EnsembleSpec(random_amplitudes(n, rng), ExplicitBasis(random_unitary(2**n, rng)))
    na = 1 + seed % (n - 1)
    avg = analytic_phase_average(spec, range(na))
    assert -1e-12 <= avg <= 1 - 2.0 ** -min(na, n - na) + 1e-12


@fast
@given(st.integers(2, 8), seeds)
def test_limit_equals_phase_average(n, seed):
    r = random_amplitudes(n, stream(seed, 4))
    A = [q for q in range(n) if (seed >> q) & 1][: n - 1] or [0]
    assert abs(expected_entropy_limit(r, A) - analytic_phase_average(EnsembleSpec(r), A)) < 1e-9


@fast
@given(st.integers(2, 9), seeds)
def test_kappa_nonnegative_and_normalized(n, seed):
    r = random_amplitudes(n, stream(seed, 5))
    k = kappa_all(r)
    assert np.all(k >= 0)
    assert abs(k.sum() + np.sum(r**4) - 1) < 1e-12


@fast
@given(st.integers(1, 64), seeds)
def test_phase_distance_properties(d, seed):
    rng = stream(seed, 6)
    p, q = rng.uniform(0, 2 * np.pi, (2, d))
    assert phase_distance(p, q) == phase_distance(q, p)
    assert 0 <= phase_distance(p, q) <= 1


def test_gap_bound_holds_for_every_chain():
    for n in range(2, 13):
        for g in range(1, n + 1):
            c = reduced_transition(n, g)
            assert spectral_gap(c) >= canonical_path_bound(c)[1] - 1e-10


@fast
@given(st.integers(2, 4), st.integers(0, 6), seeds)
def test_full_chain_sector_conservation(n, steps, seed):
    w = stream(seed, 7).exponential(size=4**n)
    d = PauliDistribution(n, w / w.sum())
    out = evolve_full_chain(d, steps)
    a, b = d.sector_masses(), out.sector_masses()
    assert all(abs(a[k] - b.get(k, 0.0)) < 1e-12 for k in a)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), seeds)
def test_thermal_lhs_nonnegative(d_r, seed):
    split = BipartiteSplit(2, 8)
    rng = stream(seed, 8)
    sub = random_subspace(split, d_r, rng)
    a = np.abs(rng.standard_normal(d_r))
    assert thermalization_lhs(a / np.linalg.norm(a), sub, split) >= -1e-12
