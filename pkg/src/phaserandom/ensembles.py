"""Phase-random and Haar ensembles: sampling, closed-form averages and
concentration experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .sampling import McEstimate, sample_values, stream
from .statecore import (
    NORM_TOL,
    DimensionCapError,
    PureState,
    batch_linear_entropy,
    batch_meyer_wallach,
    complement,
    matricize,
    partial_trace,
    purity,
    subsystem,
)

TWO_PI = 2.0 * np.pi
MAX_EXPLICIT_QUBITS = 12
MAX_ORACLE_QUBITS = 6
CONCENTRATION_CONST = 1.0 / (2**11 * np.pi**2)
DEFAULT_EPS_GRID = (0.02, 0.05, 0.1, 0.2, 0.3)


# ---------------------------------------------------------------- bases


def _check_unitary(u: np.ndarray, what: str) -> None:
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"{what} must be square, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > NORM_TOL:
        raise ValueError(f"{what} is not unitary (max deviation {err:.2e})")


@dataclass(frozen=True)
class ComputationalBasis:
    num_qubits: int

    is_product = True

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs, dtype=complex)

    def matrix(self) -> np.ndarray:
        return np.eye(2**self.num_qubits, dtype=complex)


@dataclass(frozen=True)
class ProductBasis:
    """Basis vectors ``U_0|n_0> (x) ... (x) U_{N-1}|n_{N-1}>``."""

    factors: tuple

    is_product = True

    def __post_init__(self):
        factors = tuple(np.asarray(f, dtype=complex) for f in self.factors)
        if not factors:
            raise ValueError("product basis needs at least one factor")
        for k, f in enumerate(factors):
            if f.shape != (2, 2):
                raise ValueError(f"factor {k} must be 2x2")
            _check_unitary(f, f"factor {k}")
        object.__setattr__(self, "factors", factors)

    @property
    def num_qubits(self) -> int:
        return len(self.factors)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=complex)
        n = self.num_qubits
        lead = coeffs.shape[:-1]
        t = coeffs.reshape(lead + (2,) * n)
        for k, u in enumerate(self.factors):
            ax = len(lead) + k
            t = np.moveaxis(np.tensordot(u, t, axes=([1], [ax])), 0, ax)
        return t.reshape(coeffs.shape)

    def matrix(self) -> np.ndarray:
        if self.num_qubits > MAX_EXPLICIT_QUBITS:
            raise DimensionCapError("product basis too large to materialize")
        m = np.ones((1, 1), dtype=complex)
        for u in self.factors:
            m = np.kron(m, u)
        return m


@dataclass(frozen=True)
class ExplicitBasis:
    """Columns of ``matrix`` are the basis vectors."""

    matrix_: np.ndarray = field(repr=False)

    is_product = False

    def __post_init__(self):
        u = np.asarray(self.matrix_, dtype=complex)
        _check_unitary(u, "basis matrix")
        n = u.shape[0].bit_length() - 1
        if (1 << n) != u.shape[0] or n < 1:
            raise ValueError("basis dimension must be a power of two")
        if n > MAX_EXPLICIT_QUBITS:
            raise DimensionCapError(f"explicit bases are limited to {MAX_EXPLICIT_QUBITS} qubits")
        object.__setattr__(self, "matrix_", u)

    @property
    def num_qubits(self) -> int:
        return self.matrix_.shape[0].bit_length() - 1

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs, dtype=complex) @ self.matrix_.T

    def matrix(self) -> np.ndarray:
        return self.matrix_


Basis = Union[ComputationalBasis, ProductBasis, ExplicitBasis]


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary by QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_product_basis(n: int, rng: np.random.Generator) -> ProductBasis:
    return ProductBasis(tuple(random_unitary(2, rng) for _ in range(n)))


# ---------------------------------------------------------------- specs


def check_amplitudes(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1:
        raise ValueError("amplitude profile must be a vector")
    if np.any(r < 0) or np.any(r > 1):
        raise ValueError("amplitudes must lie in [0, 1]")
    total = float(np.sum(r**2))
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"squared amplitudes sum to {total!r}, not 1")
    return r


def equal_amplitudes(n: int) -> np.ndarray:
    return np.full(2**n, 2.0 ** (-n / 2))


def random_amplitudes(n: int, rng: np.random.Generator) -> np.ndarray:
    r = np.abs(rng.standard_normal(2**n))
    return r / np.linalg.norm(r)


@dataclass(frozen=True)
class EnsembleSpec:
    amplitudes: np.ndarray
    basis: Basis = None

    def __post_init__(self):
        r = check_amplitudes(self.amplitudes)
        n = r.size.bit_length() - 1
        if (1 << n) != r.size or n < 1:
            raise ValueError("amplitude profile length must be 2**N with N >= 1")
        basis = self.basis if self.basis is not None else ComputationalBasis(n)
        if basis.num_qubits != n:
            raise ValueError(f"basis has {basis.num_qubits} qubits, amplitudes imply {n}")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "amplitudes", r)
        object.__setattr__(self, "basis", basis)

    @property
    def num_qubits(self) -> int:
        return self.basis.num_qubits

    @classmethod
    def equal(cls, n: int, basis: Basis | None = None) -> "EnsembleSpec":
        return cls(equal_amplitudes(n), basis)

    def states(self, phases: np.ndarray) -> np.ndarray:
        """Statevectors for one phase vector or a stack of them."""
        return self.basis.apply(self.amplitudes * np.exp(1j * np.asarray(phases)))


# ---------------------------------------------------------------- sampling


def draw_phases(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, TWO_PI, 2**n)


def sample_phase_state(spec: EnsembleSpec, rng: np.random.Generator) -> tuple[PureState, np.ndarray]:
    phases = draw_phases(spec.num_qubits, rng)
    psi = spec.states(phases)
    return PureState(psi / np.linalg.norm(psi)), phases


def _draw_gaussian(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((2, 2**n))
    return g[0] + 1j * g[1]


def sample_haar_state(n: int, rng: np.random.Generator) -> PureState:
    if n < 1:
        raise ValueError("need at least one qubit")
    v = _draw_gaussian(n, rng)
    return PureState(v / np.linalg.norm(v))


Source = Union[int, EnsembleSpec]


def ensemble_values(
    source: Source,
    n_samples: int,
    seed: int,
    A: Iterable[int] | None = None,
    measure: str = "linear",
    workers: int = 1,
) -> np.ndarray:
    """Per-sample entanglement values.

    ``source`` is an int ``N`` for Haar states or an :class:`EnsembleSpec`
    for phase-random states. ``measure`` is ``"linear"`` (needs ``A``) or
    ``"meyer_wallach"``.
    """
    if isinstance(source, EnsembleSpec):
        n = source.num_qubits

        def draw(rng):
            return draw_phases(n, rng)

        def to_states(stack):
            return source.states(stack)

    else:
        n = int(source)
        if n < 1:
            raise ValueError("need at least one qubit")

        def draw(rng):
            return _draw_gaussian(n, rng)

        def to_states(stack):
            return stack / np.linalg.norm(stack, axis=1, keepdims=True)

    if measure == "linear":
        if A is None:
            raise ValueError("linear entropy needs a subsystem")
        A = subsystem(A, n)

        def evaluate(stack):
            return batch_linear_entropy(to_states(stack), A, n)

    elif measure in ("meyer_wallach", "mw"):
        if n < 2:
            raise ValueError("Meyer-Wallach needs at least two qubits")

        def evaluate(stack):
            return batch_meyer_wallach(to_states(stack), n)

    else:
        raise ValueError(f"unknown measure {measure!r}")
    return sample_values(draw, evaluate, n_samples, seed, workers=workers)


def estimate_average(
    source: Source, A: Iterable[int] | None, n_samples: int, seed: int, measure: str = "linear"
) -> McEstimate:
    return McEstimate.from_values(ensemble_values(source, n_samples, seed, A, measure), seed)


# ---------------------------------------------------------------- closed forms


def _check_split(n: int, na: int) -> None:
    if not 1 <= na < n:
        raise ValueError(f"need 1 <= N_A < N, got N={n}, N_A={na}")


def analytic_random_average(n: int, na: int, exact: bool = False):
    _check_split(n, na)
    val = 1 - Fraction(2**na + 2 ** (n - na), 2**n + 1)
    return val if exact else float(val)


def analytic_eqsep_max(n: int, na: int, exact: bool = False):
    _check_split(n, na)
    val = 1 - Fraction(2**na + 2 ** (n - na) - 1, 2**n)
    return val if exact else float(val)


def volume_law_bound(n: int, na: int) -> float:
    """Lower bound (bits) on the long-time von Neumann entanglement."""
    _check_split(n, na)
    x = 2.0 ** (2 * na - n) - 2.0 ** (na - n)
    return na - math.log1p(x) / math.log(2)


def ensemble_density(spec: EnsembleSpec) -> np.ndarray:
    p = spec.amplitudes**2
    if isinstance(spec.basis, ComputationalBasis):
        return np.diag(p).astype(complex)
    u = spec.basis.matrix()
    return (u * p) @ u.conj().T


def _marginal_purity(p: np.ndarray, keep: Sequence[int], n: int) -> float:
    t = p.reshape((2,) * n)
    drop = tuple(q for q in range(n) if q not in set(keep))
    marg = t.sum(axis=drop) if drop else t
    return float(np.sum(marg**2))


def _product_basis_average(p: np.ndarray, A: Sequence[int], n: int) -> float:
    # basis entanglement vanishes; all partial traces reduce to marginals of p
    return (
        1.0
        - _marginal_purity(p, A, n)
        - _marginal_purity(p, complement(A, n), n)
        + float(np.sum(p**2))
    )


def analytic_phase_average(spec: EnsembleSpec, A: Iterable[int]) -> float:
    """Exact phase average of E_L: linear mutual information of the
    ensemble density minus the r^4-weighted basis entanglement."""
    n = spec.num_qubits
    A = subsystem(A, n)
    p = spec.amplitudes**2
    if spec.basis.is_product:
        return _product_basis_average(p, A, n)
    if n > MAX_EXPLICIT_QUBITS:
        raise DimensionCapError(f"explicit bases are limited to {MAX_EXPLICIT_QUBITS} qubits")
    rho = ensemble_density(spec)
    mutual = (
        (1.0 - purity(partial_trace(rho, A, n)))
        + (1.0 - purity(partial_trace(rho, complement(A, n), n)))
        - (1.0 - float(np.sum(p**2)))
    )
    basis_ent = batch_linear_entropy(spec.basis.matrix().T, A, n)
    return float(mutual - np.sum(p**2 * basis_ent))


def phase_fourth_moment(n, m, k, l):
    """Average of exp(i(phi_n - phi_m + phi_k - phi_l)) over uniform phases.

    Accepts integers or broadcastable integer arrays.
    """
    n, m, k, l = (np.asarray(x) for x in (n, m, k, l))
    out = (n == m) & (k == l)
    out = out.astype(int) + ((n == l) & (m == k)) - ((n == m) & (n == k) & (n == l))
    return int(out) if out.ndim == 0 else out


def fourth_moment_oracle(spec: EnsembleSpec, A: Iterable[int]) -> float:
    """Phase average of E_L by brute-force expansion over every index
    quadruple, weighting each term with :func:`phase_fourth_moment`."""
    n = spec.num_qubits
    if n > MAX_ORACLE_QUBITS:
        raise DimensionCapError(f"oracle limited to {MAX_ORACLE_QUBITS} qubits")
    A = subsystem(A, n)
    r = spec.amplitudes
    d = 2**n
    # v[n, a, x] = (<a|_A (x) 1) |u_n>
    v = matricize(spec.basis.matrix().T, A, n)
    # g[a, a', m, n] = <u~_m^{a'} | u~_n^{a}>
    g = np.einsum("max,nbx->bamn", v.conj(), v)
    da = g.shape[0]
    g_flat = g.reshape(da * da, d, d)
    idx = np.arange(d)
    mm, kk, ll = np.meshgrid(idx, idx, idx, indexing="ij")
    r3 = r[:, None, None] * r[None, :, None] * r[None, None, :]
    total = 0.0 + 0.0j
    for nn in range(d):
        f = phase_fourth_moment(nn, mm, kk, ll)
        # h[m, k, l] = sum_{a,a'} g[a,a',m,nn] * conj(g[a,a',k,l])
        h = np.tensordot(g_flat[:, :, nn], g_flat.conj(), axes=([0], [0]))
        total += r[nn] * np.sum(f * r3 * h)
    return float(1.0 - total.real)


def separable_bound(spec: EnsembleSpec) -> tuple[float, float]:
    """Return ``(S_L(Phi), 1 - 1/R)`` for a product-basis ensemble."""
    if not spec.basis.is_product:
        raise ValueError("separable bound requires a product basis")
    p = spec.amplitudes**2
    support = int(np.count_nonzero(p > 0))
    return 1.0 - float(np.sum(p**2)), 1.0 - 1.0 / support


# ---------------------------------------------------------------- dynamics


def time_average_entanglement(
    energies,
    spec: EnsembleSpec,
    A: Iterable[int],
    t_max: float,
    n_times: int,
    seed: int,
    phases0=None,
) -> McEstimate:
    """Average E_L along exp(-iHt)|phi_0> at uniformly drawn times (hbar = 1)."""
    n = spec.num_qubits
    A = subsystem(A, n)
    energies = np.asarray(energies, dtype=float)
    if energies.shape != (2**n,):
        raise ValueError("need one energy per basis state")
    phases0 = np.zeros(2**n) if phases0 is None else np.asarray(phases0, dtype=float)
    times = stream(seed, 0).uniform(0.0, t_max, n_times)
    phases = phases0[None, :] - times[:, None] * energies[None, :]
    values = batch_linear_entropy(spec.states(phases), A, n)
    return McEstimate.from_values(values, seed)


# ---------------------------------------------------------------- concentration


def phase_distance(p1, p2) -> float:
    p1, p2 = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("phase vectors differ in length")
    return float(np.sum(np.abs(p1 - p2)) / (TWO_PI * p1.size))


def lipschitz_check(spec: EnsembleSpec, A: Iterable[int], n_pairs: int, seed: int) -> float:
    """Largest value of |dE(phi) - dE(phi')| - 4 sqrt(pi) sqrt(d(phi, phi'))
    over random pairs; never positive if the Lipschitz bound holds.

    Half the pairs are independent draws, half are local perturbations with
    log-uniform scale so that small distances are exercised.
    """
    n = spec.num_qubits
    A = subsystem(A, n)
    mean = analytic_phase_average(spec, A)
    worst = -np.inf
    for i in range(n_pairs):
        rng = stream(seed, i)
        phi = draw_phases(n, rng)
        if i % 2 == 0:
            psi = draw_phases(n, rng)
        else:
            scale = 10.0 ** rng.uniform(-6, 0)
            psi = np.mod(phi + scale * rng.standard_normal(phi.size), TWO_PI)
        e = batch_linear_entropy(spec.states(np.stack([phi, psi])), A, n)
        lhs = abs(abs(e[0] - mean) - abs(e[1] - mean))
        rhs = 4.0 * math.sqrt(math.pi) * math.sqrt(phase_distance(phi, psi))
        worst = max(worst, lhs - rhs)
    return float(worst)


def concentration_bound(n: int, eps: float) -> float:
    return math.exp(-CONCENTRATION_CONST * eps**4 * 2**n)


@dataclass(frozen=True)
class ConcentrationRow:
    eps: float
    tail: float
    bound: float
    tail_se: float

    @property
    def passed(self) -> bool:
        return self.tail <= self.bound + 3.0 * self.tail_se


@dataclass(frozen=True)
class ConcentrationResult:
    n: int
    subsystem: tuple
    n_samples: int
    seed: int
    mean: float
    target: float
    sigma: float
    sigma_se: float
    rows: tuple

    @property
    def sigma_cap(self) -> float:
        return 2.0 ** (-self.n)


def std_standard_error(values: np.ndarray) -> float:
    """Large-sample standard error of the sample standard deviation."""
    values = np.asarray(values, dtype=float)
    c = values - values.mean()
    s2 = np.mean(c**2)
    m4 = np.mean(c**4)
    if s2 == 0:
        return 0.0
    return float(math.sqrt(max(m4 - s2**2, 0.0) / (4.0 * s2 * values.size)))


def concentration_experiment(
    n: int,
    A: Iterable[int],
    n_samples: int,
    seed: int,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
) -> ConcentrationResult:
    """Empirical tails of |E_L - mean| for equal amplitudes in the
    computational basis, against exp(-c eps^4 2^N)."""
    A = subsystem(A, n)
    spec = EnsembleSpec.equal(n)
    values = ensemble_values(spec, n_samples, seed, A)
    target = analytic_eqsep_max(n, len(A))
    dev = np.abs(values - target)
    offset = 2.0 / 2**n
    rows = []
    for eps in eps_grid:
        tail = float(np.mean(dev > offset + eps))
        rows.append(
            ConcentrationRow(
                eps=float(eps),
                tail=tail,
                bound=concentration_bound(n, eps),
                tail_se=math.sqrt(tail * (1 - tail) / n_samples),
            )
        )
    return ConcentrationResult(
        n=n,
        subsystem=A,
        n_samples=n_samples,
        seed=seed,
        mean=float(values.mean()),
        target=target,
        sigma=float(values.std(ddof=1)),
        sigma_se=std_standard_error(values),
        rows=tuple(rows),
    )
