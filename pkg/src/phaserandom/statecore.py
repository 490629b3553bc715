"""Dense statevectors, partial traces and entropy functionals.

Qubit ``k`` (0-based) is the ``k``-th most significant bit of the basis
index, so reshaping an amplitude vector to ``(2,) * N`` puts qubit ``k`` on
axis ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

NORM_TOL = 1e-10
EIG_FLOOR = 1e-12
NEG_EIG_TOL = 1e-8
# explicit reduced matrices are at most 2**13 x 2**13
MAX_REDUCED_QUBITS = 13


class DimensionCapError(ValueError):
    """Requested object would exceed the configured dense-dimension cap."""


class NumericalError(RuntimeError):
    """An eigensolver failed or produced an inadmissible spectrum."""


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        n = num_qubits_of(amps)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "_n", n)

    @property
    def num_qubits(self) -> int:
        return self._n

    @classmethod
    def from_vector(cls, vec, normalize: bool = False) -> "PureState":
        vec = np.asarray(vec, dtype=complex)
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(vec)


StateLike = Union[PureState, np.ndarray, Sequence[complex]]


def num_qubits_of(amps: np.ndarray) -> int:
    if amps.ndim != 1:
        raise ValueError("amplitude vector must be one-dimensional")
    dim = amps.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise ValueError(f"length {dim} is not a power of two >= 2")
    return n


def as_amplitudes(state: StateLike) -> np.ndarray:
    if isinstance(state, PureState):
        return state.amplitudes
    return np.asarray(state, dtype=complex)


def basis_state(bits: str | Sequence[int]) -> PureState:
    """``basis_state("010")`` is |010>, qubit 0 leftmost."""
    bits = [int(b) for b in bits]
    idx = int("".join(map(str, bits)), 2)
    vec = np.zeros(2 ** len(bits), dtype=complex)
    vec[idx] = 1.0
    return PureState(vec)


def product_state(factors: Iterable[Sequence[complex]]) -> PureState:
    vec = np.ones(1, dtype=complex)
    for f in factors:
        f = np.asarray(f, dtype=complex)
        vec = np.kron(vec, f / np.linalg.norm(f))
    return PureState(vec)


def subsystem(A: Iterable[int], n: int, proper: bool = True) -> tuple[int, ...]:
    """Validate a subsystem mask of 0-based qubit indices."""
    qubits = tuple(sorted(set(int(q) for q in A)))
    if not qubits:
        raise ValueError("subsystem must be non-empty")
    if qubits[0] < 0 or qubits[-1] >= n:
        raise ValueError(f"subsystem {qubits} out of range for {n} qubits")
    if proper and len(qubits) == n:
        raise ValueError("subsystem must be a proper subset of the qubits")
    return qubits


def complement(A: Sequence[int], n: int) -> tuple[int, ...]:
    inside = set(A)
    return tuple(q for q in range(n) if q not in inside)


def matricize(amps: np.ndarray, A: Sequence[int], n: int) -> np.ndarray:
    """Reshape amplitudes (optionally batched on leading axes) into
    ``(..., 2**|A|, 2**|complement|)``."""
    lead = amps.shape[:-1]
    rest = complement(A, n)
    k = len(lead)
    t = amps.reshape(lead + (2,) * n)
    perm = tuple(range(k)) + tuple(k + q for q in A) + tuple(k + q for q in rest)
    return t.transpose(perm).reshape(lead + (2 ** len(A), 2 ** len(rest)))


def reduced_density(state: StateLike, A: Iterable[int]) -> np.ndarray:
    """Return tr_{complement of A} |psi><psi| as a ``2**|A|`` square matrix."""
    amps = as_amplitudes(state)
    n = num_qubits_of(amps)
    A = subsystem(A, n, proper=False)
    if len(A) > MAX_REDUCED_QUBITS:
        raise DimensionCapError(
            f"reduced matrix on {len(A)} qubits exceeds cap of {MAX_REDUCED_QUBITS}"
        )
    m = matricize(amps, A, n)
    return m @ m.conj().T


def partial_trace(rho: np.ndarray, keep: Iterable[int], n: int) -> np.ndarray:
    """Partial trace of an ``n``-qubit density matrix onto ``keep``."""
    keep = subsystem(keep, n, proper=False)
    rest = complement(keep, n)
    t = np.asarray(rho).reshape((2,) * (2 * n))
    perm = keep + rest + tuple(n + q for q in keep) + tuple(n + q for q in rest)
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    t = t.transpose(perm).reshape(dk, dr, dk, dr)
    return np.einsum("ajbj->ab", t)


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho) ** 2))


def _purity_from_matrix(m: np.ndarray) -> np.ndarray:
    rows, cols = m.shape[-2:]
    if rows <= cols:
        g = m @ np.swapaxes(m.conj(), -1, -2)
    else:
        g = np.swapaxes(m.conj(), -1, -2) @ m
    return np.sum(np.abs(g) ** 2, axis=(-2, -1))


def subsystem_purity(state: StateLike, A: Iterable[int]) -> float:
    """tr(rho_A^2) computed through the Gram matrix on the smaller side."""
    amps = as_amplitudes(state)
    n = num_qubits_of(amps)
    A = subsystem(A, n, proper=False)
    return float(_purity_from_matrix(matricize(amps, A, n)))


def batch_linear_entropy(amps: np.ndarray, A: Sequence[int], n: int) -> np.ndarray:
    """Linear entropies of a stack of statevectors with shape ``(k, 2**n)``."""
    return 1.0 - _purity_from_matrix(matricize(amps, A, n))


def linear_entropy(state: StateLike, A: Iterable[int]) -> float:
    amps = as_amplitudes(state)
    n = num_qubits_of(amps)
    A = subsystem(A, n)
    return 1.0 - subsystem_purity(amps, A)


def linear_entropy_of(rho: np.ndarray) -> float:
    return 1.0 - purity(rho)


def _hermitian_eigvals(rho: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(rho)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Hermitian eigensolver failed: {exc}") from exc


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits."""
    w = _hermitian_eigvals(np.asarray(rho))
    if w.min() < -NEG_EIG_TOL:
        raise NumericalError(f"density matrix has eigenvalue {w.min():.3e}")
    w = w[w > EIG_FLOOR]
    return float(-np.sum(w * np.log2(w)))


def meyer_wallach(state: StateLike) -> float:
    amps = as_amplitudes(state)
    n = num_qubits_of(amps)
    return 2.0 / n * sum(linear_entropy(amps, [k]) for k in range(n))


def batch_meyer_wallach(amps: np.ndarray, n: int) -> np.ndarray:
    total = sum(batch_linear_entropy(amps, (k,), n) for k in range(n))
    return 2.0 / n * total


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    rho1, rho2 = np.asarray(rho1), np.asarray(rho2)
    if rho1.shape != rho2.shape:
        raise ValueError(f"dimension mismatch: {rho1.shape} vs {rho2.shape}")
    w = _hermitian_eigvals(rho1 - rho2)
    return 0.5 * float(np.sum(np.abs(w)))


def hs_distance_sq(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """Squared Hilbert-Schmidt distance tr[(rho1 - rho2)^2]."""
    diff = np.asarray(rho1) - np.asarray(rho2)
    return float(np.sum(np.abs(diff) ** 2))


def is_density_matrix(rho: np.ndarray, tol: float = NORM_TOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        return False
    if abs(np.trace(rho).real - 1.0) > tol or abs(np.trace(rho).imag) > tol:
        return False
    return bool(_hermitian_eigvals(rho).min() >= -NEG_EIG_TOL)
