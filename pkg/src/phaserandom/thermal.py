"""Canonical states on energy-restricted subspaces and the amplitude /
eigenstate trade-off condition for subsystem thermalization.

The composite space is ordered system-first: a vector of length
``d_S * d_E`` reshapes to ``(d_S, d_E)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .sampling import stream
from .statecore import NORM_TOL, DimensionCapError, hs_distance_sq, trace_distance

MAX_TOTAL_DIM = 2**14


@dataclass(frozen=True)
class BipartiteSplit:
    d_s: int
    d_e: int

    def __post_init__(self):
        if self.d_s < 2 or self.d_e < 2:
            raise ValueError("system and environment dimensions must be >= 2")
        if self.d_s * self.d_e > MAX_TOTAL_DIM:
            raise DimensionCapError(f"total dimension exceeds {MAX_TOTAL_DIM}")

    @property
    def dim(self) -> int:
        return self.d_s * self.d_e


@dataclass(frozen=True)
class RestrictedSubspace:
    """Orthonormal vectors stored as the columns of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or not 1 <= v.shape[1] <= v.shape[0]:
            raise ValueError("subspace needs 1 <= d_R <= total dimension columns")
        err = np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))
        if err > NORM_TOL:
            raise ValueError(f"subspace vectors are not orthonormal ({err:.2e})")
        object.__setattr__(self, "vectors", v)

    @property
    def d_r(self) -> int:
        return self.vectors.shape[1]


def _check_fit(subspace: RestrictedSubspace, split: BipartiteSplit) -> None:
    if subspace.vectors.shape[0] != split.dim:
        raise ValueError("subspace vectors do not match the split dimension")


def check_restricted_amplitudes(amps, d_r: int) -> np.ndarray:
    amps = np.asarray(amps, dtype=float)
    if amps.shape != (d_r,):
        raise ValueError(f"need {d_r} amplitudes")
    if np.any(amps < 0):
        raise ValueError("amplitudes must be nonnegative")
    if abs(np.sum(amps**2) - 1.0) > NORM_TOL:
        raise ValueError("squared amplitudes must sum to 1")
    return amps


def build_subspace(eigvals, eigvecs, e: float, delta_e: float) -> RestrictedSubspace:
    """Span of the eigenvectors with ``e - delta_e < eigenvalue < e + delta_e``."""
    eigvals = np.asarray(eigvals, dtype=float)
    inside = (eigvals > e - delta_e) & (eigvals < e + delta_e)
    if not inside.any():
        raise ValueError(f"no eigenvalue strictly inside ({e - delta_e}, {e + delta_e})")
    return RestrictedSubspace(np.asarray(eigvecs)[:, inside])


def random_subspace(split: BipartiteSplit, d_r: int, rng: np.random.Generator) -> RestrictedSubspace:
    """Orthonormalized i.i.d. complex Gaussian vectors."""
    g = rng.standard_normal((split.dim, d_r)) + 1j * rng.standard_normal((split.dim, d_r))
    q, _ = np.linalg.qr(g)
    return RestrictedSubspace(q)


def shared_system_subspace(
    split: BipartiteSplit, d_r: int, rng: np.random.Generator
) -> RestrictedSubspace:
    """Vectors |s> (x) |eps_k> with one fixed random |s>; every reduced
    eigenstate is the same pure state."""
    if d_r > split.d_e:
        raise ValueError("d_R cannot exceed d_E for a shared system factor")
    s = rng.standard_normal(split.d_s) + 1j * rng.standard_normal(split.d_s)
    s /= np.linalg.norm(s)
    g = rng.standard_normal((split.d_e, d_r)) + 1j * rng.standard_normal((split.d_e, d_r))
    env, _ = np.linalg.qr(g)
    return RestrictedSubspace(np.kron(s[:, None], env))


def hamiltonian_subspace(
    split: BipartiteSplit, d_r: int, rng: np.random.Generator
) -> RestrictedSubspace:
    """Window around the middle of a random GUE spectrum holding ``d_r``
    eigenvalues."""
    d = split.dim
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (g + g.conj().T) / 2
    w, v = np.linalg.eigh(h)
    lo = (d - d_r) // 2
    hi = lo + d_r - 1
    below = w[lo - 1] if lo > 0 else w[0] - 1.0
    above = w[hi + 1] if hi + 1 < d else w[-1] + 1.0
    left, right = (below + w[lo]) / 2, (w[hi] + above) / 2
    return build_subspace(w, v, (left + right) / 2, (right - left) / 2)


def reduced_eigenstate(subspace: RestrictedSubspace, alpha: int, split: BipartiteSplit) -> np.ndarray:
    _check_fit(subspace, split)
    if not 0 <= alpha < subspace.d_r:
        raise IndexError(f"eigenstate index {alpha} out of range")
    m = subspace.vectors[:, alpha].reshape(split.d_s, split.d_e)
    return m @ m.conj().T


def _reduced_stack(subspace: RestrictedSubspace, split: BipartiteSplit) -> np.ndarray:
    m = subspace.vectors.T.reshape(subspace.d_r, split.d_s, split.d_e)
    return m @ np.swapaxes(m.conj(), 1, 2)


def rho_hat_s(amps, subspace: RestrictedSubspace, split: BipartiteSplit) -> np.ndarray:
    _check_fit(subspace, split)
    amps = check_restricted_amplitudes(amps, subspace.d_r)
    return np.tensordot(amps**2, _reduced_stack(subspace, split), axes=1)


def canonical_state(subspace: RestrictedSubspace, split: BipartiteSplit) -> np.ndarray:
    _check_fit(subspace, split)
    proj = (subspace.vectors @ subspace.vectors.conj().T) / subspace.d_r
    t = proj.reshape(split.d_s, split.d_e, split.d_s, split.d_e)
    return np.einsum("ajbj->ab", t)


def thermalization_lhs(amps, subspace: RestrictedSubspace, split: BipartiteSplit) -> float:
    """Double sum over (r_a^2 - 1/d_R)(r_b^2 - 1/d_R) tr[e_a e_b]."""
    _check_fit(subspace, split)
    amps = check_restricted_amplitudes(amps, subspace.d_r)
    stack = _reduced_stack(subspace, split)
    gram = np.einsum("aij,bji->ab", stack, stack).real
    w = amps**2 - 1.0 / subspace.d_r
    return float(w @ gram @ w)


def restricted_amplitudes(phi0, subspace: RestrictedSubspace) -> np.ndarray:
    """Moduli |<e_a|phi0>| renormalized on the subspace."""
    c = np.abs(subspace.vectors.conj().T @ np.asarray(phi0, dtype=complex))
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ValueError("initial state has no weight on the subspace")
    return c / norm


# amplitude families: (d_R, rng) -> nonnegative unit vector

def _equal(d_r, rng):
    return np.full(d_r, 1.0 / np.sqrt(d_r))


def _random(d_r, rng):
    a = np.abs(rng.standard_normal(d_r) + 1j * rng.standard_normal(d_r))
    return a / np.linalg.norm(a)


def _peaked(d_r, rng):
    a = rng.exponential(size=d_r) ** 4
    return np.sqrt(a / a.sum())


def flatness_family(flatness: float) -> Callable:
    """Interpolates from a single spike (0) to equal amplitudes (1)."""
    def family(d_r, rng):
        spike = np.zeros(d_r)
        spike[rng.integers(d_r)] = 1.0
        p = flatness / d_r + (1 - flatness) * spike
        return np.sqrt(p)
    return family


AMPLITUDE_FAMILIES = {"equal": _equal, "random": _random, "peaked": _peaked}
SUBSPACE_GENERATORS = {
    "random": random_subspace,
    "shared": shared_system_subspace,
    "hamiltonian": hamiltonian_subspace,
}


@dataclass(frozen=True)
class SweepRow:
    instance: int
    lhs: float
    hs_sq: float
    trace_distance: float
    extreme: bool


def thermal_sweep(
    split: BipartiteSplit,
    d_r: int,
    n_instances: int,
    seed: int,
    family: str | Callable = "random",
    generator: str | Callable = "random",
) -> list[SweepRow]:
    fam = AMPLITUDE_FAMILIES[family] if isinstance(family, str) else family
    gen = SUBSPACE_GENERATORS[generator] if isinstance(generator, str) else generator
    extreme = family == "equal" or generator == "shared"
    rows = []
    for k in range(n_instances):
        rng = stream(seed, k)
        sub = gen(split, d_r, rng)
        amps = fam(d_r, rng)
        rho = rho_hat_s(amps, sub, split)
        can = canonical_state(sub, split)
        rows.append(
            SweepRow(
                instance=k,
                lhs=thermalization_lhs(amps, sub, split),
                hs_sq=hs_distance_sq(rho, can),
                trace_distance=trace_distance(rho, can),
                extreme=extreme,
            )
        )
    return rows
