"""Random circuits of diagonal two-qubit gates CZ . P(alpha) . P(beta).

Qubits are 0-based in the library; the text serialization of a circuit
instance uses 1-based qubit labels.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .ensembles import TWO_PI, check_amplitudes
from .sampling import McEstimate, stream
from .statecore import PureState, StateLike, as_amplitudes, batch_linear_entropy, num_qubits_of, subsystem


@lru_cache(maxsize=None)
def bit_table(n: int) -> np.ndarray:
    """``bit_table(n)[k, a]`` is bit ``k`` (most significant first) of ``a``."""
    idx = np.arange(2**n)
    bits = np.array([(idx >> (n - 1 - k)) & 1 for k in range(n)], dtype=float)
    bits.setflags(write=False)
    return bits


@lru_cache(maxsize=None)
def qubit_pairs(n: int) -> tuple:
    return tuple(itertools.combinations(range(n), 2))


def gate_factor(bits_i, bits_j, alpha, beta):
    """Diagonal of CZ_ij P_i(alpha) P_j(beta); broadcasts over batches."""
    sign = 1.0 - 2.0 * (bits_i * bits_j)
    return np.exp(1j * (alpha * bits_i + beta * bits_j)) * sign


@dataclass(frozen=True)
class GateRecord:
    t: int
    i: int
    j: int
    alpha: float
    beta: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("gate needs two distinct qubits")
        if self.t < 1:
            raise ValueError("steps are numbered from 1")
        for ang in (self.alpha, self.beta):
            if not 0.0 <= ang < TWO_PI:
                raise ValueError(f"angle {ang} outside [0, 2pi)")


@dataclass(frozen=True)
class CircuitInstance:
    n: int
    gates: tuple
    seed: int | None = None

    def __post_init__(self):
        for k, g in enumerate(self.gates, start=1):
            if g.t != k:
                raise ValueError("gate steps must run 1..T contiguously")
            if not (0 <= g.i < self.n and 0 <= g.j < self.n):
                raise ValueError(f"gate {k} acts outside {self.n} qubits")

    @property
    def depth(self) -> int:
        return len(self.gates)

    def to_text(self) -> str:
        lines = [f"{self.n} {self.depth} {self.seed if self.seed is not None else -1}"]
        for g in self.gates:
            lines.append(f"{g.t} {g.i + 1} {g.j + 1} {g.alpha:.17g} {g.beta:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CircuitInstance":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        n, depth, seed = (int(x) for x in rows[0])
        gates = tuple(
            GateRecord(int(t), int(i) - 1, int(j) - 1, float(a), float(b))
            for t, i, j, a, b in rows[1:]
        )
        if len(gates) != depth:
            raise ValueError(f"header announces {depth} gates, found {len(gates)}")
        return cls(n, gates, None if seed < 0 else seed)


@dataclass(frozen=True)
class Trajectory:
    steps: tuple
    values: tuple
    subsystem: tuple


def sample_gate(n: int, t: int, rng: np.random.Generator) -> GateRecord:
    if n < 2:
        raise ValueError("need at least two qubits")
    i, j = qubit_pairs(n)[rng.integers(n * (n - 1) // 2)]
    alpha, beta = rng.uniform(0.0, TWO_PI, 2)
    return GateRecord(t, i, j, float(alpha), float(beta))


def _draw_gate_arrays(n: int, depth: int, rng: np.random.Generator):
    if n < 2:
        raise ValueError("need at least two qubits")
    pairs = np.array(qubit_pairs(n)).reshape(-1, 2)
    k = rng.integers(len(pairs), size=depth)
    alphas = rng.uniform(0.0, TWO_PI, depth)
    betas = rng.uniform(0.0, TWO_PI, depth)
    return pairs[k, 0], pairs[k, 1], alphas, betas


def sample_circuit(n: int, depth: int, rng: np.random.Generator, seed: int | None = None) -> CircuitInstance:
    ii, jj, aa, bb = _draw_gate_arrays(n, depth, rng)
    gates = tuple(
        GateRecord(t + 1, int(ii[t]), int(jj[t]), float(aa[t]), float(bb[t])) for t in range(depth)
    )
    return CircuitInstance(n, gates, seed)


def _apply_inplace(amps: np.ndarray, g: GateRecord, bits: np.ndarray) -> None:
    amps *= gate_factor(bits[g.i], bits[g.j], g.alpha, g.beta)


def apply_gate(state: StateLike, g: GateRecord) -> PureState:
    amps = np.array(as_amplitudes(state), dtype=complex)
    n = num_qubits_of(amps)
    if not (0 <= g.i < n and 0 <= g.j < n):
        raise ValueError(f"gate acts on qubits ({g.i}, {g.j}) outside {n} qubits")
    _apply_inplace(amps, g, bit_table(n))
    return PureState(amps)


def replay(instance: CircuitInstance, initial: StateLike) -> np.ndarray:
    amps = np.array(as_amplitudes(initial), dtype=complex)
    if num_qubits_of(amps) != instance.n:
        raise ValueError("initial state size does not match the circuit")
    bits = bit_table(instance.n)
    for g in instance.gates:
        _apply_inplace(amps, g, bits)
    return amps


def _record_steps(depth: int, every: int) -> list[int]:
    if every < 1:
        raise ValueError("record_every must be positive")
    steps = list(range(0, depth + 1, every))
    if steps[-1] != depth:
        steps.append(depth)
    return steps


def run_circuit(
    initial: StateLike,
    depth: int,
    A: Iterable[int],
    rng: np.random.Generator,
    record_every: int | None = None,
    return_state: bool = False,
):
    """Sample and apply ``depth`` gates, recording E_L on ``A``.

    Returns ``(trajectory, instance)``, plus the final :class:`PureState`
    when ``return_state`` is set.
    """
    amps = np.array(as_amplitudes(initial), dtype=complex)
    n = num_qubits_of(amps)
    A = subsystem(A, n)
    instance = sample_circuit(n, depth, rng)
    record = set(_record_steps(depth, record_every or n))
    bits = bit_table(n)
    steps, values = [], []
    if 0 in record:
        steps.append(0)
        values.append(float(batch_linear_entropy(amps, A, n)))
    for g in instance.gates:
        _apply_inplace(amps, g, bits)
        if g.t in record:
            steps.append(g.t)
            values.append(float(batch_linear_entropy(amps, A, n)))
    traj = Trajectory(tuple(steps), tuple(values), A)
    if return_state:
        return traj, instance, PureState(amps)
    return traj, instance


# ---------------------------------------------------------------- limits


def _profile(amps) -> tuple[np.ndarray, int]:
    r = check_amplitudes(amps)
    n = r.size.bit_length() - 1
    if (1 << n) != r.size or n < 1:
        raise ValueError("amplitude profile length must be 2**N")
    return r**2, n


def _collision(p: np.ndarray, keep: Sequence[int], n: int) -> float:
    """sum_{a,b} p_a p_b prod_{i in keep} delta(a_i, b_i)."""
    t = p.reshape((2,) * n)
    drop = tuple(q for q in range(n) if q not in set(keep))
    marg = t.sum(axis=drop) if drop else t
    return float(np.sum(marg**2))


def expected_entropy_limit(amps, A: Iterable[int]) -> float:
    """Long-circuit limit of the expected E_L for computational-basis input."""
    p, n = _profile(amps)
    A = subsystem(A, n)
    rest = tuple(q for q in range(n) if q not in A)
    return 1.0 - _collision(p, A, n) - _collision(p, rest, n) + float(np.sum(p**2))


def _mask(gamma_set: Iterable[int], n: int) -> int:
    m = 0
    for q in gamma_set:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range")
        m |= 1 << (n - 1 - q)
    return m


def kappa(amps, gamma_set: Iterable[int]) -> float:
    """Input weight of the Pauli sector whose x/y positions are ``gamma_set``."""
    p, n = _profile(amps)
    m = _mask(gamma_set, n)
    if m == 0:
        return 0.0
    idx = np.arange(2**n)
    return float(np.sum(p * p[idx ^ m]))


def walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform."""
    v = np.array(v, dtype=float)
    h = 1
    while h < v.size:
        v = v.reshape(-1, 2, h)
        v = np.stack([v[:, 0] + v[:, 1], v[:, 0] - v[:, 1]], axis=1)
        v = v.reshape(-1)
        h *= 2
    return v


def kappa_all(amps) -> np.ndarray:
    """kappa for every sector, indexed by the sector's bit mask (qubit 0 is
    the most significant bit); entry 0 is set to 0."""
    p, _ = _profile(amps)
    return _kappa_from_probs(p)


def _kappa_from_probs(p: np.ndarray) -> np.ndarray:
    f = walsh_hadamard(p)
    k = walsh_hadamard(f * f) / p.size
    k[0] = 0.0
    # transform round-off must not create spurious sectors
    k[k < 1e-15] = 0.0
    return k


def popcounts(n: int) -> np.ndarray:
    return bit_table(n).sum(axis=0).astype(int)


def mixing_time_bound(amps, eps: float) -> float:
    """Canonical-path upper bound on the number of gates after which the
    expected E_L is within ``eps`` of its limit, for every subsystem.

    Sectors with zero weight and the single-state sector gamma = N are
    skipped; returns 0 when no sector remains.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    p, n = _profile(amps)
    if n < 2:
        raise ValueError("need at least two qubits")
    kap = _kappa_from_probs(p)
    gam = popcounts(n)
    best = 0.0
    for g in range(1, n):
        ks = kap[(gam == g) & (kap > 0)]
        if ks.size == 0:
            continue
        pref = n * (n - 1) / (2 * g * (n - g))
        vals = (pref * 2.0 ** (n - g) * ks) ** 2 * (n - g - np.log(eps * ks / 2.0**n))
        best = max(best, float(vals.max()))
    return best


# ---------------------------------------------------------------- Monte Carlo


def _batched_values(amps, A, depth: int, n_runs: int, seed: int, steps: Sequence[int], batch: int = 256):
    r = check_amplitudes(amps)
    n = r.size.bit_length() - 1
    A = subsystem(A, n)
    if n < 2:
        raise ValueError("need at least two qubits")
    bits = bit_table(n)
    want = {s: k for k, s in enumerate(steps)}
    out = np.empty((len(steps), n_runs))
    for start in range(0, n_runs, batch):
        runs = range(start, min(start + batch, n_runs))
        psi, gi, gj, ga, gb = [], [], [], [], []
        for run in runs:
            rng = stream(seed, run)
            psi.append(r * np.exp(1j * rng.uniform(0.0, TWO_PI, 2**n)))
            ii, jj, aa, bb = _draw_gate_arrays(n, depth, rng)
            gi.append(ii), gj.append(jj), ga.append(aa), gb.append(bb)
        psi = np.array(psi)
        gi, gj, ga, gb = (np.array(x).reshape(len(runs), depth) for x in (gi, gj, ga, gb))
        sl = slice(runs.start, runs.stop)
        if 0 in want:
            out[want[0], sl] = batch_linear_entropy(psi, A, n)
        for t in range(depth):
            psi *= gate_factor(bits[gi[:, t]], bits[gj[:, t]], ga[:, t, None], gb[:, t, None])
            if t + 1 in want:
                out[want[t + 1], sl] = batch_linear_entropy(psi, A, n)
    return out


def estimate_expected_entropy(amps, A: Iterable[int], depth: int, n_runs: int, seed: int) -> McEstimate:
    """Mean E_L after ``depth`` gates over independent runs; each run draws
    fresh input phases and a fresh circuit from stream ``(seed, run)``."""
    values = _batched_values(amps, A, depth, n_runs, seed, [depth])[0]
    return McEstimate.from_values(values, seed)


def estimate_trajectory(
    amps, A: Iterable[int], depth: int, n_runs: int, seed: int, record_every: int
) -> tuple[list[int], list[McEstimate]]:
    steps = _record_steps(depth, record_every)
    vals = _batched_values(amps, A, depth, n_runs, seed, steps)
    return steps, [McEstimate.from_values(v, seed) for v in vals]


def single_run_input(amps, seed: int, run: int = 0) -> tuple[PureState, np.random.Generator]:
    """Input state and the generator positioned for gate sampling, exactly
    as run ``run`` of :func:`estimate_expected_entropy` draws them."""
    r = check_amplitudes(amps)
    rng = stream(seed, run)
    psi = r * np.exp(1j * rng.uniform(0.0, TWO_PI, r.size))
    return PureState(psi), rng


def state_digest(amps: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(amps, dtype=complex).tobytes()).hexdigest()
