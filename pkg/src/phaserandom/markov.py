"""The Pauli-string Markov chain induced by the diagonal random circuit,
its sector decomposition and the reduced birth-death chains.

Pauli strings are written over the letters ``0 x y z``; letter ``k`` acts
on qubit ``k`` and is the most significant base-4 digit of the string's
dense index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .circuit import _collision, _kappa_from_probs, _mask, _profile, bit_table, qubit_pairs, replay, sample_circuit
from .sampling import stream
from .statecore import NumericalError, StateLike, as_amplitudes, num_qubits_of, subsystem

LETTERS = "0xyz"
CODE = {c: k for k, c in enumerate(LETTERS)}
# involution 0 <-> z, x <-> y
NEG = np.array([3, 2, 1, 0])
MAX_PAULI_QUBITS = 7
MAX_EXACT_CHAIN_QUBITS = 6

_PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def encode(q: str) -> np.ndarray:
    try:
        return np.array([CODE[c] for c in q], dtype=int)
    except KeyError as exc:
        raise ValueError(f"invalid Pauli letter in {q!r}") from exc


def decode(codes: Sequence[int]) -> str:
    return "".join(LETTERS[int(c)] for c in codes)


def string_index(q: str) -> int:
    idx = 0
    for c in encode(q):
        idx = 4 * idx + int(c)
    return idx


def index_string(idx: int, n: int) -> str:
    out = []
    for _ in range(n):
        idx, d = divmod(idx, 4)
        out.append(LETTERS[d])
    return "".join(reversed(out))


def sector_of(q: str) -> tuple[int, ...]:
    """Positions carrying x or y."""
    return tuple(k for k, c in enumerate(q) if c in "xy")


def pauli_matrix(q: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for c in encode(q):
        m = np.kron(m, _PAULI[c])
    return m


# ---------------------------------------------------------------- distributions


@dataclass(frozen=True)
class PauliDistribution:
    """Weights over all ``4**n`` strings, stored densely by string index."""

    n: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (4**self.n,):
            raise ValueError(f"need {4 ** self.n} weights")
        if np.any(w < -1e-12):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    def __getitem__(self, q: str) -> float:
        if len(q) != self.n:
            raise ValueError("string length does not match")
        return float(self.weights[string_index(q)])

    def as_dict(self, tol: float = 0.0) -> dict[str, float]:
        return {index_string(k, self.n): float(w) for k, w in enumerate(self.weights) if w > tol}

    @classmethod
    def from_dict(cls, weights: dict[str, float]) -> "PauliDistribution":
        n = len(next(iter(weights)))
        dense = np.zeros(4**n)
        for q, w in weights.items():
            dense[string_index(q)] = w
        return cls(n, dense)

    def sector_masses(self) -> dict[tuple[int, ...], float]:
        out: dict[tuple[int, ...], float] = {}
        for k, w in enumerate(self.weights):
            if w == 0:
                continue
            key = sector_of(index_string(k, self.n))
            out[key] = out.get(key, 0.0) + float(w)
        return out


def tv_distance(p: PauliDistribution, q: PauliDistribution) -> float:
    return 0.5 * float(np.sum(np.abs(p.weights - q.weights)))


# per-qubit map from (row, col) of a density matrix to Pauli coefficients:
# tr(sigma_q rho) = sum_{a,b} sigma_q[b, a] rho[a, b]
_TO_PAULI = np.array([[_PAULI[q][b, a] for a in range(2) for b in range(2)] for q in range(4)])


def _pauli_expectations(amps: np.ndarray, n: int) -> np.ndarray:
    t = np.outer(amps, amps.conj()).reshape((2,) * (2 * n))
    # interleave row/column index of each qubit, then fuse them
    perm = [ax for k in range(n) for ax in (k, n + k)]
    t = t.transpose(perm).reshape((4,) * n)
    for k in range(n):
        t = np.moveaxis(np.tensordot(_TO_PAULI, t, axes=([1], [k])), 0, k)
    return t.reshape(-1).real


def pauli_distribution(state: StateLike) -> PauliDistribution:
    """Weights 2^-N <sigma_q>^2 of a pure state; they sum to its purity."""
    amps = as_amplitudes(state)
    n = num_qubits_of(amps)
    if n > MAX_PAULI_QUBITS:
        raise ValueError(f"Pauli enumeration limited to {MAX_PAULI_QUBITS} qubits")
    c = _pauli_expectations(amps, n)
    return PauliDistribution(n, c**2 / 2**n)


# ---------------------------------------------------------------- full chain


def _outcome_table():
    """For each (q_i, q_j): list of equally likely (p_i, p_j)."""
    table = {}
    for qi in range(4):
        for qj in range(4):
            xy_i, xy_j = qi in (1, 2), qj in (1, 2)
            if not xy_i and not xy_j:
                outs = [(qi, qj)]
            elif not xy_i:
                outs = [(NEG[qi], 1), (NEG[qi], 2)]
            elif not xy_j:
                outs = [(1, NEG[qj]), (2, NEG[qj])]
            else:
                outs = [(1, 1), (1, 2), (2, 1), (2, 2)]
            table[qi, qj] = [(int(a), int(b)) for a, b in outs]
    return table


OUTCOMES = _outcome_table()
_N_OUT = np.array([[len(OUTCOMES[a, b]) for b in range(4)] for a in range(4)])
_OUT = np.zeros((4, 4, 4, 2), dtype=int)
for (_a, _b), _outs in OUTCOMES.items():
    for _k in range(4):
        _OUT[_a, _b, _k] = _outs[_k % len(_outs)]

# PAIR_TRANSITION[4*p_i + p_j, 4*q_i + q_j] = P((q_i, q_j) -> (p_i, p_j))
PAIR_TRANSITION = np.zeros((16, 16))
for (_a, _b), _outs in OUTCOMES.items():
    for _pa, _pb in _outs:
        PAIR_TRANSITION[4 * _pa + _pb, 4 * _a + _b] += 1.0 / len(_outs)


def step_full_chain(q: str, rng: np.random.Generator) -> str:
    codes = encode(q)
    n = codes.size
    if n < 2:
        raise ValueError("need at least two qubits")
    i, j = qubit_pairs(n)[rng.integers(n * (n - 1) // 2)]
    outs = OUTCOMES[codes[i], codes[j]]
    codes[i], codes[j] = outs[rng.integers(len(outs))]
    return decode(codes)


def simulate_walkers(start: Sequence[str], steps: int, rng: np.random.Generator) -> list[str]:
    """Advance independent walkers of the full chain; vectorized over walkers."""
    codes = np.array([encode(q) for q in start])
    w, n = codes.shape
    if n < 2:
        raise ValueError("need at least two qubits")
    pairs = np.array(qubit_pairs(n))
    rows = np.arange(w)
    for _ in range(steps):
        pk = pairs[rng.integers(len(pairs), size=w)]
        qi, qj = codes[rows, pk[:, 0]], codes[rows, pk[:, 1]]
        pick = (rng.random(w) * _N_OUT[qi, qj]).astype(int)
        new = _OUT[qi, qj, pick]
        codes[rows, pk[:, 0]] = new[:, 0]
        codes[rows, pk[:, 1]] = new[:, 1]
    return [decode(c) for c in codes]


def _chain_step(t: np.ndarray, n: int) -> np.ndarray:
    # accumulate changes so fixed strings keep their weight bit-for-bit
    delta = np.zeros_like(t)
    pairs = qubit_pairs(n)
    for i, j in pairs:
        moved = np.moveaxis(t, (i, j), (0, 1))
        shape = moved.shape
        nxt = (PAIR_TRANSITION @ moved.reshape(16, -1)).reshape(shape)
        delta += np.moveaxis(nxt - moved, (0, 1), (i, j))
    return t + delta / len(pairs)


def evolve_full_chain(dist: PauliDistribution, steps: int) -> PauliDistribution:
    """Exact distribution after ``steps`` applications of the chain."""
    n = dist.n
    if n > MAX_EXACT_CHAIN_QUBITS:
        raise ValueError(
            f"exact evolution limited to {MAX_EXACT_CHAIN_QUBITS} qubits; use simulate_walkers"
        )
    if n < 2:
        raise ValueError("need at least two qubits")
    t = dist.weights.reshape((4,) * n)
    for _ in range(steps):
        t = _chain_step(t, n)
    return PauliDistribution(n, t.reshape(-1))


def circuit_pauli_distribution(state: StateLike, steps: int, n_samples: int, seed: int) -> PauliDistribution:
    """Monte Carlo average of the Pauli weights after random circuits."""
    amps = as_amplitudes(state)
    n = num_qubits_of(amps)
    acc = np.zeros(4**n)
    for s in range(n_samples):
        out = replay(sample_circuit(n, steps, stream(seed, s)), amps)
        acc += _pauli_expectations(out, n) ** 2
    return PauliDistribution(n, acc / (n_samples * 2**n))


def frozen_sector_weight(amps, q: str) -> float:
    """Time-invariant weight of a string made only of 0 and z."""
    p, n = _profile(amps)
    if len(q) != n:
        raise ValueError("string length does not match the amplitudes")
    if sector_of(q):
        raise ValueError(f"{q!r} contains x or y; it is not in the frozen sector")
    zmask = np.array([c == "z" for c in q], dtype=float)
    signs = 1.0 - 2.0 * (np.tensordot(zmask, bit_table(n), axes=1) % 2)
    return float(np.dot(p, signs) ** 2 / 2**n)


# ---------------------------------------------------------------- reduced chains


@dataclass(frozen=True)
class ReducedChain:
    """Birth-death chain on the count of non-identity letters.

    ``numerators / denominator`` is the exact transition matrix when known;
    generic chains built by :meth:`from_matrix` carry only floats.
    """

    matrix: np.ndarray
    stationary: np.ndarray
    n: int | None = None
    gamma: int | None = None
    numerators: np.ndarray | None = None
    denominator: int | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def states(self) -> list[int]:
        if self.gamma is None:
            return list(range(self.size))
        return list(range(self.gamma, self.n + 1))

    @classmethod
    def from_matrix(cls, matrix, stationary) -> "ReducedChain":
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows must sum to 1")
        return cls(m, np.asarray(stationary, dtype=float))

    def exact_matrix(self) -> list[list[Fraction]]:
        if self.numerators is None:
            raise ValueError("chain has no exact representation")
        return [[Fraction(int(x), self.denominator) for x in row] for row in self.numerators]

    def to_json(self) -> str:
        transitions = []
        if self.numerators is not None:
            for a, i in enumerate(self.states):
                for b, j in enumerate(self.states):
                    if self.numerators[a, b]:
                        transitions.append([i, j, int(self.numerators[a, b]), self.denominator])
        return json.dumps(
            {
                "N": self.n,
                "gamma": self.gamma,
                "transitions": transitions,
                "stationary": [float(x) for x in self.stationary],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ReducedChain":
        d = json.loads(text)
        chain = reduced_transition(d["N"], d["gamma"])
        for i, j, num, den in d["transitions"]:
            a, b = i - chain.gamma, j - chain.gamma
            if Fraction(num, den) != Fraction(int(chain.numerators[a, b]), chain.denominator):
                raise ValueError(f"transition ({i},{j}) disagrees with the chain definition")
        return cls(chain.matrix, np.array(d["stationary"]), chain.n, chain.gamma, chain.numerators, chain.denominator)


def reduced_transition(n: int, gamma: int) -> ReducedChain:
    """Transition matrix on {gamma, ..., n}; entries are integers over n(n-1)."""
    if n < 2:
        raise ValueError("need at least two qubits")
    if gamma == 0:
        raise ValueError("gamma = 0 is the frozen sector, not a reduced chain")
    if not 1 <= gamma <= n:
        raise ValueError(f"gamma must lie in 1..{n}")
    den = n * (n - 1)
    size = n - gamma + 1
    num = np.zeros((size, size), dtype=np.int64)
    stay = gamma * (gamma - 1) + (n - gamma) * (n - gamma - 1)
    for a, i in enumerate(range(gamma, n + 1)):
        if i < n:
            num[a, a + 1] = 2 * gamma * (n - i)
        if i > gamma:
            num[a, a - 1] = 2 * gamma * (i - gamma)
        num[a, a] = stay
    assert np.all(num.sum(axis=1) == den)
    matrix = num / den
    pi = _binomial_law(n, gamma, 1.0)
    return ReducedChain(matrix, pi, n, gamma, num, den)


def _binomial_law(n: int, gamma: int, weight):
    k = n - gamma
    return np.array([math.comb(k, i) for i in range(k + 1)], dtype=float) * (weight / 2.0**k)


def reduced_stationary(chain: ReducedChain, sector_weight, exact: bool = False):
    """Binomial stationary law scaled to total mass ``sector_weight``."""
    if chain.gamma is None:
        raise ValueError("binomial law applies to reduced chains only")
    if sector_weight < 0:
        raise ValueError("sector weight must be nonnegative")
    if exact:
        w = Fraction(sector_weight)
        k = chain.n - chain.gamma
        return [Fraction(math.comb(k, i), 2**k) * w for i in range(k + 1)]
    return _binomial_law(chain.n, chain.gamma, float(sector_weight))


def stationary_residual(chain: ReducedChain, pi=None) -> float:
    pi = chain.stationary if pi is None else np.asarray(pi, dtype=float)
    return float(np.max(np.abs(chain.matrix.T @ pi - pi)))


def detailed_balance_check(chain: ReducedChain, pi=None) -> float:
    pi = chain.stationary if pi is None else np.asarray(pi, dtype=float)
    flow = pi[:, None] * chain.matrix
    return float(np.max(np.abs(flow - flow.T))) if chain.size > 1 else 0.0


def detailed_balance_exact(chain: ReducedChain, pi: Sequence[Fraction]) -> Fraction:
    p = chain.exact_matrix()
    worst = Fraction(0)
    for a in range(chain.size):
        for b in range(chain.size):
            worst = max(worst, abs(pi[a] * p[a][b] - pi[b] * p[b][a]))
    return worst


def _normalized(pi: np.ndarray) -> np.ndarray:
    total = pi.sum()
    if total <= 0:
        raise ValueError("stationary vector has no mass")
    return pi / total


def spectral_gap(chain: ReducedChain) -> float:
    """1 - lambda_2 with eigenvalues sorted in decreasing order; 1 for a
    single-state chain."""
    if chain.size == 1:
        return 1.0
    pi = _normalized(chain.stationary)
    try:
        if np.all(pi > 0):
            d = np.sqrt(pi)
            sym = d[:, None] * chain.matrix / d[None, :]
            w = np.linalg.eigvalsh((sym + sym.T) / 2)
        else:
            w = np.linalg.eigvals(chain.matrix).real
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    w = np.sort(w)[::-1]
    return float(1.0 - w[1])


def canonical_path_bound(chain: ReducedChain) -> tuple[float, float]:
    """Congestion ``rho`` of the monotone paths on the line graph and the
    gap lower bound ``1 / (8 rho^2)``; ``(0, 1)`` for one state."""
    if chain.size == 1:
        return 0.0, 1.0
    m = chain.matrix
    off = np.abs(m - np.diag(np.diag(m)))
    if np.any(np.triu(off, 2) > 0) or np.any(np.tril(off, -2) > 0):
        raise ValueError("canonical paths here assume a nearest-neighbour chain")
    pi = chain.stationary
    if np.any(pi <= 0):
        raise ValueError("stationary vector must be strictly positive")
    pi = _normalized(pi)
    cum = np.cumsum(pi)
    rho = 0.0
    for k in range(chain.size - 1):
        crossing = cum[k] * (1.0 - cum[k])
        for q in (pi[k] * m[k, k + 1], pi[k + 1] * m[k + 1, k]):
            if q <= 0:
                raise ValueError("chain is not irreducible")
            rho = max(rho, crossing / q)
    return float(rho), float(1.0 / (8.0 * rho**2))


def empirical_mixing_time(chain: ReducedChain, eps: float, start: int | None = None, max_steps: int = 100_000) -> int:
    """Smallest t with total-variation distance to stationarity <= eps,
    from ``start`` or from the worst point mass."""
    if chain.size == 1:
        return 0
    pi = _normalized(chain.stationary)
    if start is None:
        x = np.eye(chain.size)
    else:
        x = np.zeros((1, chain.size))
        x[0, chain.states.index(start)] = 1.0
    for t in range(max_steps + 1):
        if 0.5 * np.max(np.sum(np.abs(x - pi), axis=1)) <= eps:
            return t
        x = x @ chain.matrix
    raise NumericalError(f"no convergence to eps={eps} within {max_steps} steps")


# ---------------------------------------------------------------- limits


def limit_purity(amps, A: Iterable[int]) -> float:
    """Long-circuit limit of E[tr rho_A^2]: frozen-sector collision term plus
    the weights of every nonempty sector inside ``A``."""
    p, n = _profile(amps)
    A = subsystem(A, n)
    amask = _mask(A, n)
    kap = _kappa_from_probs(p)
    masks = np.arange(2**n)
    inside = (masks & ~amask) == 0
    return _collision(p, A, n) + float(kap[inside].sum())


def stationary_pauli_distribution(amps) -> PauliDistribution:
    """Limit distribution of the full chain assembled from frozen weights
    and the reduced chains' binomial laws."""
    p, n = _profile(amps)
    if n > MAX_EXACT_CHAIN_QUBITS:
        raise ValueError(f"limited to {MAX_EXACT_CHAIN_QUBITS} qubits")
    r = np.sqrt(p)
    kap = _kappa_from_probs(p)
    chains = {g: reduced_transition(n, g) for g in range(1, n + 1)}
    w = np.zeros(4**n)
    for k in range(4**n):
        q = index_string(k, n)
        gam = sector_of(q)
        if not gam:
            w[k] = frozen_sector_weight(r, q)
            continue
        g = len(gam)
        i = sum(c != "0" for c in q)
        law = reduced_stationary(chains[g], kap[_mask(gam, n)])
        # strings of S(Gamma) with i non-identity letters share the law's mass
        w[k] = law[i - g] / (math.comb(n - g, i - g) * 2**g)
    return PauliDistribution(n, w)


def pauli_space_purity(dist: PauliDistribution, A: Iterable[int]) -> float:
    """tr rho_A^2 = 2^{N - N_A} * (mass on strings that are identity off A)."""
    n = dist.n
    A = subsystem(A, n)
    keep = np.ones(4**n, dtype=bool)
    for k in range(4**n):
        q = index_string(k, n)
        keep[k] = all(q[i] == "0" for i in range(n) if i not in A)
    return 2 ** (n - len(A)) * float(dist.weights[keep].sum())
