"""Seeded Monte Carlo plumbing.

Every sample draws from its own counter-based stream keyed by
``(seed, index)``, so chunked, threaded and serial runs produce identical
per-sample values.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_CHUNK = 512


def stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int
    std: float = 0.0

    @classmethod
    def from_values(cls, values: np.ndarray, seed: int) -> "McEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        if n == 0:
            raise ValueError("no samples")
        std = float(values.std(ddof=1)) if n > 1 else 0.0
        return cls(float(values.mean()), std / math.sqrt(n), n, seed, std)

    def within(self, target: float, n_se: float = 4.0) -> bool:
        return abs(self.mean - target) <= n_se * self.std_error


def sample_values(
    draw: Callable[[np.random.Generator], np.ndarray],
    evaluate: Callable[[np.ndarray], np.ndarray],
    n_samples: int,
    seed: int,
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> np.ndarray:
    """Evaluate ``evaluate(stack)`` over samples ``draw(stream(seed, i))``.

    ``draw`` returns one sample; ``evaluate`` maps a stacked chunk to one
    value per sample. Values come back in sample-index order.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    out = np.empty(n_samples)

    def work(start: int) -> None:
        stop = min(start + chunk, n_samples)
        stack = np.stack([draw(stream(seed, i)) for i in range(start, stop)])
        out[start:stop] = evaluate(stack)

    starts = range(0, n_samples, chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    return out
