"""Reproducible Monte Carlo plumbing.

Every ensemble is cut into fixed-size blocks.  Block ``b`` of a stream draws
from a Philox generator keyed by ``(seed, stream)`` with counter offset ``b``
in the high word, so the numbers a block sees depend only on
``(seed, stream, b)``.  Blocks may run on any number of worker threads;
partial sums are always combined in block order, which makes the results
bit-identical regardless of scheduling.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .algebra import Multivector

BLOCK_SIZE = 4096
_MASK64 = (1 << 64) - 1

T = TypeVar("T")


def stream_id(label: str | int | Sequence) -> int:
    """Stable 64-bit id for a stream label (strings hashed with BLAKE2)."""
    if isinstance(label, int):
        return label & _MASK64
    text = label if isinstance(label, str) else "/".join(str(p) for p in label)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def substream(seed: int, stream: str | int | Sequence = 0, block: int = 0) -> np.random.Generator:
    """Generator for one block of one stream; counter-based, so no state is shared."""
    bitgen = np.random.Philox(key=[int(seed) & _MASK64, stream_id(stream)],
                              counter=[0, 0, 0, int(block) & _MASK64])
    return np.random.Generator(bitgen)


def block_ranges(total: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """``(block_index, start, stop)`` triples covering ``range(total)``."""
    if total < 1:
        raise ValueError("need at least one sample")
    return [(b, s, min(s + block_size, total)) for b, s in enumerate(range(0, total, block_size))]


def default_threads() -> int:
    env = os.environ.get("STOCHCLIFFORD_THREADS")
    return max(1, int(env)) if env else 1


def map_blocks(fn: Callable[[int, int, int], T], total: int, threads: int | None = None,
               block_size: int = BLOCK_SIZE) -> list[T]:
    """Run ``fn(block, start, stop)`` for every block; results come back in block order."""
    ranges = block_ranges(total, block_size)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(ranges) == 1:
        return [fn(*r) for r in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


@dataclass(frozen=True)
class Moments:
    """Count, mean and centred second moment; combined with Chan's formula."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, samples: np.ndarray) -> Moments:
        samples = np.asarray(samples, dtype=float)
        mean = samples.mean(axis=0)
        return cls(len(samples), mean, np.sum((samples - mean) ** 2, axis=0))

    def merge(self, other: Moments) -> Moments:
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        return Moments(n, mean, m2)

    @classmethod
    def combine(cls, parts: Iterable[Moments]) -> Moments:
        parts = list(parts)
        acc = parts[0]
        for p in parts[1:]:
            acc = acc.merge(p)
        return acc

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / self.count)


@dataclass(frozen=True)
class MCEstimate:
    """Componentwise mean and standard error of a Clifford-valued expectation."""

    mean: Multivector
    stderr: Multivector
    count: int

    @classmethod
    def from_moments(cls, mom: Moments, dim: int) -> MCEstimate:
        return cls(Multivector(dim, mom.mean), Multivector(dim, mom.stderr), mom.count)

    @classmethod
    def from_samples(cls, samples: np.ndarray, dim: int) -> MCEstimate:
        return cls.from_moments(Moments.of(samples), dim)

    def within(self, target: Multivector, k: float = 3.0) -> bool:
        """True when every component lies within ``k`` standard errors of ``target``."""
        gap = np.abs(self.mean.coeffs - target.coeffs)
        return bool(np.all(gap <= k * self.stderr.coeffs))

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean.coeffs],
            "stderr": [float(v) for v in self.stderr.coeffs],
            "count": self.count,
        }


@dataclass(frozen=True)
class ScalarEstimate:
    value: float
    stderr: float
    count: int

    @classmethod
    def of_bernoulli(cls, hits: int, count: int) -> ScalarEstimate:
        p = hits / count
        return cls(p, math.sqrt(p * (1.0 - p) / count), count)

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "count": self.count}
