"""Reproducible, splittable random streams."""

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream) pair naming an independent random stream.

    Each pair is turned into a ``numpy.random.SeedSequence`` whose spawn key
    is the stream id, and drives a counter-based Philox generator. The same
    pair reproduces the same draws bit for bit.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream <= _MASK64):
            raise ValueError("seed and stream must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        """Derive a sub-stream deterministically (for per-experiment allocation)."""
        mixed = np.random.SeedSequence(self.seed, spawn_key=(self.stream, index)).generate_state(2, np.uint64)
        return RngStream(int(mixed[0]), int(mixed[1]))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)
