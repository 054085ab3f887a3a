"""Seeded random streams.

Every random draw in the package goes through :class:`RngStream`, a thin
wrapper over numpy's Philox4x64 counter-based bit generator.  The Philox key
is derived from ``(seed, path)`` with :class:`numpy.random.SeedSequence`, so
streams can be split into independent children without sharing state:

    >>> root = RngStream(7)
    >>> a, b = root.split(0), root.split(1)

Splitting never consumes draws from the parent.  Philox output and the
SeedSequence hashing are both platform independent.
"""

from __future__ import annotations

import numpy as np

# Fixed child indices for the per-scenario sub-streams.
SCHEDULER = 0
DIVERSIFIER = 1
WIND = 2
ATTACKER = 3
TRIALS = 4


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 63-bit integer seed for the child at ``path``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


class RngStream:
    """Splittable counter-based random stream (Philox4x64)."""

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        key = ss.generate_state(2, dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def split(self, index: int) -> RngStream:
        return RngStream(self.seed, self.path + (index,))

    @property
    def position(self) -> int:
        """Philox block counter; advances as draws are consumed."""
        counter = self._gen.bit_generator.state["state"]["counter"]
        return int(counter[0]) | (int(counter[1]) << 64)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, lo: float, hi: float, size=None):
        return self._gen.uniform(lo, hi, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def bits32(self) -> int:
        return int(self._gen.integers(0, 2**32, dtype=np.uint64))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
