"""Rank-1 lattice rules with Cranley-Patterson rotation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _hashing as hs

_ROTATION_TAG = 0x4350


@dataclass(frozen=True)
class LatticeRule:
    n: int
    z: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(int(v) for v in self.z))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.z:
            raise ValueError("generator vector must be nonempty")
        for zj in self.z:
            if self.n > 1 and not (1 <= zj < self.n and math.gcd(zj, self.n) == 1):
                raise ValueError(f"generator entry {zj} must lie in 1..{self.n - 1} and be coprime to {self.n}")

    @property
    def dimension(self) -> int:
        return len(self.z)


def korobov(n: int, a: int, d: int) -> LatticeRule:
    """Korobov rule ``z = (1, a, a**2, ...) mod n``."""
    return LatticeRule(n, tuple(pow(a, j, n) if n > 1 else 1 for j in range(d)))


def lattice_points(rule: LatticeRule) -> np.ndarray:
    """``a_i = frac(i * z / n)`` for ``i = 0 .. n-1``, shape ``(n, d)``."""
    i = np.arange(rule.n, dtype=np.int64)[:, None]
    z = np.array(rule.z, dtype=np.int64)[None, :]
    return ((i * z) % rule.n) / rule.n


def cranley_patterson(points, u) -> np.ndarray:
    """Shift every point by ``u`` with wraparound."""
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("rotation must lie in [0, 1)^d")
    return np.mod(np.asarray(points, dtype=np.float64) + u, 1.0)


def rotation(seed: int, replicate: int, d: int) -> np.ndarray:
    """Uniform rotation vector from the same keyed source used for scrambling."""
    keys = hs.child_keys(np.full(d, hs.derive_key(seed, replicate, _ROTATION_TAG), dtype=np.uint64), np.arange(d))
    return hs.uniform_floats(keys)
