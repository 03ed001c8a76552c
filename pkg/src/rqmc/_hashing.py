"""Counter-based keyed hashing.

Every random quantity in the package (scramble permutations, shift digits,
lattice rotations, Monte Carlo streams) is a pure function of a key built
from ``(seed, replicate, dimension, ...)``.  Nothing depends on evaluation
order, so results are identical under any partitioning of the work.

The mixer is the SplitMix64 finalizer.  Scalar keys are folded with Python
integers; per-point keys are folded with ``uint64`` arrays (numpy wraps
silently on overflow for arrays).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(*words: int) -> int:
    """Fold a sequence of nonnegative integers into one 64-bit key."""
    h = 0x6A09E667F3BCC909
    for w in words:
        h = mix64(h ^ mix64((int(w) + GOLDEN) & MASK64))
    return h


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def child_keys(keys: np.ndarray, values) -> np.ndarray:
    """Extend each key in ``keys`` by one word (elementwise)."""
    v = np.asarray(values, dtype=np.uint64)
    with np.errstate(over="ignore"):
        v = v + np.uint64(GOLDEN)
    return mix64_array(keys ^ mix64_array(v))


def uniform_ints(keys: np.ndarray, upper) -> np.ndarray:
    """Map 64-bit keys to integers in ``[0, upper)``.

    Uses the top 53 bits as a fraction; the bias is below ``upper * 2**-53``.
    """
    frac = (keys >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.floor(frac * np.asarray(upper, dtype=np.float64)).astype(np.int64)


def uniform_floats(keys: np.ndarray) -> np.ndarray:
    return (np.asarray(keys, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def random_permutations(keys: np.ndarray, b: int) -> np.ndarray:
    """One uniform permutation of ``{0..b-1}`` per key, shape ``keys.shape + (b,)``.

    Fisher-Yates driven by ``child_keys(key, step)``.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    perm = np.broadcast_to(np.arange(b, dtype=np.int64), keys.shape + (b,)).copy()
    for i in range(b - 1, 0, -1):
        j = uniform_ints(child_keys(keys, i), i + 1)
        pi = perm[..., i].copy()
        pj = np.take_along_axis(perm, j[..., None], axis=-1)[..., 0]
        perm[..., i] = pj
        np.put_along_axis(perm, j[..., None], pi[..., None], axis=-1)
    return perm


def generator(*words: int) -> np.random.Generator:
    """A numpy Generator on the counter-based Philox bit generator keyed by ``words``."""
    return np.random.Generator(np.random.Philox(key=derive_key(*words)))
