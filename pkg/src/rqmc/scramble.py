"""Randomization of digital point sets.

Three kinds are supported:

``nested_uniform``
    Full nested scramble.  Digit ``k`` of a coordinate is replaced by
    ``pi(x_k)`` where ``pi`` is a uniform random permutation attached to the
    tree node addressed by the digits ``x_1 .. x_{k-1}``.  Nesting stops after
    ``NEST_DEPTH`` digits; deeper digits get a uniform shift keyed by the
    leaf node, so each leaf cell still receives independent randomness.
``linear``
    ``y = L x + e (mod b)`` with ``L`` lower triangular, uniform nonzero
    diagonal, uniform entries below it, and a uniform digit vector ``e``.
``digital_shift``
    ``y = x + e (mod b)`` digitwise.

All randomness is a keyed hash of ``(seed, replicate_id, dimension, path)``,
so any subset of points, in any order, scrambles identically.  ``seed=None``
is the null-seed hook: every kind then acts as the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _hashing as hs
from .netgen import DigitalPointSet, GeneratorMatrixSet, digits_to_float, generate_points

NESTED_UNIFORM = "nested_uniform"
LINEAR = "linear"
DIGITAL_SHIFT = "digital_shift"
KINDS = (NESTED_UNIFORM, LINEAR, DIGITAL_SHIFT)
NEST_DEPTH = 16

_KIND_TAG = {NESTED_UNIFORM: 0x4E55, LINEAR: 0x4C49, DIGITAL_SHIFT: 0x4453}
# child node key for digit a is mix(h ^ _DIGIT_SALT[a]); distinct from the Fisher-Yates keys
_DIGIT_SALT_BASE = 0xD1B54A32D192ED03


@dataclass(frozen=True)
class ScrambleSpec:
    kind: str
    base: int
    depth: int
    seed: int | None
    replicate_id: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scramble kind {self.kind!r}; expected one of {KINDS}")
        if self.base < 2 or self.depth < 1:
            raise ValueError("need base >= 2 and depth >= 1")
        if self.replicate_id < 0:
            raise ValueError("replicate_id must be nonnegative")

    @property
    def nest_depth(self) -> int:
        return min(self.depth, NEST_DEPTH)

    def key(self, dim: int, replicate_id: int | None = None) -> int:
        rep = self.replicate_id if replicate_id is None else replicate_id
        return hs.derive_key(self.seed, rep, dim, _KIND_TAG[self.kind])

    def with_replicate(self, replicate_id: int) -> "ScrambleSpec":
        return ScrambleSpec(self.kind, self.base, self.depth, self.seed, replicate_id)

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "b": self.base,
            "E": self.depth,
            "seed": self.seed,
            "replicate": self.replicate_id,
            "nest_depth": self.nest_depth if self.kind == NESTED_UNIFORM else None,
        }


def _digit_salts(b: int) -> np.ndarray:
    return np.array([hs.mix64(_DIGIT_SALT_BASE ^ a) for a in range(b)], dtype=np.uint64)


def nested_uniform_digits(x: np.ndarray, b: int, keys: np.ndarray, nest_depth: int) -> np.ndarray:
    """Nested uniform scramble of one coordinate.

    ``x`` has shape ``(n, E)``; ``keys`` holds one root key per row, so rows
    from different replicates can be processed together.
    """
    n, E = x.shape
    y = np.empty_like(x)
    h = np.asarray(keys, dtype=np.uint64).copy()
    salts = _digit_salts(b)
    rows = np.arange(n)
    for k in range(min(nest_depth, E)):
        xk = x[:, k]
        if b == 2:
            y[:, k] = xk ^ (h >> np.uint64(63)).astype(np.uint8)
        else:
            perms = hs.random_permutations(h, b)
            y[:, k] = perms[rows, xk]
        h = hs.mix64_array(h ^ salts[xk])
    for k in range(nest_depth, E):
        shift = hs.uniform_ints(hs.child_keys(h, b + k), b)
        y[:, k] = (x[:, k] + shift) % b
    return y


def _matrix_and_shift(key: int, b: int, E: int, with_matrix: bool):
    root = np.full((E,), key, dtype=np.uint64)
    rows = hs.child_keys(root, np.arange(E))
    e = hs.uniform_ints(hs.child_keys(rows, 1 << 40), b)
    if not with_matrix:
        return None, e
    cells = hs.child_keys(np.repeat(rows[:, None], E, axis=1), np.arange(E)[None, :])
    L = hs.uniform_ints(cells, b)
    diag = 1 + hs.uniform_ints(np.diagonal(cells), b - 1)
    L = np.tril(L, -1)
    L[np.arange(E), np.arange(E)] = diag
    return L, e


def linear_scramble_matrix(spec: ScrambleSpec, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``(L, e)`` pair used by the linear scramble for coordinate ``dim``."""
    if spec.seed is None:
        return np.eye(spec.depth, dtype=np.int64), np.zeros(spec.depth, dtype=np.int64)
    return _matrix_and_shift(spec.key(dim), spec.base, spec.depth, True)


def shift_digits(spec: ScrambleSpec, dim: int) -> np.ndarray:
    if spec.seed is None:
        return np.zeros(spec.depth, dtype=np.int64)
    return _matrix_and_shift(spec.key(dim), spec.base, spec.depth, False)[1]


def _padded_digits(P: DigitalPointSet, spec: ScrambleSpec) -> np.ndarray:
    if P.base != spec.base:
        raise ValueError(f"base mismatch: points in base {P.base}, scramble in base {spec.base}")
    if spec.depth < P.precision:
        raise ValueError(f"scramble depth {spec.depth} is below point precision {P.precision}")
    x = P.digits
    if spec.depth > P.precision:
        x = np.concatenate([x, np.zeros((P.n, P.dimension, spec.depth - P.precision), dtype=np.uint8)], axis=2)
    return x


def _scramble_digits(x: np.ndarray, spec: ScrambleSpec) -> np.ndarray:
    if spec.seed is None:
        return x.copy()
    b = spec.base
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        xj = x[:, j, :]
        if spec.kind == NESTED_UNIFORM:
            keys = np.full(x.shape[0], spec.key(j), dtype=np.uint64)
            out[:, j, :] = nested_uniform_digits(xj, b, keys, spec.nest_depth)
        elif spec.kind == LINEAR:
            L, e = linear_scramble_matrix(spec, j)
            out[:, j, :] = (xj.astype(np.int64) @ L.T + e) % b
        else:
            out[:, j, :] = (xj + shift_digits(spec, j)) % b
    return out


def scramble_points(P: DigitalPointSet, spec: ScrambleSpec) -> DigitalPointSet:
    """Randomize ``P`` according to ``spec``; deterministic given the spec."""
    digits = _scramble_digits(_padded_digits(P, spec), spec)
    meta = dict(P.meta)
    meta["scramble"] = spec.metadata()
    return DigitalPointSet(digits, P.base, P.i_start, meta)


def scramble_stream(G: GeneratorMatrixSet, spec: ScrambleSpec, i_range) -> DigitalPointSet:
    """Scrambled points ``i_range = (start, stop)`` of the sequence ``G``.

    Point ``i`` is the same no matter which range it is requested in.
    """
    start, stop = i_range
    return scramble_points(generate_points(G, start, stop - start), spec)


def scrambled_replicates(P: DigitalPointSet, spec: ScrambleSpec, replicate_ids, chunk: int = 1 << 18) -> np.ndarray:
    """Float points of ``P`` under many replicates, shape ``(reps, n, d)``.

    Nested-uniform replicates are processed in batches of rows; other kinds
    loop over replicates.
    """
    reps = np.asarray(list(replicate_ids), dtype=np.int64)
    x = _padded_digits(P, spec)
    n, d, E = x.shape
    out = np.empty((len(reps), n, d), dtype=np.float64)
    if spec.kind != NESTED_UNIFORM or spec.seed is None:
        for r, rep in enumerate(reps):
            out[r] = scramble_points(P, spec.with_replicate(int(rep))).points
        return out
    per = max(1, chunk // max(n, 1))
    for lo in range(0, len(reps), per):
        block = reps[lo : lo + per]
        for j in range(d):
            keys = np.repeat(np.array([spec.key(j, int(r)) for r in block], dtype=np.uint64), n)
            xj = np.tile(x[:, j, :], (len(block), 1))
            y = nested_uniform_digits(xj, spec.base, keys, spec.nest_depth)
            out[lo : lo + len(block), :, j] = digits_to_float(y, spec.base).reshape(len(block), n)
    return out
