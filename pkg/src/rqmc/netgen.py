"""Digital nets and sequences in base b.

A digital construction is a set of ``d`` generator matrices over Z_b.  Point
``i`` has coordinate digits ``C_j @ digits(i) mod b``, where ``digits(i)``
is the base-b expansion of the index, least significant digit first, and
row ``r`` of the product is the digit of weight ``b**-(r+1)``.

Points are carried as exact digit arrays, shape ``(n, d, E)``; float values
are derived from the digits on demand.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

DIRECTION_FILE_ENV = "RQMC_DIRECTION_FILE"
DEFAULT_DIRECTION_FILE = "new-joe-kuo-6.1024"


class PrecisionError(ValueError):
    """Requested indices or digit depth exceed the precision E."""


class DirectionFileError(ValueError):
    """Malformed or insufficient direction-number table."""


def default_precision(b: int) -> int:
    if b == 2:
        return 32
    return math.ceil(64 / math.log2(b))


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, math.isqrt(n) + 1))


@dataclass(frozen=True, eq=False)
class GeneratorMatrixSet:
    """Generator matrices of a digital net/sequence.

    ``matrices[j, r, c]`` maps index digit ``c`` (weight ``b**c``) to output
    digit ``r`` (weight ``b**-(r+1)``) for coordinate ``j``.
    """

    base: int
    matrices: np.ndarray
    declared_t: int | None = None
    provenance: str = ""

    def __post_init__(self):
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        mats = np.array(self.matrices, dtype=np.int64)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError(f"matrices must have shape (d, E, E), got {mats.shape}")
        if mats.shape[0] < 1:
            raise ValueError("need at least one dimension")
        if mats.min() < 0 or mats.max() >= self.base:
            raise ValueError(f"matrix entries must lie in 0..{self.base - 1}")
        if self.declared_t is not None and self.declared_t < 0:
            raise ValueError("declared_t must be nonnegative")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def dimension(self) -> int:
        return self.matrices.shape[0]

    @property
    def precision(self) -> int:
        return self.matrices.shape[1]

    def subset(self, d: int) -> "GeneratorMatrixSet":
        """The first ``d`` coordinates."""
        if not 1 <= d <= self.dimension:
            raise ValueError(f"d must be in 1..{self.dimension}")
        return GeneratorMatrixSet(self.base, self.matrices[:d], None, self.provenance)


@dataclass(eq=False)
class DigitalPointSet:
    """Points with exact base-b digits.

    ``digits[i, j, k]`` is digit ``k+1`` (weight ``b**-(k+1)``) of coordinate
    ``j`` of the point with index ``i_start + i``.
    """

    digits: np.ndarray
    base: int
    i_start: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.digits = np.asarray(self.digits, dtype=np.uint8)
        if self.digits.ndim != 3:
            raise ValueError("digits must have shape (n, d, E)")

    @property
    def n(self) -> int:
        return self.digits.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def dimension(self) -> int:
        return self.digits.shape[1]

    @property
    def precision(self) -> int:
        return self.digits.shape[2]

    @property
    def i_end(self) -> int:
        return self.i_start + self.n

    @cached_property
    def points(self) -> np.ndarray:
        """Float coordinates, shape ``(n, d)``."""
        return digits_to_float(self.digits, self.base)

    def __getitem__(self, sl: slice) -> "DigitalPointSet":
        if not isinstance(sl, slice) or sl.step not in (None, 1):
            raise TypeError("only contiguous slices are supported")
        start, stop, _ = sl.indices(self.n)
        return DigitalPointSet(self.digits[start:stop], self.base, self.i_start + start, dict(self.meta))

    @classmethod
    def from_points(cls, x, base: int, precision: int | None = None) -> "DigitalPointSet":
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        E = precision or default_precision(base)
        return cls(digits_from_float(x, base, E), base)


def digits_to_float(digits: np.ndarray, b: int) -> np.ndarray:
    """Sum of ``digit_k * b**-k``; exact when ``b**E`` fits the float mantissa."""
    digits = np.asarray(digits)
    E = digits.shape[-1]
    if b == 2 and E <= 53:
        weights = np.array([1 << (E - 1 - k) for k in range(E)], dtype=np.uint64)
        ints = (digits.astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)
        return np.ldexp(ints.astype(np.float64), -E)
    # Horner from the least significant digit; only digits above float resolution matter
    keep = min(E, math.ceil(60 / math.log2(b)))
    v = np.zeros(digits.shape[:-1], dtype=np.float64)
    for k in range(keep - 1, -1, -1):
        v = (v + digits[..., k]) / b
    return np.minimum(v, np.nextafter(1.0, 0.0))


def digits_from_float(x: np.ndarray, b: int, E: int) -> np.ndarray:
    """Base-b digits of floats in [0, 1), truncated to ``E`` digits.

    Exact for power-of-two bases.  For other bases a float within 4 ulp of a
    multiple of ``b**-E_snap`` (about 40 bits of resolution) is taken to be
    that multiple.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0) | (x >= 1)):
        raise ValueError("coordinates must lie in [0, 1)")
    out = np.zeros(x.shape + (E,), dtype=np.uint8)
    if b & (b - 1) == 0:
        # power-of-two base: scaling by b is exact in binary floating point
        v = x.copy()
        for k in range(E):
            v = v * b
            dk = np.floor(v)
            out[..., k] = dk
            v -= dk
        return out
    # A float within a few ulp of a b**-E_snap grid value is read as that value:
    # base-b fractions such as 1/3 are not representable, and truncating the
    # float's expansion would turn 0.1 (base 3) into 0.0222...
    E_snap = min(E, int(40 / math.log2(b)))
    snap = b**E_snap
    flat_in = x.ravel()
    flat_out = out.reshape(-1, E)
    for idx, xv in enumerate(flat_in):
        xv = float(xv)
        fr = Fraction(xv)
        N = round(fr * snap)
        if N < snap and abs(fr - Fraction(N, snap)) <= 4 * Fraction(math.ulp(xv)):
            N *= b ** (E - E_snap)
        else:
            scaled = fr * b**E
            N = scaled.numerator // scaled.denominator
        for k in range(E - 1, -1, -1):
            N, flat_out[idx, k] = divmod(N, b)
    return out


def index_digits(indices: np.ndarray, b: int, E: int) -> np.ndarray:
    """Base-b digits of nonnegative integers, least significant first, shape ``(n, E)``."""
    idx = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(idx.shape + (E,), dtype=np.int64)
    for k in range(E):
        out[..., k] = idx % b
        idx //= b
    return out


def radical_inverse(i: int, b: int, precision: int | None = None) -> float:
    """Van der Corput radical inverse of ``i`` in base ``b``.

    Only the lowest ``precision`` digits of ``i`` contribute.
    """
    if i < 0 or b < 2:
        raise ValueError("need i >= 0 and b >= 2")
    E = precision or default_precision(b)
    num, den = 0, 1
    for _ in range(E):
        if i == 0:
            break
        i, a = divmod(i, b)
        num = num * b + a
        den *= b
    return num / den


def _gray(indices: np.ndarray, b: int, E: int) -> np.ndarray:
    """Digitwise base-b Gray code: g_k = (a_k - a_{k+1}) mod b."""
    a = index_digits(indices, b, E)
    nxt = np.concatenate([a[..., 1:], np.zeros_like(a[..., :1])], axis=-1)
    return (a - nxt) % b


def generate_points(G: GeneratorMatrixSet, i_start: int, count: int, gray: bool = False) -> DigitalPointSet:
    """Points ``i_start .. i_start+count-1`` of the digital sequence ``G``.

    With ``gray=True`` the points come in Gray-code order; any aligned block of
    ``b**m`` indices yields the same set as in natural order.
    """
    b, E = G.base, G.precision
    if i_start < 0 or count < 0:
        raise ValueError("i_start and count must be nonnegative")
    if i_start + count > b**E:
        raise PrecisionError(f"indices up to {i_start + count - 1} need more than E={E} base-{b} digits")
    idx = np.arange(i_start, i_start + count, dtype=np.int64)
    a = _gray(idx, b, E) if gray else index_digits(idx, b, E)
    # (count, E) @ (E, E)^T per coordinate
    digits = np.einsum("nc,jrc->njr", a, G.matrices) % b
    meta = {"generator": G.provenance, "gray": gray}
    return DigitalPointSet(digits.astype(np.uint8), b, i_start, meta)


def parse_direction_file(text: str, source: str = "<text>") -> list[tuple[int, int, int, list[int]]]:
    """Parse a Joe-Kuo style table: header line, then rows ``d s a m_1 .. m_s``."""
    rows = []
    lines = text.splitlines()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            vals = [int(tok) for tok in line.split()]
        except ValueError:
            raise DirectionFileError(f"{source}:{lineno}: non-integer field in {line.strip()!r}") from None
        if len(vals) < 4:
            raise DirectionFileError(f"{source}:{lineno}: expected 'd s a m_1..m_s', got {line.strip()!r}")
        dim, s, a, m = vals[0], vals[1], vals[2], vals[3:]
        if s < 1 or len(m) != s:
            raise DirectionFileError(f"{source}:{lineno}: degree s={s} but {len(m)} initial values")
        if not 0 <= a < (1 << (s - 1)):
            raise DirectionFileError(f"{source}:{lineno}: coefficient code a={a} out of range for s={s}")
        for i, mi in enumerate(m, start=1):
            if mi % 2 == 0 or not 0 < mi < (1 << i):
                raise DirectionFileError(f"{source}:{lineno}: m_{i}={mi} must be odd and below 2^{i}")
        if rows and dim != rows[-1][0] + 1:
            raise DirectionFileError(f"{source}:{lineno}: dimension {dim} out of sequence")
        rows.append((dim, s, a, m))
    return rows


def _read_direction_source(direction_file) -> tuple[str, str]:
    if direction_file is None:
        direction_file = os.environ.get(DIRECTION_FILE_ENV)
    if direction_file is None:
        text = resources.files("rqmc.data").joinpath(DEFAULT_DIRECTION_FILE).read_text(encoding="utf-8")
        return text, DEFAULT_DIRECTION_FILE
    if isinstance(direction_file, Path) or "\n" not in str(direction_file):
        path = Path(direction_file)
        try:
            return path.read_text(encoding="utf-8"), str(path)
        except OSError as exc:
            raise DirectionFileError(f"cannot read direction file {path}: {exc}") from exc
    return str(direction_file), "<text>"


def sobol_direction_integers(s: int, a: int, m_init: Sequence[int], E: int) -> list[int]:
    """Extend the initial ``m_1..m_s`` to ``m_1..m_E`` by the Sobol' recurrence."""
    m = list(m_init[:E])
    for k in range(s, E):
        new = m[k - s] ^ (m[k - s] << s)
        for i in range(1, s):
            if (a >> (s - 1 - i)) & 1:
                new ^= m[k - i] << i
        m.append(new)
    return m


def sobol_matrices(direction_file=None, d: int = 2, E: int = 32) -> GeneratorMatrixSet:
    """Sobol' generator matrices in base 2.

    ``direction_file`` is a path, the table text itself, or ``None`` for the
    ``RQMC_DIRECTION_FILE`` environment variable or the bundled table.
    Dimension 1 is always the identity.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    mats = np.zeros((d, E, E), dtype=np.int64)
    mats[0] = np.eye(E, dtype=np.int64)
    t = 0
    source = "identity"
    if d > 1:
        text, source = _read_direction_source(direction_file)
        rows = parse_direction_file(text, source)
        if len(rows) < d - 1:
            raise DirectionFileError(f"{source}: has {len(rows)} rows, need {d - 1} for d={d}")
        if rows[0][0] != 2:
            raise DirectionFileError(f"{source}:2: first row must describe dimension 2")
        for j, (_, s, a, m_init) in enumerate(rows[: d - 1], start=1):
            m = sobol_direction_integers(s, a, m_init, E)
            for c in range(E):
                k = c + 1  # m_k has k bits; bit (k-1-r) is output digit r
                for r in range(k):
                    mats[j, r, c] = (m[c] >> (k - 1 - r)) & 1
            t += s - 1
    return GeneratorMatrixSet(2, mats, declared_t=t, provenance=f"sobol:{source}")


def pascal_power(b: int, power: int, E: int) -> np.ndarray:
    """Upper-triangular ``P**power`` mod b, ``P[r, c] = C(c, r)``."""
    out = np.zeros((E, E), dtype=np.int64)
    for c in range(E):
        for r in range(c + 1):
            out[r, c] = (math.comb(c, r) * pow(power, c - r, b)) % b
    return out


def faure_matrices(b: int, d: int, E: int | None = None) -> GeneratorMatrixSet:
    """Faure generator matrices: coordinate j uses the (j-1)-th Pascal power mod b."""
    if not is_prime(b):
        raise ValueError(f"Faure construction needs a prime base, got {b}")
    if not 1 <= d <= b:
        raise ValueError(f"Faure construction needs 1 <= d <= b, got d={d}, b={b}")
    E = E or default_precision(b)
    mats = np.stack([pascal_power(b, j, E) for j in range(d)])
    return GeneratorMatrixSet(b, mats, declared_t=0, provenance=f"faure:b={b}")


def identity_matrices(b: int, d: int = 1, E: int | None = None) -> GeneratorMatrixSet:
    """Every coordinate is the base-b van der Corput sequence."""
    E = E or default_precision(b)
    mats = np.broadcast_to(np.eye(E, dtype=np.int64), (d, E, E))
    return GeneratorMatrixSet(b, mats, declared_t=0 if d == 1 else None, provenance=f"identity:b={b}")


@dataclass(frozen=True)
class ElementaryInterval:
    """Half-open box with side ``b**-k_j`` anchored at ``c_j * b**-k_j``."""

    k: tuple[int, ...]
    c: tuple[int, ...]
    base: int

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        object.__setattr__(self, "c", tuple(int(v) for v in self.c))
        if len(self.k) != len(self.c):
            raise ValueError("k and c must have the same length")
        for kj, cj in zip(self.k, self.c):
            if kj < 0 or not 0 <= cj < self.base**kj:
                raise ValueError(f"invalid cell index c={cj} for k={kj}")

    @property
    def order(self) -> int:
        """``|k|``."""
        return sum(self.k)

    @property
    def volume(self) -> Fraction:
        return interval_volume(self)

    def contains(self, x) -> bool:
        for xj, kj, cj in zip(x, self.k, self.c):
            scale = self.base**kj
            v = Fraction(xj) * scale
            if not cj <= v < cj + 1:
                return False
        return True

    def bounds(self) -> list[tuple[Fraction, Fraction]]:
        return [(Fraction(cj, self.base**kj), Fraction(cj + 1, self.base**kj)) for kj, cj in zip(self.k, self.c)]


def interval_volume(interval: ElementaryInterval) -> Fraction:
    return Fraction(1, interval.base ** interval.order)


def locate(x, k, b: int) -> tuple[int, ...]:
    """Cell indices ``c`` with ``x`` in ``E(k, c)``, by exact rational arithmetic."""
    out = []
    for xj, kj in zip(x, k):
        fr = Fraction(xj)
        if not 0 <= fr < 1:
            raise ValueError("coordinates must lie in [0, 1)")
        v = fr * b**kj
        out.append(v.numerator // v.denominator)
    return tuple(out)
