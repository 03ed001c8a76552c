"""Exact checks of equidistribution.

Net checks count points in elementary intervals through integer digit
prefixes; no floating-point box tests are involved.  Star discrepancy is
computed exactly on the critical-corner grid for small inputs, and bounded
from below by random search otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _hashing as hs
from .netgen import DigitalPointSet, ElementaryInterval, GeneratorMatrixSet, PrecisionError, generate_points
from .scramble import ScrambleSpec, scramble_points

EXACT_MAX_DIM = 3
EXACT_MAX_POINTS = 1024


class DiscrepancyLimitError(ValueError):
    """Input too large for the exact star discrepancy."""


@dataclass
class IntervalFailure:
    interval: ElementaryInterval
    observed: int
    required: int


@dataclass
class NetCheckReport:
    m: int
    t_claimed: int
    passed: bool
    t_exact: int | None = None
    failure: IntervalFailure | None = None

    def to_dict(self) -> dict:
        out = {"m": self.m, "t_claimed": self.t_claimed, "passed": self.passed, "t_exact": self.t_exact}
        if self.failure is not None:
            f = self.failure
            out["failure"] = {
                "k": list(f.interval.k),
                "c": list(f.interval.c),
                "observed": f.observed,
                "required": f.required,
            }
        return out


@dataclass
class SequenceCheckReport:
    t: int
    m_max: int
    r_max: int
    passed: bool
    blocks_checked: int
    first_failure: tuple[int, int, NetCheckReport] | None = None  # (m, r, report)


@dataclass
class DiscrepancyResult:
    value: float
    mode: str
    witness: np.ndarray
    side: str = ""


@dataclass
class UniformityResult:
    statistics: np.ndarray
    threshold: float
    passed: bool
    ks_pvalues: np.ndarray = field(default_factory=lambda: np.empty(0))
    ks_passed: bool = True


def compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def _as_digital(P, base: int | None, depth: int) -> DigitalPointSet:
    if isinstance(P, DigitalPointSet):
        if P.precision < depth:
            raise ValueError(f"points carry {P.precision} digits, need {depth}")
        return P
    if base is None:
        raise ValueError("a base is required for float point sets")
    return DigitalPointSet.from_points(P, base, max(depth, 1))


class _PrefixTable:
    """Integer prefixes ``floor(x_j * b**k)`` for every coordinate and depth."""

    def __init__(self, P: DigitalPointSet, depth: int):
        b = P.base
        n, d = P.n, P.dimension
        self.base = b
        self.prefix = np.zeros((d, depth + 1, n), dtype=np.int64)
        for k in range(1, depth + 1):
            self.prefix[:, k, :] = self.prefix[:, k - 1, :] * b + P.digits[:, :, k - 1].T

    def codes(self, k) -> np.ndarray:
        code = np.zeros(self.prefix.shape[2], dtype=np.int64)
        for j, kj in enumerate(k):
            code = code * self.base**kj + self.prefix[j, kj]
        return code


def _decode(code: int, k, b: int) -> tuple[int, ...]:
    c = []
    for kj in reversed(k):
        code, cj = divmod(code, b**kj)
        c.append(cj)
    return tuple(reversed(c))


def _check_level(table: _PrefixTable, level: int, m: int, d: int) -> IntervalFailure | None:
    b = table.base
    required = b ** (m - level)
    for k in compositions(level, d):
        counts = np.bincount(table.codes(k), minlength=b**level)
        bad = np.flatnonzero(counts != required)
        if bad.size:
            cell = int(bad[0])
            return IntervalFailure(ElementaryInterval(k, _decode(cell, k, b), b), int(counts[cell]), required)
    return None


def _prepare(P, t: int, m: int, base: int | None) -> tuple[DigitalPointSet, _PrefixTable]:
    if not 0 <= t <= m:
        raise ValueError(f"need 0 <= t <= m, got t={t}, m={m}")
    b = P.base if isinstance(P, DigitalPointSet) else base
    if b is None:
        raise ValueError("a base is required for float point sets")
    n = len(P)
    if n != b**m:
        raise ValueError(f"a ({t},{m},d)-net in base {b} has {b**m} points, got {n}")
    D = _as_digital(P, b, m - t)
    return D, _PrefixTable(D, m - t)


def check_net(P, t: int, m: int, base: int | None = None) -> NetCheckReport:
    """Check the (t, m, d)-net property of ``P``.

    Every elementary interval with ``|k| <= m - t`` must hold exactly
    ``b**(m - |k|)`` points.  ``P`` is a :class:`DigitalPointSet` or a float
    array with ``base`` given.
    """
    D, table = _prepare(P, t, m, base)
    for level in range(1, m - t + 1):
        failure = _check_level(table, level, m, D.dimension)
        if failure is not None:
            return NetCheckReport(m, t, False, failure=failure)
    return NetCheckReport(m, t, True)


def exact_t(P, m: int, base: int | None = None) -> int:
    """Smallest t for which ``P`` is a (t, m, d)-net.

    Walks t down from m, i.e. interval orders |k| = 1, 2, ... upwards, and
    stops at the first failing order.
    """
    D, table = _prepare(P, 0, m, base)
    for level in range(1, m + 1):
        if _check_level(table, level, m, D.dimension) is not None:
            return m - level + 1
    return 0


def check_sequence(
    G, t: int, m_max: int, r_max: int, spec: ScrambleSpec | None = None
) -> SequenceCheckReport:
    """Check every block ``(r-1) b**m .. r b**m - 1`` for ``t <= m <= m_max``, ``r <= r_max``.

    ``G`` is a :class:`GeneratorMatrixSet` (optionally scrambled by ``spec``)
    or an explicit :class:`DigitalPointSet` whose first point is index 0 of
    the sequence.
    """
    if isinstance(G, GeneratorMatrixSet):
        b = G.base
        total = r_max * b**m_max
        if total > b**G.precision:
            raise PrecisionError(f"{total} points exceed precision E={G.precision}")
        P = generate_points(G, 0, total)
        if spec is not None:
            P = scramble_points(P, spec)
    else:
        P = G
        b = P.base
        if len(P) < r_max * b**m_max:
            raise ValueError(f"need {r_max * b**m_max} points, have {len(P)}")
    checked = 0
    for m in range(t, m_max + 1):
        for r in range(1, r_max + 1):
            block = P[(r - 1) * b**m : r * b**m]
            rep = check_net(block, t, m)
            checked += 1
            if not rep.passed:
                return SequenceCheckReport(t, m_max, r_max, False, checked, (m, r, rep))
    return SequenceCheckReport(t, m_max, r_max, True, checked)


def _as_float(P) -> np.ndarray:
    if isinstance(P, DigitalPointSet):
        return P.points
    x = np.asarray(P, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def star_discrepancy_exact(P) -> DiscrepancyResult:
    """Exact star discrepancy over anchored boxes ``[0, a)``.

    The supremum is attained (or approached) at corners whose coordinates
    are point coordinates or 1.  At each corner both one-sided local
    discrepancies are evaluated: ``vol - #open/n`` and ``#closed/n - vol``.
    The first axis is swept; the trailing axes are held as dense count
    arrays, so cost is ``O(n * (n+1)**(d-1))``.
    """
    x = _as_float(P)
    n, d = x.shape
    if d > EXACT_MAX_DIM or n > EXACT_MAX_POINTS:
        raise DiscrepancyLimitError(
            f"exact star discrepancy limited to d <= {EXACT_MAX_DIM}, n <= {EXACT_MAX_POINTS} "
            f"(got d={d}, n={n}); use star_discrepancy_lower_bound"
        )
    if n == 0:
        raise ValueError("empty point set")
    grids = [np.unique(np.append(x[:, j], 1.0)) for j in range(d)]
    idx = np.stack([np.searchsorted(grids[j], x[:, j]) for j in range(d)], axis=1)
    tail_shape = tuple(len(g) for g in grids[1:])
    vol_tail = np.ones(tail_shape)
    for ax, g in enumerate(grids[1:]):
        shape = [1] * len(tail_shape)
        shape[ax] = len(g)
        vol_tail = vol_tail * g.reshape(shape)

    C = np.zeros(tail_shape, dtype=np.float64)  # closed counts of points swept so far
    O = np.zeros(tail_shape, dtype=np.float64)  # open counts: O[g] = C[g - 1]
    dst = tuple(slice(1, None) for _ in tail_shape)
    src = tuple(slice(None, -1) for _ in tail_shape)
    v_open = np.empty(tail_shape)
    v_closed = np.empty(tail_shape)
    order = np.argsort(idx[:, 0], kind="stable")
    pos = 0
    best = (-1.0, None, "")
    for i0, a0 in enumerate(grids[0]):
        if tail_shape:
            O[dst] = C[src]
        else:
            O = C.copy()
        while pos < n and idx[order[pos], 0] == i0:
            tail = tuple(int(v) for v in idx[order[pos], 1:])
            C[tuple(slice(v, None) for v in tail)] += 1
            pos += 1
        np.multiply(vol_tail, a0, out=v_open)
        np.subtract(C / n, v_open, out=v_closed)
        v_open -= O / n
        for side, arr in (("open", v_open), ("closed", v_closed)):
            flat = int(np.argmax(arr))
            val = float(np.ravel(arr)[flat])
            if val > best[0]:
                tail_idx = np.unravel_index(flat, tail_shape) if tail_shape else ()
                corner = np.array([a0] + [grids[j + 1][t] for j, t in enumerate(tail_idx)])
                best = (val, corner, side)
    return DiscrepancyResult(max(best[0], 0.0), "exact", best[1], best[2])


def _local_discrepancies(x: np.ndarray, corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    vol = corners.prod(axis=1)
    lt = (x[None, :, :] < corners[:, None, :]).all(axis=2).sum(axis=1)
    le = (x[None, :, :] <= corners[:, None, :]).all(axis=2).sum(axis=1)
    return vol - lt / n, le / n - vol


def star_discrepancy_lower_bound(P, trials: int, seed: int = 0) -> DiscrepancyResult:
    """Lower bound on the star discrepancy from random corners.

    The best random corner is then snapped to the critical grid: upwards to
    the next point coordinate for the open side, downwards to the previous
    one for the closed side.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = _as_float(P)
    n, d = x.shape
    rng = hs.generator(seed, 0x5354)
    best_val, best_corner = -np.inf, None
    chunk = max(1, (1 << 22) // max(n * d, 1))
    for lo in range(0, trials, chunk):
        corners = rng.random((min(chunk, trials - lo), d))
        v_open, v_closed = _local_discrepancies(x, corners)
        vals = np.maximum(v_open, v_closed)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_corner = float(vals[i]), corners[i]
    up = np.empty(d)
    down = np.empty(d)
    for j in range(d):
        col = x[:, j]
        above = col[col >= best_corner[j]]
        below = col[col <= best_corner[j]]
        up[j] = above.min() if above.size else 1.0
        down[j] = below.max() if below.size else best_corner[j]
    cand = np.stack([best_corner, up, down])
    v_open, v_closed = _local_discrepancies(x, cand)
    vals = np.concatenate([v_open, v_closed])
    i = int(np.argmax(vals))
    side = "open" if i < 3 else "closed"
    value = max(best_val, float(vals[i]))
    corner = cand[i % 3] if vals[i] >= best_val else best_corner
    return DiscrepancyResult(max(value, 0.0), "lower_bound", corner, side)


def uniformity_chi_square(samples, cells: int, level: float = 0.999, ks_level: float = 0.01) -> UniformityResult:
    """Chi-square test of uniform marginals, per point index and coordinate.

    ``samples`` has shape ``(replicates, points, d)`` (or ``(replicates, d)``
    for a single point).  Each column is binned into ``cells`` equal cells;
    the verdict rejects if any statistic exceeds the ``level`` quantile.  A
    Kolmogorov-Smirnov test is reported alongside.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, None, :]
    reps = x.shape[0]
    if reps < 50 * cells:
        raise ValueError(f"need at least {50 * cells} replicates for {cells} cells, got {reps}")
    bins = np.clip(np.floor(x * cells).astype(np.int64), 0, cells - 1)
    expected = reps / cells
    stat = np.zeros(x.shape[1:])
    ks = np.zeros(x.shape[1:])
    for i in range(x.shape[1]):
        for j in range(x.shape[2]):
            counts = np.bincount(bins[:, i, j], minlength=cells)
            stat[i, j] = ((counts - expected) ** 2 / expected).sum()
            ks[i, j] = stats.kstest(x[:, i, j], "uniform").pvalue
    threshold = float(stats.chi2.ppf(level, cells - 1))
    return UniformityResult(stat, threshold, bool((stat <= threshold).all()), ks, bool((ks > ks_level).all()))
