"""RQMC and MC estimation, variance bounds, sample-size schedules and studies.

Every replicate is keyed by ``(seed, replicate)`` and computed independently,
so results do not depend on how replicates are split across workers.
"""

from __future__ import annotations

import bisect
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _hashing as hs
from . import integrands
from .integrands import IntegrandSpec
from .lattice import cranley_patterson, korobov, lattice_points, rotation
from .netgen import GeneratorMatrixSet, faure_matrices, generate_points, identity_matrices, sobol_matrices
from .scramble import NESTED_UNIFORM, ScrambleSpec, scrambled_replicates

_MC_TAG = 0x4D43
REPLICATE_CHUNK = 16

CSV_COLUMNS = (
    "n", "mean", "var", "rmse", "p_moment", "gamma_bound_var", "chebychev_tail", "p_moment_bound", "mc_var",
)


class UnknownSamplerError(ValueError):
    pass


# ---------------------------------------------------------------- samplers


class NetSampler:
    """Digital sequence, optionally randomized; prefixes are consistent."""

    kind = "scrambled-net"
    prefix_consistent = True

    def __init__(self, G: GeneratorMatrixSet, scramble: str | None = NESTED_UNIFORM):
        self.G = G
        self.scramble = scramble

    @property
    def dimension(self) -> int:
        return self.G.dimension

    @property
    def base(self) -> int:
        return self.G.base

    @property
    def t(self) -> int | None:
        return self.G.declared_t

    def _spec(self, seed, replicate=0) -> ScrambleSpec | None:
        if self.scramble is None:
            return None
        return ScrambleSpec(self.scramble, self.G.base, self.G.precision, seed, replicate)

    def sample(self, n: int, seed: int, replicate: int = 0) -> np.ndarray:
        return self.sample_batch(n, seed, [replicate])[0]

    def sample_batch(self, n: int, seed: int, replicates) -> np.ndarray:
        P = generate_points(self.G, 0, n)
        spec = self._spec(seed)
        if spec is None:
            return np.broadcast_to(P.points, (len(replicates),) + P.points.shape)
        return scrambled_replicates(P, spec, replicates)

    def variance_factor(self, n: int) -> float:
        """``kappa`` with ``var <= kappa * sigma**2``; ``r * Gamma / n`` once the blocks are nets."""
        b = self.base
        m, r = _split(n, b)
        if self.scramble != NESTED_UNIFORM or self.t is None or m < self.t:
            return 1.0
        return r * gamma_bound(b, self.t, self.dimension) / n


class MCSampler:
    kind = "plain-mc"
    prefix_consistent = True
    base = 2

    def __init__(self, d: int):
        self.dimension = d

    def sample(self, n: int, seed: int, replicate: int = 0) -> np.ndarray:
        return hs.generator(seed, replicate, _MC_TAG).random((n, self.dimension))

    def sample_batch(self, n: int, seed: int, replicates) -> np.ndarray:
        return np.stack([self.sample(n, seed, r) for r in replicates])

    def variance_factor(self, n: int) -> float:
        return 1.0 / n


class LatticeSampler:
    """Korobov lattice of size n with a Cranley-Patterson rotation per replicate."""

    kind = "lattice-cp"
    prefix_consistent = False
    base = 2

    def __init__(self, d: int, a: int = 1_000_003, z: tuple[int, ...] | None = None):
        self.dimension = d
        self.a = a
        self.z = z

    def rule(self, n: int):
        from .lattice import LatticeRule

        if self.z is not None:
            return LatticeRule(n, self.z)
        return korobov(n, self.a, self.dimension)

    def sample(self, n: int, seed: int, replicate: int = 0) -> np.ndarray:
        return cranley_patterson(lattice_points(self.rule(n)), rotation(seed, replicate, self.dimension))

    def sample_batch(self, n: int, seed: int, replicates) -> np.ndarray:
        pts = lattice_points(self.rule(n))
        return np.stack([cranley_patterson(pts, rotation(seed, r, self.dimension)) for r in replicates])

    def variance_factor(self, n: int) -> float:
        # no gain-coefficient bound exists for rotated lattices; var <= sigma**2 always holds
        return 1.0


def make_sampler(
    kind: str,
    d: int,
    b: int = 2,
    family: str = "sobol",
    scramble: str | None = NESTED_UNIFORM,
    direction_file=None,
    korobov_a: int = 1_000_003,
):
    """Build a sampler from its CLI-level description."""
    if kind == "scrambled-net":
        if family == "sobol":
            if b != 2:
                raise ValueError("Sobol' points are base 2")
            G = sobol_matrices(direction_file, d)
        elif family == "faure":
            G = faure_matrices(b, d)
        elif family == "vdc":
            G = identity_matrices(b, d)
        else:
            raise UnknownSamplerError(f"unknown net family {family!r}")
        return NetSampler(G, scramble)
    if kind == "plain-mc":
        return MCSampler(d)
    if kind == "lattice-cp":
        return LatticeSampler(d, korobov_a)
    raise UnknownSamplerError(f"unknown sampler {kind!r}; expected scrambled-net, lattice-cp or plain-mc")


# ---------------------------------------------------------------- estimates


def rqmc_estimate(f: IntegrandSpec, sampler, n: int, seed: int, replicate: int = 0) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(np.mean(f(sampler.sample(n, seed, replicate))))


def _estimates_chunk(f, sampler, ns: list[int], seed: int, reps) -> np.ndarray:
    out = np.empty((len(reps), len(ns)))
    d = sampler.dimension
    if sampler.prefix_consistent:
        N = ns[-1]
        x = sampler.sample_batch(N, seed, reps)
        vals = f(x.reshape(-1, d)).reshape(len(reps), N)
        sums = np.cumsum(vals, axis=1)
        idx = np.asarray(ns) - 1
        out[:] = sums[:, idx] / np.asarray(ns, dtype=np.float64)
    else:
        for c, n in enumerate(ns):
            x = sampler.sample_batch(n, seed, reps)
            out[:, c] = f(x.reshape(-1, d)).reshape(len(reps), n).mean(axis=1)
    return out


def replicate_estimates(f: IntegrandSpec, sampler, ns, seed: int, reps: int, workers: int = 1) -> np.ndarray:
    """Estimates for replicates ``0 .. reps-1`` at each sample size, shape ``(reps, len(ns))``.

    Prefix-consistent samplers evaluate one stream per replicate and read all
    sample sizes off its running sums.
    """
    ns = sorted(int(n) for n in ns)
    if not ns or ns[0] < 1:
        raise ValueError("sample sizes must be >= 1")
    chunks = [range(lo, min(lo + REPLICATE_CHUNK, reps)) for lo in range(0, reps, REPLICATE_CHUNK)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _estimates_chunk(f, sampler, ns, seed, list(c)), chunks))
    else:
        parts = [_estimates_chunk(f, sampler, ns, seed, list(c)) for c in chunks]
    return np.concatenate(parts, axis=0) if parts else np.empty((0, len(ns)))


def replicate_variance(f: IntegrandSpec, sampler, n: int, seed: int, reps: int, p: float | None = None, workers: int = 1):
    """``(mean, unbiased variance, mean |estimate - mu|**p)`` over ``reps`` replicates."""
    if reps < 2:
        raise ValueError("need at least 2 replicates")
    if p is not None and f.mean is None:
        raise ValueError(f"{f.name}: exact mean unknown, cannot form p-moment")
    est = replicate_estimates(f, sampler, [n], seed, reps, workers)[:, 0]
    pm = float(np.mean(np.abs(est - f.mean) ** p)) if p is not None else None
    return float(est.mean()), float(est.var(ddof=1)), pm


# ---------------------------------------------------------------- bounds


def gamma_bound(b: int, t: int, d: int) -> float:
    """Smallest applicable gain-coefficient bound for a scrambled (t, m, d)-net."""
    if b < 2 or t < 0 or d < 1:
        raise ValueError("need b >= 2, t >= 0, d >= 1")
    cands = [b**t * ((b + 1) / (b - 1)) ** d]
    if t == 0:
        cands.append((b / (b - 1)) ** d)
    if d == 1:
        cands.append(float(b**t))
    return min(cands)


def chebychev_tail(eps: float, n: int, r: int, gamma: float, sigma2: float) -> float:
    """``min(1, r Gamma sigma^2 / (n eps^2))``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if sigma2 == 0:
        return 0.0
    return min(1.0, r * gamma * sigma2 / (n * eps * eps))


def p_moment_bound(n: int, r: int, gamma: float, p: float, norm_pth: float) -> float:
    """``2**(2-p) (r Gamma / n)**(p-1) ||f||_p**p`` for ``1 < p < 2``."""
    if not 1 < p < 2:
        raise ValueError("p must lie strictly between 1 and 2")
    return 2 ** (2 - p) * (r * gamma / n) ** (p - 1) * norm_pth


# ---------------------------------------------------------------- schedules


def _split(n: int, b: int) -> tuple[int, int]:
    """``(m, r)`` with ``n = r * b**m`` and ``b`` not dividing ``r``."""
    m = 0
    while n % b == 0:
        n //= b
        m += 1
    return m, n


def schedule(R: int, b: int, n_max: int) -> list[int]:
    """Sorted unique ``r * b**m <= n_max`` with ``1 <= r <= R``."""
    if R < 1 or b < 2:
        raise ValueError("need R >= 1 and b >= 2")
    out = set()
    bm = 1
    while bm <= n_max:
        for r in range(1, R + 1):
            if r * bm > n_max:
                break
            out.add(r * bm)
        bm *= b
    return sorted(out)


def bracket(n: int, R: int, b: int) -> tuple[int, int]:
    """Nearest schedule members below and above ``n``.

    For each digit shift ``m``, the best member ``r b**m`` below ``n`` has
    ``r = min(R, n // b**m)`` and the best above has ``r = ceil(n / b**m)``
    when that is at most ``R``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if R < 1 or b < 2:
        raise ValueError("need R >= 1 and b >= 2")
    lo, hi = 0, None
    bm = 1
    while True:
        q = n // bm
        if q >= 1:
            lo = max(lo, min(R, q) * bm)
        up = -(-n // bm)
        if up <= R:
            hi = up * bm if hi is None else min(hi, up * bm)
        if bm >= n:
            break
        bm *= b
    return lo, hi


def bracket_ratio_bound(b: int, k: int) -> float:
    """Lower bound on ``n_lower / n`` for ``R = b**k`` and ``n > b**k``.

    ``b**L / (b**(L-k+1) + b**L)`` does not depend on ``L``.
    """
    return 1.0 / (1.0 + float(b) ** (1 - k))


# ---------------------------------------------------------------- studies


@dataclass
class ExperimentConfig:
    sampler: str = "scrambled-net"
    family: str = "sobol"
    scramble: str | None = NESTED_UNIFORM
    b: int = 2
    d: int = 1
    integrand: str = "centered-product"
    params: dict = field(default_factory=dict)
    R: int = 1
    m_min: int = 0
    m_max: int = 10
    replicates: int = 2000
    seed: int = 0
    p: float = 1.5
    epsilon: float = 0.1
    korobov_a: int = 1_000_003
    direction_file: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if not self.m_max >= self.m_min >= 0:
            raise ValueError("need m_max >= m_min >= 0")
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates")
        if not 1 < self.p < 2:
            raise ValueError("p must lie strictly between 1 and 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def build_integrand(self) -> IntegrandSpec:
        params = dict(self.params)
        if self.integrand != "kink":
            params.setdefault("d", self.d)
        return integrands.make(self.integrand, **params)

    def build_sampler(self):
        return make_sampler(self.sampler, self.d, self.b, self.family, self.scramble, self.direction_file, self.korobov_a)

    def sample_sizes(self) -> list[int]:
        lo = self.b**self.m_min
        return [n for n in schedule(self.R, self.b, self.b**self.m_max) if n >= lo]

    def to_json(self) -> str:
        data = dataclasses.asdict(self)
        data.pop("workers")  # results do not depend on it
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))


@dataclass
class ConvergenceRow:
    n: int
    mean: float
    var: float
    rmse: float | None
    p_moment: float | None
    gamma_bound_var: float
    chebychev_tail: float
    p_moment_bound: float
    mc_var: float


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    rows: list[ConvergenceRow]
    estimates: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(getattr(row, c)) for c in CSV_COLUMNS) + "\n")
        return buf.getvalue()

    def slope(self, m_lo: int, m_hi: int) -> "SlopeFit":
        return rmse_slope(self, m_lo, m_hi)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def build_report(config: ExperimentConfig, f: IntegrandSpec, sampler, ns, est: np.ndarray) -> ConvergenceReport:
    sigma2 = f.variance
    norm_pth = f.p_norm_pth(config.p) if f.p_norm_pth is not None else math.inf
    rows = []
    for c, n in enumerate(ns):
        col = est[:, c]
        kappa = sampler.variance_factor(n)
        var_bound = kappa * sigma2 if sigma2 is not None else math.inf
        if f.mean is not None:
            err = col - f.mean
            rmse = float(np.sqrt(np.mean(err**2)))
            pm = float(np.mean(np.abs(err) ** config.p))
        else:
            rmse = pm = None
        rows.append(
            ConvergenceRow(
                n=int(n),
                mean=float(col.mean()),
                var=float(col.var(ddof=1)),
                rmse=rmse,
                p_moment=pm,
                gamma_bound_var=var_bound,
                # kappa plays the role of r * Gamma / n in both bounds
                chebychev_tail=chebychev_tail(config.epsilon, 1, 1, kappa, sigma2) if sigma2 is not None else 1.0,
                p_moment_bound=p_moment_bound(1, 1, kappa, config.p, norm_pth),
                mc_var=sigma2 / n if sigma2 is not None else math.inf,
            )
        )
    return ConvergenceReport(config, rows, est)


def convergence_study(config: ExperimentConfig) -> ConvergenceReport:
    """Replicated estimates at every schedule size in ``[b**m_min, b**m_max]``."""
    f = config.build_integrand()
    sampler = config.build_sampler()
    ns = config.sample_sizes()
    est = replicate_estimates(f, sampler, ns, config.seed, config.replicates, config.workers)
    return build_report(config, f, sampler, ns, est)


@dataclass
class SllnResult:
    report: ConvergenceReport
    sample_sizes: np.ndarray
    errors: np.ndarray  # (seeds, len(sample_sizes)), |estimate - mu|
    quantiles: dict[str, np.ndarray]

    def final_errors(self) -> np.ndarray:
        return self.errors[:, -1]

    def late_vs_early_max(self, n_split: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-seed max error over ``n >= n_split`` and over ``n < n_split``."""
        late = self.sample_sizes >= n_split
        return self.errors[:, late].max(axis=1), self.errors[:, ~late].max(axis=1)


def slln_study(config: ExperimentConfig) -> SllnResult:
    """Error trajectories along the schedule, one prefix-consistent stream per seed.

    The replicate index plays the role of the seed: stream ``s`` is keyed by
    ``(config.seed, s)``.
    """
    f = config.build_integrand()
    if f.mean is None:
        raise ValueError(f"{f.name}: exact mean required")
    report = convergence_study(config)
    ns = np.array([r.n for r in report.rows])
    errors = np.abs(report.estimates - f.mean)
    q = {
        "median": np.median(errors, axis=0),
        "q90": np.quantile(errors, 0.9, axis=0),
        "max": errors.max(axis=0),
    }
    return SllnResult(report, ns, errors, q)


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    intercept: float


def rmse_slope(report, m_lo: int, m_hi: int, b: int | None = None) -> SlopeFit:
    """Least-squares slope of log RMSE against log n over rows with ``n = b**m``, ``m_lo <= m <= m_hi``.

    ``report`` is a :class:`ConvergenceReport` or an iterable of ``(n, rmse)`` pairs.
    """
    if isinstance(report, ConvergenceReport):
        b = b or report.config.b
        pairs = [(r.n, r.rmse) for r in report.rows]
    else:
        b = b or 2
        pairs = [tuple(p) for p in report]
    wanted = {b**m for m in range(m_lo, m_hi + 1)}
    pts = [(n, e) for n, e in pairs if n in wanted and e is not None]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 rows with n = b^m, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    fit = stats.linregress(x, y)
    return SlopeFit(float(fit.slope), float(fit.stderr), float(fit.intercept))


def brute_force_schedule(R: int, b: int, n_max: int) -> list[int]:
    """Direct enumeration of the schedule, for cross-checking."""
    return sorted({r * b**m for r in range(1, R + 1) for m in range(0, n_max.bit_length() + 1) if r * b**m <= n_max})


def brute_force_bracket(n: int, members: list[int]) -> tuple[int, int]:
    i = bisect.bisect_right(members, n)
    j = bisect.bisect_left(members, n)
    return members[i - 1], members[j]
