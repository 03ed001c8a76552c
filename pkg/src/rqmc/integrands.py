"""Test integrands with known means, variances and L^p norms.

Registry identifiers are stable strings; parameters are keyword arguments::

    f = make("smooth-product", d=2, c=1.0)
    f(x)          # x has shape (n, d)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

SURROGATE_DISPLACEMENT = 2.0**-32


@dataclass(frozen=True)
class IntegrandSpec:
    """An integrand on ``[0, 1]^d`` plus what is known about it analytically.

    ``p_star`` is the L^p threshold: ``f`` is in L^p iff ``p < p_star``.
    ``singular_axes`` lists axes with a singularity at ``x_j = 0``; points on
    that locus are evaluated at ``x_j = displacement`` instead.
    """

    name: str
    dimension: int
    func: Callable[[np.ndarray], np.ndarray]
    mean: float | None = None
    variance: float | None = None
    p_norm_pth: Callable[[float], float] | None = None
    p_star: float = math.inf
    in_bvhk: bool = False
    riemann_integrable: bool = False
    singular_axes: tuple[int, ...] = ()
    displacement: float = SURROGATE_DISPLACEMENT
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.in_bvhk and not self.riemann_integrable:
            raise ValueError(f"{self.name}: BVHK functions are Riemann integrable")

    @property
    def in_l2(self) -> bool:
        return self.p_star > 2

    def in_lp(self, p: float) -> bool:
        return p < self.p_star

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def p_norm(self, p: float) -> float:
        """Closed-form ``||f||_p``; ``inf`` when ``f`` is not in L^p."""
        if self.p_norm_pth is None:
            raise ValueError(f"{self.name}: no closed-form L^p norm")
        val = self.p_norm_pth(p)
        return val ** (1.0 / p) if math.isfinite(val) else math.inf


def evaluate(spec: IntegrandSpec, x) -> np.ndarray:
    """``f(x)`` for points of shape ``(n, d)``, with the singular-locus surrogate."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :] if spec.dimension > 1 else x[:, None]
    if x.shape[1] < spec.dimension:
        raise ValueError(f"{spec.name} needs {spec.dimension} coordinates, got {x.shape[1]}")
    if spec.singular_axes:
        x = x.copy()
        for j in spec.singular_axes:
            col = x[:, j]
            col[col == 0.0] = spec.displacement
    return spec.func(x)


def centered_product(d: int = 1) -> IntegrandSpec:
    def pnorm(p):
        return (0.5**p / (p + 1)) ** d

    return IntegrandSpec(
        "centered-product", d, lambda x: np.prod(x[:, :d] - 0.5, axis=1),
        mean=0.0, variance=12.0**-d, p_norm_pth=pnorm,
        in_bvhk=True, riemann_integrable=True, params={"d": d},
    )


def smooth_product(d: int = 2, c: float = 1.0) -> IntegrandSpec:
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")

    def pnorm(p):
        # factors are positive since c <= 1
        one = ((1 + c / 2) ** (p + 1) - (1 - c / 2) ** (p + 1)) / (c * (p + 1))
        return one**d

    return IntegrandSpec(
        "smooth-product", d, lambda x: np.prod(1.0 + c * (x[:, :d] - 0.5), axis=1),
        mean=1.0, variance=(1 + c * c / 12) ** d - 1, p_norm_pth=pnorm,
        in_bvhk=True, riemann_integrable=True, params={"d": d, "c": c},
    )


def simplex_indicator(d: int = 2) -> IntegrandSpec:
    mu = 1.0 / math.factorial(d)
    return IntegrandSpec(
        "simplex-indicator", d, lambda x: (x[:, :d].sum(axis=1) <= 1.0).astype(np.float64),
        mean=mu, variance=mu * (1 - mu), p_norm_pth=lambda p: mu,
        in_bvhk=(d == 1), riemann_integrable=True, params={"d": d},
    )


def kink() -> IntegrandSpec:
    # In BVHK for d=2: the mixed partial is a finite measure on the line x1 + x2 = 1.
    return IntegrandSpec(
        "kink", 2, lambda x: np.maximum(x[:, 0] + x[:, 1] - 1.0, 0.0),
        mean=1 / 6, variance=1 / 12 - 1 / 36, p_norm_pth=lambda p: 1.0 / ((p + 1) * (p + 2)),
        in_bvhk=True, riemann_integrable=True, params={},
    )


def corner_singularity(d: int = 1, alpha: float = 0.6) -> IntegrandSpec:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")

    def pnorm(p):
        return 1.0 / (1.0 - p * alpha) if p * alpha < 1 else math.inf

    var = 1 / (1 - 2 * alpha) - 1 / (1 - alpha) ** 2 if alpha < 0.5 else math.inf
    return IntegrandSpec(
        "corner-singularity", d, lambda x: x[:, 0] ** -alpha,
        mean=1 / (1 - alpha), variance=var, p_norm_pth=pnorm, p_star=1 / alpha,
        in_bvhk=False, riemann_integrable=False, singular_axes=(0,),
        params={"d": d, "alpha": alpha},
    )


def constant(d: int = 1, value: float = 1.0) -> IntegrandSpec:
    return IntegrandSpec(
        "constant", d, lambda x: np.full(x.shape[0], float(value)),
        mean=float(value), variance=0.0, p_norm_pth=lambda p: abs(value) ** p,
        in_bvhk=True, riemann_integrable=True, params={"d": d, "value": value},
    )


def register_builtins() -> dict[str, Callable[..., IntegrandSpec]]:
    return {
        "centered-product": centered_product,
        "smooth-product": smooth_product,
        "simplex-indicator": simplex_indicator,
        "kink": kink,
        "corner-singularity": corner_singularity,
        "constant": constant,
    }


REGISTRY = register_builtins()


class UnknownIntegrandError(KeyError):
    pass


def make(name: str, **params) -> IntegrandSpec:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise UnknownIntegrandError(f"unknown integrand {name!r}; known: {sorted(REGISTRY)}") from None
    return factory(**params)


@dataclass
class NormEstimate:
    value: float
    error: float
    diverged: bool
    converged: bool


def _midpoint_mean(spec: IntegrandSpec, p: float, per_axis: int) -> float:
    g = (np.arange(per_axis) + 0.5) / per_axis
    d = spec.dimension
    total = 0.0
    # sweep the first axis in slabs to bound memory
    rest = np.stack(np.meshgrid(*([g] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1) if d > 1 else None
    for x0 in g:
        if rest is None:
            x = np.array([[x0]])
        else:
            x = np.column_stack([np.full(len(rest), x0), rest])
        total += float(np.sum(np.abs(evaluate(spec, x)) ** p))
    return total / per_axis**d


def numeric_p_norm(spec: IntegrandSpec, p: float, oracle_budget: int = 1 << 20, rtol: float = 1e-2) -> NormEstimate:
    """Tensor-grid midpoint estimate of ``||f||_p`` with an error bar.

    The error bar is the change from the grid with half as many points per
    axis.  ``diverged`` is set when ``p >= p_star``; ``converged`` when the
    error bar is within ``rtol`` of the value.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not spec.in_lp(p):
        return NormEstimate(math.inf, math.inf, True, False)
    per_axis = max(2, int(round(oracle_budget ** (1.0 / spec.dimension))))
    fine = _midpoint_mean(spec, p, per_axis) ** (1.0 / p)
    coarse = _midpoint_mean(spec, p, per_axis // 2) ** (1.0 / p)
    err = abs(fine - coarse)
    return NormEstimate(fine, err, False, err <= rtol * abs(fine) or err < 1e-12)
