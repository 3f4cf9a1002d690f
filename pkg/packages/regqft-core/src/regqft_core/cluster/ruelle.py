import math

import logfire
import numpy as np
from pydantic import BaseModel, Field

from ..errors import DivergentGasError
from ..quadrature import tensor_points
from .gas import ClusterConfig

A_GRID_POINTS = 41
X_GRID_POINTS = 9


class RuelleConstants(BaseModel):
    """
    E = sup_{a, x} int |e^{-a b w_s(x, y)} - 1| g(y)|f(b)| dy db, by grid search,
    and B = A^2 W / 2
    """

    A: float = Field(ge=0)
    W: float
    E: float = Field(ge=0)
    B: float
    E_error: float = Field(default=0.0, ge=0)
    argmax_charge: float | None = None
    argmax_point: list[float] | None = None

    @classmethod
    def from_values(cls, E: float, B: float) -> "RuelleConstants":
        """Constants given directly, for bounds that need no gas"""
        return cls(A=0.0, W=0.0, E=E, B=B)


def _inner_integrals(
    config: ClusterConfig, x_grid: np.ndarray, a_grid: np.ndarray, rule_nodes: int
) -> np.ndarray:
    """(len(x_grid), len(a_grid)) table of the E integrand integrated over (y, b)"""
    d = config.dimension
    nodes, weights = tensor_points([*config.smearing.box, (-config.A, config.A)], rule_nodes)
    y, b = nodes[:, :d], nodes[:, d]
    measure = weights * config.smearing(y) * np.abs(config.profile(b))
    keep = measure != 0
    y, b, measure = y[keep], b[keep], measure[keep]
    table = np.empty((x_grid.shape[0], a_grid.shape[0]))
    for k, x in enumerate(x_grid):
        dt = x[0] - y[:, 0]
        r = np.linalg.norm(x[None, 1:] - y[:, 1:], axis=1)
        w = np.asarray(config.potential(dt, r), dtype=np.float64)
        exponent = -a_grid[:, None] * (b * w)[None, :]
        table[k] = np.abs(np.expm1(exponent)) @ measure
    return table


def ruelle_constants(
    config: ClusterConfig,
    a_points: int = A_GRID_POINTS,
    x_points: int = X_GRID_POINTS,
    rule_nodes: int = 12,
) -> RuelleConstants:
    """
    E by a sup over a charge grid on [-A, A] and an x_points^d grid on supp g,
    each inner integral on a tensor Gauss rule; the error is the change from
    a rule with four fewer nodes per axis.
    """
    A = config.A
    W = config.potential.coincidence
    B = A * A * W / 2.0
    if config.profile.is_zero:
        return RuelleConstants(A=A, W=W, E=0.0, B=B)
    axes = [np.linspace(low, high, x_points) for low, high in config.smearing.box]
    x_grid = np.stack([grid.ravel() for grid in np.meshgrid(*axes, indexing="ij")], axis=1)
    a_grid = np.linspace(-A, A, a_points)
    with logfire.span(f"Ruelle constant E on {a_points} x {x_grid.shape[0]} grid"):
        fine = _inner_integrals(config, x_grid, a_grid, rule_nodes)
        coarse = _inner_integrals(config, x_grid, a_grid, max(rule_nodes - 4, 2))
    k, j = np.unravel_index(int(np.argmax(fine)), fine.shape)
    E = float(fine[k, j])
    return RuelleConstants(
        A=A,
        W=W,
        E=E,
        B=B,
        E_error=float(np.max(np.abs(fine - coarse))),
        argmax_charge=float(a_grid[j]),
        argmax_point=x_grid[k].tolist(),
    )


def penrose_bound(n: int, rc: RuelleConstants) -> float:
    """
    |C~_n| <= e^{2B(n-2)} n^{n-2} E^{n-1} / n! for n >= 2; C~_1 = 1 is its own
    bound.
    """
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if n == 1:
        return 1.0
    return math.exp(2.0 * rc.B * (n - 2)) * n ** (n - 2) * rc.E ** (n - 1) / math.factorial(n)


def k_closed_form(n: int, l: int, rc: RuelleConstants) -> float:
    """K_{n,l} = e^{2B(n+l-1)} n (n+l)^{l-1} E^l / l!, with K_{0,l} = delta_{0l}"""
    if n < 0 or l < 0:
        raise ValueError(f"K needs n, l >= 0, got ({n}, {l})")
    if n == 0:
        return 1.0 if l == 0 else 0.0
    return math.exp(2.0 * rc.B * (n + l - 1)) * n * float(n + l) ** (l - 1) * rc.E**l / math.factorial(l)


class KRecursionRow(BaseModel):
    n: int
    l: int
    closed_form: float
    recursion: float
    rel_diff: float = Field(ge=0)


class KRecursionReport(BaseModel):
    rows: list[KRecursionRow]

    @property
    def max_rel_diff(self) -> float:
        return max((row.rel_diff for row in self.rows), default=0.0)


def k_recursion_check(max_total: int, rc: RuelleConstants) -> KRecursionReport:
    """
    The closed form against K_{n,l} = e^{2B} sum_{s<=l} E^s / s! K_{n-1+s, l-s}
    on 1 <= n, n + l <= max_total, the base K_{1,0} = 1 excluded
    """
    if max_total < 1:
        raise ValueError(f"max_total must be >= 1, got {max_total}")
    rows = []
    for total in range(2, max_total + 1):
        for n in range(1, total + 1):
            l = total - n
            recursion = math.exp(2.0 * rc.B) * math.fsum(
                rc.E**s / math.factorial(s) * k_closed_form(n - 1 + s, l - s, rc)
                for s in range(l + 1)
            )
            closed = k_closed_form(n, l, rc)
            scale = max(abs(closed), abs(recursion), 1e-300)
            rows.append(
                KRecursionRow(
                    n=n,
                    l=l,
                    closed_form=closed,
                    recursion=recursion,
                    rel_diff=abs(closed - recursion) / scale,
                )
            )
    return KRecursionReport(rows=rows)


def convergence_radius(rc: RuelleConstants, strict: bool = False) -> float:
    """
    1 / (e^{2B-1} E). A gas with E = 0 is the divergent-gas case: the bound
    gives no finite radius, so the result is the inf sentinel, or
    DivergentGasError (carrying the same sentinel) when `strict`.
    """
    if rc.E == 0:
        if strict:
            raise DivergentGasError("E = 0: the Mayer series has no finite radius bound")
        logfire.info("E = 0: the Mayer series has no finite radius bound")
        return math.inf
    return 1.0 / (math.exp(2.0 * rc.B - 1.0) * rc.E)


class AdiabaticTrend(BaseModel):
    factor: float
    E_before: float
    E_after: float
    relative_change: float = Field(ge=0)


def adiabatic_trend(config: ClusterConfig, factor: float = 2.0, rule_nodes: int = 12) -> AdiabaticTrend:
    """E before and after stretching the spatial support of g by `factor`"""
    if factor <= 0:
        raise ValueError(f"stretch factor must be positive, got {factor}")
    before = ruelle_constants(config, rule_nodes=rule_nodes)
    after = ruelle_constants(config.with_smearing(config.smearing.rescaled(factor)), rule_nodes=rule_nodes)
    change = abs(after.E - before.E) / before.E if before.E > 0 else 0.0
    return AdiabaticTrend(
        factor=factor, E_before=before.E, E_after=after.E, relative_change=change
    )
