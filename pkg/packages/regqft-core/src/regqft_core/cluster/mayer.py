import math
from typing import Callable, Sequence

import logfire
import numpy as np
from pydantic import BaseModel, Field
from qft_tables import ComplexValue

from ..errors import BudgetExceededError
from ..kernels import FieldConfiguration, PropagatorEvaluator
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..smatrix import InteractionLagrangian, smatrix_order
from ..utils import FloatArray, parallel_map
from .gas import ClusterConfig, Particles, normalized_order
from .graphs import MAX_GRAPH_VERTICES, connected_sum

MAX_MAYER_ORDER = 4


def _check_order(n: int, cap: int = MAX_MAYER_ORDER) -> None:
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if n > cap:
        raise BudgetExceededError(f"order {n} exceeds the cap of {cap}")


def ursell_values(particles: Particles, labels: Sequence[int] | None = None) -> FloatArray:
    """Phi_T over the given particles for a whole batch"""
    labels = list(range(particles.m)) if labels is None else list(labels)
    if len(labels) > MAX_GRAPH_VERTICES:
        raise BudgetExceededError(
            f"Ursell functions stop at {MAX_GRAPH_VERTICES} particles, got {len(labels)}"
        )
    zero = np.zeros(particles.size)
    return connected_sum(labels, particles.edge, zero, zero + 1.0)


def ursell(points: Sequence[tuple[Sequence[float], float]], config: ClusterConfig) -> float:
    """
    Phi_T(x_1, a_1; ...; x_n, a_n) = sum over connected graphs of
    prod_{ij} (e^{-a_i a_j w_s(x_i, x_j)} - 1); one for a single particle.
    """
    if not points:
        raise ValueError("the Ursell function needs at least one particle")
    return float(ursell_values(Particles.from_pairs(config, points))[0])


def _gas_integral(
    config: ClusterConfig, m: int, integrand: Callable[[Particles], FloatArray], label: str
) -> IntegrationResult:
    settings = config.settings
    req = IntegrationRequest.from_settings(
        lambda points: integrand(Particles.from_points(config, points, m)),
        config.particle_box(m),
        settings.quadrature,
        tensor_max_dim=settings.product_tensor_max_dim,
        label=label,
    )
    return integrate(req)


def b_coefficient(n: int, config: ClusterConfig) -> IntegrationResult:
    """B(n) = int prod g|f| Phi_T over n particles; B(1) = |g|_1 |f|_1 exactly"""
    _check_order(n)
    if n == 1:
        return IntegrationResult.exact(config.normalization)
    return _gas_integral(
        config, n, lambda p: p.weight() * ursell_values(p), f"B({n})"
    )


def mayer_coefficient_direct(n: int, config: ClusterConfig) -> IntegrationResult:
    """C~_n = B(n) / (n! |g|_1 |f|_1)"""
    return b_coefficient(n, config).scaled(1.0 / normalized_order(n, config))


def dominating_terms(N: int, config: ClusterConfig, threads: int | None = None) -> list[IntegrationResult]:
    """
    The coefficients of the dominating partition function,
    S~_n = (1/n!) int prod g|f| e^{-U}, for n = 0..N.
    """
    if N < 0:
        raise ValueError(f"order must be >= 0, got {N}")
    _check_order(max(N, 1))

    def term(n: int) -> IntegrationResult:
        if n == 0:
            return IntegrationResult.exact(1.0)
        if n == 1:
            return IntegrationResult.exact(config.normalization)
        labels = list(range(n))
        result = _gas_integral(
            config, n, lambda p: p.weight() * np.exp(-p.energy(labels)), f"S~_{n}"
        )
        return result.scaled(1.0 / math.factorial(n))

    return parallel_map(term, range(N + 1), config.settings.resolve_threads(threads))


class PressureResult(BaseModel):
    coupling: float
    coefficients: list[float]
    errors: list[float]
    value: float
    error_estimate: float = Field(ge=0)


def dominating_pressure(
    N: int, coupling: float, config: ClusterConfig, threads: int | None = None
) -> PressureResult:
    """P~ through order N, sum_n lambda^n C~_n = log S~ / (|g|_1 |f|_1)"""
    _check_order(N)
    results = parallel_map(
        lambda n: mayer_coefficient_direct(n, config),
        range(1, N + 1),
        config.settings.resolve_threads(threads),
    )
    coefficients = [r.value.real for r in results]
    errors = [r.error_estimate for r in results]
    powers = [coupling**n for n in range(1, N + 1)]
    return PressureResult(
        coupling=coupling,
        coefficients=coefficients,
        errors=errors,
        value=math.fsum(c * p for c, p in zip(coefficients, powers)),
        error_estimate=math.fsum(e * abs(p) for e, p in zip(errors, powers)),
    )


class ExpLogRow(BaseModel):
    n: int
    direct: float
    from_log: float
    mismatch: float = Field(ge=0)
    error: float = Field(ge=0)


class ExpLogReport(BaseModel):
    rows: list[ExpLogRow]

    @property
    def max_mismatch(self) -> float:
        return max((row.mismatch for row in self.rows), default=0.0)

    def within(self, factor: float = 5.0) -> bool:
        return all(row.mismatch <= factor * row.error + 1e-12 * abs(row.direct) for row in self.rows)


def exp_log_check(N: int, config: ClusterConfig, threads: int | None = None) -> ExpLogReport:
    """
    Order-by-order comparison of S~ with exp(sum_n lambda^n B(n) / n!). The
    exponential series uses c_n = (1/n) sum_k k b_k c_{n-k}, b_k = B(k) / k!.
    """
    _check_order(N)
    threads = config.settings.resolve_threads(threads)
    direct = dominating_terms(N, config, threads)
    bs = parallel_map(lambda n: b_coefficient(n, config), range(1, N + 1), threads)
    b = [0.0] + [r.value.real / math.factorial(k) for k, r in enumerate(bs, start=1)]
    b_err = [0.0] + [r.error_estimate / math.factorial(k) for k, r in enumerate(bs, start=1)]
    c, c_err = [1.0], [0.0]
    for n in range(1, N + 1):
        c.append(math.fsum(k * b[k] * c[n - k] for k in range(1, n + 1)) / n)
        c_err.append(
            math.fsum(k * (b_err[k] * abs(c[n - k]) + abs(b[k]) * c_err[n - k]) for k in range(1, n + 1))
            / n
        )
    rows = [
        ExpLogRow(
            n=n,
            direct=direct[n].value.real,
            from_log=c[n],
            mismatch=abs(direct[n].value.real - c[n]),
            error=direct[n].error_estimate + c_err[n],
        )
        for n in range(1, N + 1)
    ]
    report = ExpLogReport(rows=rows)
    if not report.within():
        logfire.warning(f"exp/log mismatch {report.max_mismatch:.3e} exceeds five times the error")
    return report


class DominatingRow(BaseModel):
    n: int
    s_n: ComplexValue
    abs_s_n: float = Field(ge=0)
    dominating: float = Field(ge=0)
    error: float = Field(ge=0)
    holds: bool


def dominating_bound_check(
    N: int,
    L: InteractionLagrangian,
    config: ClusterConfig,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
) -> list[DominatingRow]:
    """|S_n(phi)| against |lambda|^n S~_n, order by order"""
    profile = L.components.get(1)
    if L.graded or profile != config.profile or L.smearing != config.smearing:
        raise ValueError("the Lagrangian and the gas must share the profile and the smearing")
    settings = config.settings
    cap = min(settings.order_cap(ev.params.dimension), MAX_MAYER_ORDER)
    if N > cap:
        raise BudgetExceededError(f"order {N} exceeds the cap of {cap}")
    dominating = dominating_terms(N, config)
    rows = []
    for n in range(N + 1):
        s_n = smatrix_order(n, L, ev, phi, settings)
        scale = abs(L.coupling) ** n
        bound = scale * dominating[n].value.real
        error = s_n.error_estimate + scale * dominating[n].error_estimate
        rows.append(
            DominatingRow(
                n=n,
                s_n=s_n.value,
                abs_s_n=abs(s_n.value),
                dominating=bound,
                error=error,
                holds=abs(s_n.value) <= bound + error,
            )
        )
    return rows
