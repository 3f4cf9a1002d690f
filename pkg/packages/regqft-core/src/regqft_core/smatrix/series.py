import math
from collections import Counter
from itertools import combinations_with_replacement

import logfire
from pydantic import BaseModel, Field
from qft_tables import ComplexValue
from scipy.special import gammainc

from ..configs import EngineSettings
from ..errors import BudgetExceededError
from ..kernels import FieldConfiguration, PairKernel, PropagatorEvaluator
from ..quadrature import IntegrationResult
from ..utils import parallel_map
from ..vertex import PairKernelAssignment, ProductIntegrand, run_product
from .lagrangian import CombinedDensity, InteractionLagrangian, amplitude_bound


class OrderTerm(BaseModel):
    n: int = Field(ge=0)
    value: ComplexValue
    quad_error: float = Field(ge=0)
    converged: bool
    tail_bound_at_n: float = Field(ge=0)


class SeriesResult(BaseModel):
    orders: list[OrderTerm]
    partial: ComplexValue
    quad_error: float = Field(ge=0)
    a_bound: float = Field(ge=0)
    g_l1: float = Field(ge=0)
    tail_bound: float = Field(ge=0)
    envelope: float = Field(ge=0)
    within_bound: bool

    @property
    def tail_bounds(self) -> list[float]:
        return [term.tail_bound_at_n for term in self.orders]


def exponential_tail(N: int, x: float) -> float:
    """sum_{n > N} x^n / n! = e^x P(N + 1, x), free of cancellation"""
    if x <= 0:
        return 0.0
    return math.exp(x) * float(gammainc(N + 1, x))


def order_coefficient(n: int) -> complex:
    return 1j**n / math.factorial(n)


def _check_order(n: int, ev: PropagatorEvaluator, settings: EngineSettings) -> None:
    if n < 0:
        raise ValueError(f"order must be >= 0, got {n}")
    cap = settings.order_cap(ev.params.dimension)
    if n > cap:
        raise BudgetExceededError(
            f"order {n} exceeds the cap of {cap} in d = {ev.params.dimension}"
        )


def time_ordered_term(
    densities: list[CombinedDensity],
    L: InteractionLagrangian,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings,
    coefficient: complex,
    label: str,
) -> IntegrationResult:
    """coefficient * T(L_1 ... L_p) as one p(d + 1)-dimensional quadrature"""
    p = len(densities)
    if any(density.is_zero for density in densities):
        return IntegrationResult.exact(0.0)
    integrand = ProductIntegrand(
        list(densities),
        [L.smearing] * p,
        [(coefficient, PairKernelAssignment.uniform(p, PairKernel.FEYNMAN))],
        ev,
        phi,
    )
    return run_product(integrand, settings, label)


def smatrix_order(
    n: int,
    L: InteractionLagrangian,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """
    S_n = (i^n / n!) int prod_k f_eff(a_k, x_k) g(x_k) e^{i a_k phi(x_k)}
          exp(-sum_{k<l} a_k a_l Delta_F(x_k - x_l)),
    one fused quadrature over positions and charges.
    """
    settings = settings or ev.settings
    _check_order(n, ev, settings)
    if n == 0:
        return IntegrationResult.exact(1.0)
    density = L.effective_density()
    return time_ordered_term(
        [density] * n, L, ev, phi, settings, order_coefficient(n), f"S_{n}"
    )


def _grade_multisets(n: int, p: int, grades: list[int]) -> list[tuple[int, ...]]:
    return [combo for combo in combinations_with_replacement(grades, p) if sum(combo) == n]


def smatrix_lambda_order(
    n: int,
    L: InteractionLagrangian,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """
    Coefficient of lambda^n for a graded Lagrangian,

        S_n = sum_p sum_{J in grades^p, |J| = n} (i^p / p!) T(L_{J_1} ... L_{J_p}),

    where orderings of the same multiset of grades give equal products and
    are folded into a multinomial count.
    """
    settings = settings or ev.settings
    if n < 0:
        raise ValueError(f"order must be >= 0, got {n}")
    if n == 0:
        return IntegrationResult.exact(1.0)
    grades = L.grades
    total = IntegrationResult.exact(0.0)
    for p in range(1, n // min(grades) + 1):
        _check_order(p, ev, settings)
        for combo in _grade_multisets(n, p, grades):
            counts = Counter(combo)
            orderings = math.factorial(p) // math.prod(math.factorial(c) for c in counts.values())
            densities = [L.component_density(k) for k in combo]
            term = time_ordered_term(
                densities,
                L,
                ev,
                phi,
                settings,
                orderings * order_coefficient(p),
                f"S_{n} grades {combo}",
            )
            total = total.plus(term)
    return total


def smatrix_truncated(
    N: int,
    L: InteractionLagrangian,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
    threads: int | None = None,
) -> SeriesResult:
    """Partial sum through order N with the analytic tail bound"""
    if not ev.regularized:
        raise ValueError("the truncated S-matrix needs Lambda > 0")
    settings = settings or ev.settings
    _check_order(N, ev, settings)
    with logfire.span(f"smatrix_truncated N={N}"):
        a_bound = amplitude_bound(L, ev, settings)
        g_l1 = L.smearing.l1_norm
        x = a_bound * g_l1
        results = parallel_map(
            lambda n: smatrix_order(n, L, ev, phi, settings),
            range(N + 1),
            settings.resolve_threads(threads),
        )
        orders = [
            OrderTerm(
                n=n,
                value=res.value,
                quad_error=res.error_estimate,
                converged=res.converged,
                tail_bound_at_n=exponential_tail(n, x),
            )
            for n, res in enumerate(results)
        ]
        partial = complex(sum(term.value for term in orders))
        quad_error = sum(term.quad_error for term in orders)
        envelope = math.exp(x)
        within = abs(partial) <= envelope + quad_error
        if not within:
            logfire.warning(
                f"|partial sum| {abs(partial):.6e} exceeds exp(A |g|_1) = {envelope:.6e}"
            )
        return SeriesResult(
            orders=orders,
            partial=partial,
            quad_error=quad_error,
            a_bound=a_bound,
            g_l1=g_l1,
            tail_bound=exponential_tail(N, x),
            envelope=envelope,
            within_bound=within,
        )
