import math

import logfire

from ..configs import EngineSettings
from ..errors import BudgetExceededError
from ..kernels import FieldConfiguration, PropagatorEvaluator
from ..quadrature import IntegrationResult
from ..vertex import PairKernelAssignment, ProductIntegrand, run_product
from .lagrangian import InteractionLagrangian

MAX_UNITARITY_ORDER = 3


def split_coefficient(k: int, n: int) -> complex:
    """(-i)^k / k! from the conjugated factor times i^n / n! from the other"""
    return (-1j) ** k * 1j**n / (math.factorial(k) * math.factorial(n))


def unitarity_defect(
    m: int,
    L: InteractionLagrangian,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """
    Order-m coefficient of S* star S - 1, i.e. sum_{k + n = m} (S_k)* star S_n.

    Conjugating S_k and flipping every charge maps a Hermitian profile onto
    itself, so each split is the same fused integrand with the kernels of
    `PairKernelAssignment.blocks(k, n)`. All splits share one quadrature.
    """
    if m < 1:
        raise ValueError(f"the unitarity defect starts at order 1, got {m}")
    if m > MAX_UNITARITY_ORDER:
        raise BudgetExceededError(
            f"unitarity order {m} exceeds the cap of {MAX_UNITARITY_ORDER}"
        )
    if not ev.regularized:
        raise ValueError("the unitarity check needs Lambda > 0")
    settings = settings or ev.settings
    density = L.effective_density()
    if density.is_zero:
        return IntegrationResult.exact(0.0)
    terms = [(split_coefficient(k, m - k), PairKernelAssignment.blocks(k, m - k)) for k in range(m + 1)]
    integrand = ProductIntegrand([density] * m, [L.smearing] * m, terms, ev, phi)
    result = run_product(integrand, settings, f"unitarity defect m={m}")
    logfire.debug(f"unitarity defect at order {m}: {abs(result.value):.3e} +- {result.error_estimate:.1e}")
    return result
