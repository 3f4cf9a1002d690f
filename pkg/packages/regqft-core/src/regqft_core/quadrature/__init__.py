from .integrate import (
    Integrand,
    IntegrationRequest,
    IntegrationResult,
    acceptance_criterion,
    integrate,
    resolve_scheme,
    tensor_points,
)

__all__ = [
    "Integrand",
    "IntegrationRequest",
    "IntegrationResult",
    "acceptance_criterion",
    "integrate",
    "resolve_scheme",
    "tensor_points",
]
