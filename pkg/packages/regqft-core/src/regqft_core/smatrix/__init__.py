from .lagrangian import (
    CombinedDensity,
    InteractionLagrangian,
    amplitude_bound,
    density_integral,
    lagrangian_eval,
)
from .series import (
    OrderTerm,
    SeriesResult,
    exponential_tail,
    order_coefficient,
    smatrix_lambda_order,
    smatrix_order,
    smatrix_truncated,
    time_ordered_term,
)
from .unitarity import split_coefficient, unitarity_defect

__all__ = [
    "CombinedDensity",
    "InteractionLagrangian",
    "OrderTerm",
    "SeriesResult",
    "amplitude_bound",
    "density_integral",
    "exponential_tail",
    "lagrangian_eval",
    "order_coefficient",
    "smatrix_lambda_order",
    "smatrix_order",
    "smatrix_truncated",
    "split_coefficient",
    "time_ordered_term",
    "unitarity_defect",
]
