from ..kernels import PairKernel
from .products import (
    INNER_BLOCK,
    KIND_KERNEL,
    PairChoice,
    PairKernelAssignment,
    ProductIntegrand,
    ProductKind,
    charge_integrated_product,
    nfold_mixed_product,
    nfold_product,
    product_bound,
    run_product,
    vertex_eval,
)
from .weyl import (
    axis_correlation,
    correlation,
    correlation_box,
    linear_functional,
    pairing_momentum_space,
    pairing_position_space,
    weyl_product_closed_form,
    weyl_star_series,
)

__all__ = [
    "KIND_KERNEL",
    "PairChoice",
    "PairKernel",
    "PairKernelAssignment",
    "ProductIntegrand",
    "ProductKind",
    "INNER_BLOCK",
    "axis_correlation",
    "charge_integrated_product",
    "correlation",
    "correlation_box",
    "linear_functional",
    "nfold_mixed_product",
    "nfold_product",
    "pairing_momentum_space",
    "pairing_position_space",
    "product_bound",
    "run_product",
    "vertex_eval",
    "weyl_product_closed_form",
    "weyl_star_series",
]
