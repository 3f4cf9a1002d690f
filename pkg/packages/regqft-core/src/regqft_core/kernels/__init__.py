from .cutoff import chi, chi_hat, chi_hat_direct, chi_hat_table, momentum_cutoff
from .fields import (
    ConstantTerm,
    FieldConfiguration,
    FieldTerm,
    GaussianTerm,
    PlaneWaveTerm,
    SmearedTerm,
    smear_field,
)
from .propagators import (
    PairKernel,
    PropagatorEvaluator,
    TabulatedKernel,
    coincidence_W,
    combine_kind,
    delta_feynman,
    delta_plus,
    delta_plus_cartesian,
    delta_plus_with_error,
)

__all__ = [
    "ConstantTerm",
    "FieldConfiguration",
    "FieldTerm",
    "GaussianTerm",
    "PairKernel",
    "PlaneWaveTerm",
    "PropagatorEvaluator",
    "SmearedTerm",
    "TabulatedKernel",
    "chi",
    "chi_hat",
    "chi_hat_direct",
    "chi_hat_table",
    "coincidence_W",
    "combine_kind",
    "delta_feynman",
    "delta_plus",
    "delta_plus_cartesian",
    "delta_plus_with_error",
    "momentum_cutoff",
    "smear_field",
]
