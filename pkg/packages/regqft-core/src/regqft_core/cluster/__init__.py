from .gas import ClusterConfig, ConstantPotential, PairPotential, Particles, PropagatorPotential
from .graphs import (
    LabeledGraph,
    PartitionIdentity,
    all_graphs,
    connected_graphs,
    partition_identity,
    set_partitions,
)
from .kirkwood_salsburg import KSRecursion, ks_evaluate, mayer_from_ks
from .mayer import (
    DominatingRow,
    ExpLogReport,
    ExpLogRow,
    PressureResult,
    b_coefficient,
    dominating_bound_check,
    dominating_pressure,
    dominating_terms,
    exp_log_check,
    mayer_coefficient_direct,
    ursell,
    ursell_values,
)
from .ruelle import (
    AdiabaticTrend,
    KRecursionReport,
    KRecursionRow,
    RuelleConstants,
    adiabatic_trend,
    convergence_radius,
    k_closed_form,
    k_recursion_check,
    penrose_bound,
    ruelle_constants,
)

__all__ = [
    "AdiabaticTrend",
    "ClusterConfig",
    "ConstantPotential",
    "DominatingRow",
    "ExpLogReport",
    "ExpLogRow",
    "KRecursionReport",
    "KRecursionRow",
    "KSRecursion",
    "LabeledGraph",
    "PairPotential",
    "Particles",
    "PartitionIdentity",
    "PressureResult",
    "PropagatorPotential",
    "RuelleConstants",
    "adiabatic_trend",
    "all_graphs",
    "b_coefficient",
    "connected_graphs",
    "convergence_radius",
    "dominating_bound_check",
    "dominating_pressure",
    "dominating_terms",
    "exp_log_check",
    "k_closed_form",
    "k_recursion_check",
    "ks_evaluate",
    "mayer_coefficient_direct",
    "mayer_from_ks",
    "partition_identity",
    "penrose_bound",
    "ruelle_constants",
    "set_partitions",
    "ursell",
    "ursell_values",
]
