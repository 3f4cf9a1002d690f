from .counterterms3d import (
    CountertermSet3D,
    MassCounterterm,
    TwoLegReport,
    TwoLegRow,
    c_constant,
    compute_counterterms_3d,
    delta_m,
    sunset_integral,
    triangle_integral,
    two_leg_stabilization,
)
from .phi43 import (
    LimitCheckReport,
    LimitPoint,
    build_renormalized_lagrangian,
    corollary_path,
    limit_check_order_n,
    limit_deviation,
    limit_lagrangian_eval,
    limit_vertices,
)
from .phi44 import (
    ScheduleElement,
    ScheduleReport,
    ScheduleRow,
    TildeConstants,
    TruncatedCounterterms,
    build_lagrangian_4d,
    polynomial_vertex_4d,
    requires_counterterm,
    rescaled_field,
    schedule_report,
    scheduled_sequence,
    tilde_constants,
    truncate_table,
)
from .regulator import (
    CHARGE_REACH,
    GaussianRegulator,
    RegulatedProfile,
    gaussian_density,
    gaussian_fourier,
    potential_profile,
    regulated_transform,
)
from .wick import (
    VertexSpec,
    WickIntegrand,
    contraction_patterns,
    pattern_multiplicity,
    polynomial_tproduct_oracle,
)

__all__ = [
    "CHARGE_REACH",
    "CountertermSet3D",
    "GaussianRegulator",
    "LimitCheckReport",
    "LimitPoint",
    "MassCounterterm",
    "RegulatedProfile",
    "ScheduleElement",
    "ScheduleReport",
    "ScheduleRow",
    "TildeConstants",
    "TruncatedCounterterms",
    "TwoLegReport",
    "TwoLegRow",
    "VertexSpec",
    "WickIntegrand",
    "build_lagrangian_4d",
    "build_renormalized_lagrangian",
    "c_constant",
    "compute_counterterms_3d",
    "contraction_patterns",
    "corollary_path",
    "delta_m",
    "gaussian_density",
    "gaussian_fourier",
    "limit_check_order_n",
    "limit_deviation",
    "limit_lagrangian_eval",
    "limit_vertices",
    "pattern_multiplicity",
    "polynomial_tproduct_oracle",
    "polynomial_vertex_4d",
    "potential_profile",
    "regulated_transform",
    "requires_counterterm",
    "rescaled_field",
    "schedule_report",
    "scheduled_sequence",
    "sunset_integral",
    "tilde_constants",
    "triangle_integral",
    "truncate_table",
    "two_leg_stabilization",
]
