from .configs import EngineSettings, QuadratureScheme, QuadratureSettings
from .data import ChargeProfile, CutoffSpec, ModelParams, SpacetimeTestFunction, VertexFactor
from .errors import RegQFTError
from .kernels import FieldConfiguration, PropagatorEvaluator
from .quadrature import IntegrationRequest, IntegrationResult, integrate
from .smatrix import InteractionLagrangian, smatrix_order, smatrix_truncated

__all__ = [
    "ChargeProfile",
    "CutoffSpec",
    "EngineSettings",
    "FieldConfiguration",
    "IntegrationRequest",
    "IntegrationResult",
    "InteractionLagrangian",
    "ModelParams",
    "PropagatorEvaluator",
    "QuadratureScheme",
    "QuadratureSettings",
    "RegQFTError",
    "SpacetimeTestFunction",
    "VertexFactor",
    "integrate",
    "smatrix_order",
    "smatrix_truncated",
]
