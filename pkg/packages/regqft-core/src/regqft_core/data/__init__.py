from .primitives import (
    ChargeDensity,
    ChargeProfile,
    CutoffSpec,
    ModelParams,
    SpacetimeTestFunction,
    VertexFactor,
)

__all__ = [
    "ChargeDensity",
    "ChargeProfile",
    "CutoffSpec",
    "ModelParams",
    "SpacetimeTestFunction",
    "VertexFactor",
]
