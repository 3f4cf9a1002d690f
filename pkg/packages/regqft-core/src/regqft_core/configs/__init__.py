import os
from enum import Enum

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class QuadratureScheme(str, Enum):
    AUTO = "auto"
    TENSOR_GAUSS = "tensor-gauss"
    ADAPTIVE = "adaptive-subdivision"
    QUASI_RANDOM = "quasi-random"


class QuadratureSettings(BaseModel):
    scheme: QuadratureScheme = QuadratureScheme.AUTO
    target_rel_tol: float = Field(default=1e-6, gt=0)
    abs_tol: float = Field(default=0.0, ge=0)
    max_evals: int = Field(default=2_000_000, ge=1)
    seed: int = Field(default=0, ge=0)
    # auto switches from tensor-gauss to quasi-random above this dimension
    tensor_max_dim: int = Field(default=6, ge=1)
    scrambles: int = Field(default=16, ge=2)
    min_nodes: int = Field(default=4, ge=1)
    strict: bool = False


class EngineSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="REGQFT_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
    )
    threads: int = Field(default=0, ge=0)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    product_tensor_max_dim: int = Field(default=8, ge=1)
    max_factors: int = Field(default=6, ge=1)
    order_caps: dict[int, int] = Field(default_factory=lambda: {2: 4, 3: 3, 4: 2})
    ks_cap: int = Field(default=5, ge=1)
    use_kernel_table: bool = True
    table_t_points: int = Field(default=97, ge=8)
    table_r_points: int = Field(default=97, ge=8)
    panel_nodes: int = Field(default=16, ge=4)

    def order_cap(self, dimension: int) -> int:
        return self.order_caps.get(dimension, min(self.order_caps.values()))

    def resolve_threads(self, flag: int | None = None) -> int:
        """Thread count from the CLI flag, else the environment, 0 meaning all cores"""
        requested = self.threads if flag is None else flag
        if requested <= 0:
            return os.cpu_count() or 1
        return requested


__all__ = ["EngineSettings", "QuadratureScheme", "QuadratureSettings"]
