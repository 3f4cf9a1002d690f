import json
import math
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, model_validator
from typing_extensions import Self


class BasisCoefficients(BaseModel):
    """Coefficients on the divergence basis {1, log(1/L2), 1/L2, 1/L2^2}"""

    const: float = 0.0
    log: float = 0.0
    inv: float = 0.0
    inv2: float = 0.0

    def evaluate(self, lambda2: float) -> float:
        return (
            self.const
            + self.log * math.log(1.0 / lambda2)
            + self.inv / lambda2
            + self.inv2 / lambda2**2
        )


class CountertermEntry(BaseModel):
    """A single table cell: a plain number or a divergence-basis expansion"""

    value: float | None = None
    basis: BasisCoefficients | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> Self:
        if (self.value is None) == (self.basis is None):
            raise ValueError("entry needs exactly one of 'value' or 'basis'")
        return self

    @classmethod
    def zero(cls) -> "CountertermEntry":
        return cls(value=0.0)

    def evaluate(self, lambda2: float) -> float:
        if self.basis is not None:
            return self.basis.evaluate(lambda2)
        assert self.value is not None
        return self.value


class CountertermRow(BaseModel):
    order: int = Field(ge=1)
    dZ: CountertermEntry = Field(default_factory=CountertermEntry.zero)
    dM: CountertermEntry = Field(default_factory=CountertermEntry.zero)
    dLambda: CountertermEntry = Field(default_factory=CountertermEntry.zero)
    dC: CountertermEntry = Field(default_factory=CountertermEntry.zero)


class TableMetadata(BaseModel):
    scheme: str = "BPHZ"
    mass: float = Field(default=1.0, gt=0)
    reference_lambda2: list[float] = Field(default_factory=list)
    validity: tuple[float, float] = (1e-6, 1e6)
    synthetic: bool = False
    note: str | None = Field(default_factory=lambda: None)

    @model_validator(mode="after")
    def _ordered_range(self) -> Self:
        low, high = self.validity
        if not 0 < low <= high:
            raise ValueError(f"validity range {self.validity} must satisfy 0 < low <= high")
        return self


class CountertermTable(BaseModel):
    """
    Perturbative counterterm columns (dZ, dM, dLambda, dC) indexed by order
    """

    metadata: TableMetadata = Field(default_factory=TableMetadata)
    rows: list[CountertermRow] = Field(default_factory=list)

    @model_validator(mode="after")
    def _contiguous_orders(self) -> Self:
        orders = [row.order for row in self.rows]
        if orders != list(range(1, len(orders) + 1)):
            raise ValueError(f"row orders must be contiguous from 1, got {orders}")
        return self

    @property
    def max_order(self) -> int:
        return len(self.rows)

    def in_validity_range(self, lambda2: float) -> bool:
        low, high = self.metadata.validity
        return low <= lambda2 <= high

    @classmethod
    def zeros(cls, max_order: int, mass: float = 1.0) -> "CountertermTable":
        return cls(
            metadata=TableMetadata(mass=mass, scheme="zero"),
            rows=[CountertermRow(order=k) for k in range(1, max_order + 1)],
        )

    @classmethod
    def from_document(cls, document: Any) -> "CountertermTable":
        """Accept either a bare array of rows or an object with metadata and rows"""
        if isinstance(document, list):
            return cls.model_validate({"rows": document})
        return cls.model_validate(document)

    @classmethod
    def load(cls, path: Path | str) -> "CountertermTable":
        path = Path(path)
        with open(path, "r") as f:
            text = f.read()
        if path.suffix in (".yaml", ".yml"):
            return cls.from_document(yaml.safe_load(text))
        return cls.from_document(json.loads(text))

    def save(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            f.write(self.model_dump_json(indent=2, exclude_none=True))
