from pathlib import Path
from typing import Annotated, Any, Sequence

import polars as pl
from pydantic import BaseModel, Field, PlainSerializer, PlainValidator


def parse_complex(value: Any) -> complex:
    """Read a complex number from {"re", "im"}, a bare number or a complex"""
    if isinstance(value, complex):
        return value
    if isinstance(value, bool):
        raise ValueError(f"cannot read a complex number from {value!r}")
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, dict) and set(value) == {"re", "im"}:
        return complex(float(value["re"]), float(value["im"]))
    raise ValueError(f"cannot read a complex number from {value!r}")


def dump_complex(value: complex) -> dict[str, float]:
    return {"re": float(value.real), "im": float(value.imag)}


ComplexValue = Annotated[
    complex,
    PlainValidator(parse_complex),
    PlainSerializer(dump_complex, return_type=dict[str, float]),
]


class PropagatorRow(BaseModel):
    t: float
    x: list[float]
    re: float
    im: float
    error: float = Field(ge=0)

    def flat(self) -> dict[str, float]:
        row: dict[str, float] = {"t": self.t}
        for i, xi in enumerate(self.x, start=1):
            row[f"x{i}"] = xi
        row.update({"re": self.re, "im": self.im, "error": self.error})
        return row


class SeriesRow(BaseModel):
    n: int = Field(ge=0)
    re: float
    im: float
    quad_error: float = Field(ge=0)
    tail_bound_at_n: float = Field(ge=0)
    converged: bool = True


class RunReport(BaseModel):
    """Envelope for every JSON report the CLI emits"""

    command: str
    seed: int
    payload: dict[str, Any] = Field(default_factory=dict)


def write_csv_rows(rows: Sequence[BaseModel | dict[str, Any]], path: Path | str) -> Path:
    """Write records as a CSV table, one row per record, in the given order"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = [row if isinstance(row, dict) else row.model_dump() for row in rows]
    pl.DataFrame(records).write_csv(path)
    return path


def write_json_report(report: BaseModel, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(report.model_dump_json(indent=2))
        f.write("\n")
    return path
