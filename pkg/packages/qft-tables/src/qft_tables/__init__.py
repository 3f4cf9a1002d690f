from .counterterms import (
    BasisCoefficients,
    CountertermEntry,
    CountertermRow,
    CountertermTable,
    TableMetadata,
)
from .records import (
    ComplexValue,
    PropagatorRow,
    RunReport,
    SeriesRow,
    dump_complex,
    parse_complex,
    write_csv_rows,
    write_json_report,
)

__all__ = [
    "BasisCoefficients",
    "CountertermEntry",
    "CountertermRow",
    "CountertermTable",
    "TableMetadata",
    "ComplexValue",
    "PropagatorRow",
    "RunReport",
    "SeriesRow",
    "dump_complex",
    "parse_complex",
    "write_csv_rows",
    "write_json_report",
]
