import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
from fastapi import HTTPException
from pydantic import BaseModel, ValidationError

from kriging.errors import DimensionMismatchError, NumericalError


def format_float(value: float) -> str:
    """17 significant digits: enough for a bit-exact IEEE round trip."""
    return f"{float(value):.17g}"


def _to_plain(obj):
    if isinstance(obj, BaseModel):
        return obj.model_dump(exclude_none=True)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def serialize(obj) -> str:
    """Stable JSON text for pydantic models and plain data (sorted keys, NaN kept as NaN)."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_to_plain)


def parse_point(text: str) -> List[float]:
    """'0.5' or '0.5,1.0' -> [0.5] / [0.5, 1.0]."""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ValueError(f"Invalid point '{text}': {e}") from None


def as_point(x, dim: int) -> np.ndarray:
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.shape != (dim,):
        raise DimensionMismatchError(f"expected a point of dimension {dim}, got {point.shape[0]}")
    return point


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV with a header; floats use format_float, ints are printed as-is."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [v if isinstance(v, (int, np.integer)) and not isinstance(v, bool) else format_float(v)
                 for v in row]
            )


def read_rows(path) -> tuple:
    """Return (header, rows) with every cell left as text."""
    with Path(path).open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty CSV")
        return header, [row for row in reader if row]


def http_error(exc: Exception) -> HTTPException:
    """Map engine exceptions to HTTP errors: bad input 400/422, numerical failure 500."""
    if isinstance(exc, ValidationError):
        return HTTPException(status_code=422, detail=exc.errors(include_url=False, include_context=False, include_input=False))
    if isinstance(exc, NumericalError):
        return HTTPException(status_code=500, detail=f"Numerical failure: {exc}")
    return HTTPException(status_code=400, detail=str(exc))


def finite_or_none(record: dict) -> dict:
    """NaN/inf floats become None so the record is valid JSON."""
    return {k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in record.items()}
