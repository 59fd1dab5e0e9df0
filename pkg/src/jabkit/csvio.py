"""CSV ingestion: numeric matrices with a designated response column."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .core import Dataset, validate_dataset
from .errors import ConfigInvalid, NonFiniteValue, ParseError


def load_csv(path: str | Path, response_selector: str | int) -> Dataset:
    """Load a numeric CSV with a header row into a Dataset.

    ``response_selector`` picks the response column, by header name
    (case-sensitive) or by 0-based position; it is removed from the feature
    matrix. Every remaining cell must parse as a finite number.

    Raises
    ------
    ParseError
        Naming the offending row and column on the first non-numeric cell,
        a missing header, a ragged row, or an unknown response column.
    NonFiniteValue
        If a cell parses to NaN or infinity (e.g. a literal "nan").
    """
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty, expected a header row") from None
        header = [h.strip() for h in header]
        response_idx = _resolve_column(header, response_selector, path)
        rows: list[list[float]] = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(
                    f"{path}: row {line_no} has {len(raw)} cells, header has {len(header)}"
                )
            parsed = []
            for col_idx, cell in enumerate(raw):
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {line_no}, column '{header[col_idx]}': "
                        f"cannot parse {cell.strip()!r} as a number"
                    ) from None
                if not math.isfinite(value):
                    raise NonFiniteValue(
                        f"{path}: row {line_no}, column '{header[col_idx]}' is non-finite"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows after the header")
    table = np.asarray(rows, dtype=np.float64)
    y = table[:, response_idx]
    x = np.delete(table, response_idx, axis=1)
    return validate_dataset(x, y)


def feature_names(path: str | Path, response_selector: str | int) -> list[str]:
    """Header names of the feature columns, in matrix column order."""
    path = Path(path)
    with path.open(newline="") as handle:
        header = [h.strip() for h in next(csv.reader(handle))]
    response_idx = _resolve_column(header, response_selector, path)
    return [h for i, h in enumerate(header) if i != response_idx]


def _resolve_column(header: list[str], selector: str | int, path: Path) -> int:
    if isinstance(selector, int):
        if not (-len(header) <= selector < len(header)):
            raise ConfigInvalid(f"{path}: response column index {selector} out of range")
        return selector % len(header)
    if selector in header:
        return header.index(selector)
    raise ParseError(f"{path}: no column named {selector!r} in header {header}")
