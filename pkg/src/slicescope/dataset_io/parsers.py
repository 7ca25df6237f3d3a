"""CSV loading for dataset bundles."""

from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, model_validator

from slicescope.dataset_io import DatasetBundle, EmbeddingSet, LossVector, OutcomeVector
from slicescope.dataset_io.validation import ArrayValidator
from slicescope.errors import InputError

PACKED_DELIMITER = ";"

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


class CsvSchema(BaseModel):
    """Column mapping for a CSV input.

    Embeddings are either wide (``embedding_columns`` or every column starting
    with ``embedding_prefix``) or packed into one semicolon-delimited column.
    """

    loss_column: str = "loss"
    id_column: Optional[str] = None
    correct_column: Optional[str] = None
    slice_label_column: Optional[str] = None
    embedding_columns: Optional[List[str]] = None
    embedding_prefix: Optional[str] = None
    packed_embedding_column: Optional[str] = None

    @model_validator(mode="after")
    def one_embedding_layout(self) -> "CsvSchema":
        layouts = [self.embedding_columns, self.embedding_prefix, self.packed_embedding_column]
        if sum(v is not None for v in layouts) != 1:
            raise ValueError(
                "exactly one of embedding_columns, embedding_prefix, packed_embedding_column is required"
            )
        return self


def _read_frame(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"missing file: {path}")
    except pd.errors.EmptyDataError:
        raise InputError(f"empty file: {path}")
    except UnicodeDecodeError as e:
        raise InputError(f"file is not UTF-8: {path} ({e})")


def _require(frame: pd.DataFrame, column: str) -> pd.Series:
    if column not in frame.columns:
        raise InputError("missing column", column=column)
    return frame[column]


def _parse_float_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    """Parse one numeric column, locating the first bad cell."""
    raw = _require(frame, column).str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(np.isnan(values))
    if bad.size:
        row = int(bad[0])
        cell = raw.iloc[row]
        if cell.lower() == "nan":
            raise InputError("NaN entry", row=row, column=column)
        raise InputError(f"non-numeric cell '{cell}'", row=row, column=column)
    infinite = np.flatnonzero(np.isinf(values))
    if infinite.size:
        raise InputError("infinite entry", row=int(infinite[0]), column=column)
    return values


def _parse_bool_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = _require(frame, column).str.strip().str.lower()
    values = np.zeros(len(raw), dtype=bool)
    for row, cell in enumerate(raw):
        if cell in _TRUE:
            values[row] = True
        elif cell not in _FALSE:
            raise InputError(f"non-boolean cell '{cell}'", row=row, column=column)
    return values


def _parse_packed_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = _require(frame, column)
    rows: List[List[float]] = []
    width: Optional[int] = None
    for row, cell in enumerate(raw):
        tokens = [t.strip() for t in cell.split(PACKED_DELIMITER)]
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise InputError(
                f"ragged embedding row: {len(tokens)} values, expected {width}", row=row, column=column
            )
        try:
            parsed = [float(t) for t in tokens]
        except ValueError:
            raise InputError(f"non-numeric cell '{cell}'", row=row, column=column)
        rows.append(parsed)
    if not rows:
        raise InputError("no data rows", column=column)
    data = np.asarray(rows, dtype=np.float64)
    ArrayValidator.finite_matrix(data, columns=[column] * data.shape[1])
    return data


def _embedding_columns(frame: pd.DataFrame, schema: CsvSchema) -> List[str]:
    if schema.embedding_columns is not None:
        return list(schema.embedding_columns)
    prefix = schema.embedding_prefix or ""
    columns = [c for c in frame.columns if c.startswith(prefix)]
    if not columns:
        raise InputError(f"no embedding columns with prefix '{prefix}'")
    return columns


def load_csv(path: str, schema: CsvSchema) -> DatasetBundle:
    """Load and validate a CSV file; row order is preserved.

    Embeddings and losses are rounded to single precision so a bundle saved
    as SLB1 loads back equal.
    """
    frame = _read_frame(path)
    if len(frame) == 0:
        raise InputError(f"no data rows: {path}")

    if schema.packed_embedding_column is not None:
        data = _parse_packed_column(frame, schema.packed_embedding_column)
        data = ArrayValidator.single_precision(data, [schema.packed_embedding_column] * data.shape[1])
    else:
        columns = _embedding_columns(frame, schema)
        data = np.column_stack([_parse_float_column(frame, c) for c in columns])
        data = ArrayValidator.single_precision(data, columns)

    losses = _parse_float_column(frame, schema.loss_column)
    ArrayValidator.losses(losses, column=schema.loss_column)
    losses = ArrayValidator.single_precision(losses, [schema.loss_column])

    outcomes = OutcomeVector(
        correct=_parse_bool_column(frame, schema.correct_column) if schema.correct_column else None,
        slice_label=(
            _parse_bool_column(frame, schema.slice_label_column) if schema.slice_label_column else None
        ),
    )
    ids = list(_require(frame, schema.id_column)) if schema.id_column else None

    return DatasetBundle(
        embeddings=EmbeddingSet(data),
        losses=LossVector(losses),
        outcomes=outcomes,
        ids=ids,
    )


def load_csv_column(path: str, column: str) -> np.ndarray:
    """Raw string values of one column, e.g. a class category for per-category discovery."""
    frame = _read_frame(path)
    return _require(frame, column).to_numpy(dtype=str)
