"""Validation of numeric inputs shared by every loader."""

from typing import Optional, Sequence

import numpy as np

from slicescope.errors import InputError


class ArrayValidator:
    """Validate arrays before they enter a bundle."""

    @staticmethod
    def finite_matrix(data: np.ndarray, columns: Optional[Sequence[str]] = None) -> None:
        """Reject NaN/Inf entries, naming the first offending cell."""
        bad = np.argwhere(~np.isfinite(data))
        if bad.size == 0:
            return
        row, col = (int(v) for v in bad[0])
        column = columns[col] if columns is not None else f"dim {col}"
        kind = "NaN entry" if np.isnan(data[row, col]) else "infinite entry"
        raise InputError(kind, row=row, column=column)

    @staticmethod
    def single_precision(values: np.ndarray, columns: Optional[Sequence[str]] = None) -> np.ndarray:
        """Round finite values to the nearest f32, held as f64, so SLB1 stores them exactly."""
        with np.errstate(over="ignore"):
            rounded = np.asarray(values, dtype=np.float64).astype(np.float32).astype(np.float64)
        overflow = np.argwhere(np.isinf(rounded))
        if overflow.size:
            index = tuple(int(v) for v in overflow[0])
            row = index[0]
            col = index[1] if len(index) > 1 else 0
            column = columns[col] if columns is not None else None
            raise InputError("value outside single-precision range", row=row, column=column)
        return rounded

    @staticmethod
    def losses(values: np.ndarray, column: Optional[str] = None) -> None:
        """Losses must be finite and nonnegative; negatives are rejected, never clamped."""
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise InputError("non-finite loss", row=int(bad[0]), column=column)
        negative = np.flatnonzero(values < 0)
        if negative.size:
            raise InputError("negative loss", row=int(negative[0]), column=column)

    @staticmethod
    def length(name: str, values: Optional[Sequence[object]], n: int) -> None:
        """Optional per-sample arrays must match the sample count."""
        if values is not None and len(values) != n:
            raise InputError(f"{name} has length {len(values)}, expected {n}")
