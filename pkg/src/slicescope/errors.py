"""Exception hierarchy with stable command-line exit codes."""

from typing import Optional


class SliceScopeError(Exception):
    """Base error; ``exit_code`` is part of the CLI contract."""

    exit_code = 3

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InputError(SliceScopeError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 1

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(SliceScopeError, ValueError):
    """Invalid or infeasible parameters."""

    exit_code = 2


class SolverError(SliceScopeError):
    """Numerical failure inside the optimizer."""

    exit_code = 3


class TrainingError(SliceScopeError):
    """Slicing-function training diverged."""

    exit_code = 3

    def __init__(self, message: str, epoch: Optional[int] = None):
        if epoch is not None:
            message = f"{message} at epoch {epoch}"
        super().__init__(message)
        self.epoch = epoch
