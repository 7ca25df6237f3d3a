"""Logging configuration for SliceScope."""

import logging
import sys
from typing import Any, Dict, Optional

from pythonjsonlogger import jsonlogger  # type: ignore[import-untyped]

from slicescope.config import settings


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """Set up application logging.

    Records go to standard error as JSON; standard output carries data only.
    """
    logger = logging.getLogger("slicescope")
    logger.setLevel(getattr(logging, level.upper()))
    if logger.handlers:
        return logger

    formatter = jsonlogger.JsonFormatter(  # type: ignore[attr-defined]
        "%(asctime)s %(name)s %(levelname)s %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        error_handler = logging.FileHandler(log_file)
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(formatter)
        logger.addHandler(error_handler)

    return logger


# Create global logger
logger = setup_logging(settings.LOG_LEVEL, settings.LOG_FILE)


def log_graph_build(n: int, k: int, chunks: int, duration: float) -> None:
    """Log kNN graph construction."""
    logger.info(
        "kNN graph built",
        extra={"n": n, "k": k, "chunks": chunks, "duration_ms": round(duration * 1000, 2)},
    )


def log_solver_run(method: str, restart: int, objective: float, iterations: int, converged: bool) -> None:
    """Log one solver restart."""
    logger.debug(
        "Solver run",
        extra={
            "method": method,
            "restart": restart,
            "objective": objective,
            "iterations": iterations,
            "converged": converged,
        },
    )


def log_discovery_round(round_index: int, remaining: int, slice_size: int, objective: float) -> None:
    """Log a slice discovery round."""
    logger.info(
        "Slice discovered",
        extra={
            "round": round_index,
            "remaining": remaining,
            "slice_size": slice_size,
            "objective": objective,
        },
    )


def log_training(architecture: str, epochs: int, final_loss: float) -> None:
    """Log slicer training."""
    logger.info(
        "Slicer trained",
        extra={"architecture": architecture, "epochs": epochs, "final_loss": final_loss},
    )


def log_generator_gate(
    kind: str, seed: int, attempts: int, neighbor_purity: Optional[float], purity_floor: float, passed: bool
) -> None:
    """Log synthetic generator acceptance diagnostics."""
    log = logger.info if passed else logger.warning
    log(
        "Synthetic setting generated" if passed else "Synthetic setting below purity gate",
        extra={
            "kind": kind,
            "seed": seed,
            "attempts": attempts,
            "neighbor_purity": neighbor_purity,
            "purity_floor": purity_floor,
            "purity_gate_passed": passed,
        },
    )


def log_error(error: Exception, context: Optional[Dict[str, Any]] = None) -> None:
    """Log error with context."""
    logger.error(
        "Error occurred",
        extra={
            "error_type": type(error).__name__,
            "error_message": str(error),
            "context": context or {},
        },
        exc_info=True,
    )
