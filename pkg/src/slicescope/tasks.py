"""Thread-pool execution of independent work units."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from slicescope.config import settings

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Requested thread count, capped by ``SLICESCOPE_THREADS``."""
    cap = max(1, settings.THREADS)
    if threads is None:
        return cap
    return max(1, min(threads, cap))


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """Apply ``fn`` to every item; results keep input order."""
    workers = min(resolve_threads(threads), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
