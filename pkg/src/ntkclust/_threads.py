"""Worker-pool helper shared by the blocked all-pairs and k-means code.

The CLUSTER_THREADS environment variable caps the pool size.  Work items
are always merged in submission order, so results are identical for any
pool size (including 1); parallelism changes wall time only.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_ENV_VAR = "CLUSTER_THREADS"
_MAX_DEFAULT = 8


def worker_count() -> int:
    """Resolve the worker-thread cap from CLUSTER_THREADS (>= 1)."""
    raw = os.environ.get(_ENV_VAR, "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{_ENV_VAR} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{_ENV_VAR} must be >= 1, got {n}")
        return n
    return min(_MAX_DEFAULT, os.cpu_count() or 1)


def map_ordered(fn: Callable[[T], R], items: Sequence[T] | Iterable[T]) -> list[R]:
    """Apply fn to every item, preserving input order in the result list."""
    items = list(items)
    workers = min(worker_count(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
