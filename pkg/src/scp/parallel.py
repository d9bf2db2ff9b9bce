"""Thread fan-out helpers; output order always follows input order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_jobs(jobs: int | None) -> int:
    """Explicit value wins; otherwise the SCP_JOBS environment variable."""
    if jobs is not None:
        return max(1, int(jobs))
    env = os.environ.get("SCP_JOBS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def map_ordered(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    """Map with an optional thread pool; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
