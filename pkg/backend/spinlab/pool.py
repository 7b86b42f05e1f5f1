"""Bounded worker pool with canonical-order reduction."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Iterable, List, Optional, TypeVar

from .conf import setting

T = TypeVar("T")
R = TypeVar("R")


def pool_map(fn: Callable[[T], R], jobs: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Apply fn to every job; results come back in job order whatever the width."""
    jobs = list(jobs)
    width = threads if threads is not None else int(setting("SPINLAB_THREADS"))
    width = max(1, min(width, os.cpu_count() or 1, len(jobs) or 1))
    if width == 1:
        return [fn(j) for j in jobs]
    out: List[Optional[R]] = [None] * len(jobs)
    with ThreadPoolExecutor(max_workers=width) as ex:
        futures = {ex.submit(fn, j): k for k, j in enumerate(jobs)}
        for fut in as_completed(futures):
            out[futures[fut]] = fut.result()
    return out  # type: ignore[return-value]
