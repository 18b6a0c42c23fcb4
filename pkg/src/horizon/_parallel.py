"""Optional thread fan-out, capped by the HORIZON_THREADS env var.

Results are always merged in input order, so worker count never changes
any output.
"""

from __future__ import annotations

import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    raw = os.environ.get("HORIZON_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Apply ``fn`` to items, preserving order regardless of worker count."""
    workers = max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
