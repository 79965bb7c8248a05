"""Ordered chunked execution: results never depend on the worker count."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence


def chunks(total: int, size: int) -> List[tuple]:
    """``(start, count)`` pairs covering ``range(total)``."""
    return [(lo, min(size, total - lo)) for lo in range(0, total, size)]


def map_ordered(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is preserved."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
