"""Order-preserving parallel map capped by ``GCALC_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("GCALC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def pmap(fn, items) -> list:
    """``list(map(fn, items))``, run on up to ``worker_count()`` threads.

    Results keep input order, so downstream reductions are independent of
    the worker count.
    """
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
