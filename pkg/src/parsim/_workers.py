"""Thread fan-out capped by the ``PARS_THREADS`` environment variable."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    raw = os.environ.get("PARS_THREADS", "").strip()
    default = min(os.cpu_count() or 1, 8)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def parallel_map(fn, items):
    """``list(map(fn, items))`` with results in input order."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
