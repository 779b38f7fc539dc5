"""Small shared helpers."""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV_VAR = "PNRRES_THREADS"


def worker_count() -> int:
    """Worker cap from the PNRRES_THREADS environment variable (default 1)."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def run_tasks(fn, items):
    """Map fn over items, in a thread pool when PNRRES_THREADS > 1.

    Results keep the order of `items` either way, so callers are
    deterministic regardless of the worker count.
    """
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
