import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """Worker count from ``VRP_OLS_THREADS`` (unset or 0 means one per CPU)."""
    raw = os.environ.get("VRP_OLS_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def ordered_map(fn, items):
    """``list(map(fn, items))``, possibly threaded; output order is input order."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
