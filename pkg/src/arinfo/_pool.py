import os
from concurrent.futures import ProcessPoolExecutor


def default_workers():
    return os.cpu_count() or 1


def map_ordered(fn, items, workers=1):
    """``list(map(fn, items))``, optionally spread over a process pool.

    Results come back in input order, so any reduction done by the caller is
    independent of ``workers``.
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
