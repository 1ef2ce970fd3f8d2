from concurrent.futures import ThreadPoolExecutor


def ordered_map(fn, items, threads=1):
    """``[fn(x) for x in items]``, optionally on a thread pool; order is preserved."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
