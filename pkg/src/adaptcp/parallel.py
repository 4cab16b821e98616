"""Deterministic fan-out of independent trials.

Trials are indexed; each derives its own seed, so results are assembled in
index order no matter which worker finishes first.  The kernels release the
GIL, so a thread pool scales on multicore hosts and degrades to a plain loop
on one.
"""

from concurrent.futures import ThreadPoolExecutor


def run_indexed(fn, n, width=1):
    """[fn(0), ..., fn(n-1)], computed with up to ``width`` threads."""
    if width <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=width) as pool:
        return list(pool.map(fn, range(n)))
