"""Deterministic fan-out of independent tasks over worker processes."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

_SHARED = None


def _init(shared):
    global _SHARED
    _SHARED = shared


def _run_chunk(func, items):
    return [func(_SHARED, item) for item in items]


def pmap(func, items, shared=None, workers: int = 1):
    """``[func(shared, item) for item in items]``, optionally across processes.

    Output order always follows ``items``; ``func`` must be a module-level
    function.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(shared, item) for item in items]
    workers = min(workers, len(items))
    chunks = [items[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init, initargs=(shared,)) as ex:
        parts = list(ex.map(_run_chunk, [func] * workers, chunks))
    out = [None] * len(items)
    for k, part in enumerate(parts):
        out[k::workers] = part
    return out
