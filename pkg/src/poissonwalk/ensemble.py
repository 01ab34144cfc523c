"""Chunked, order-preserving execution over path ensembles.

Chunk boundaries depend only on the ensemble size and the chunk length, never
on the number of worker threads, and results are merged in chunk order. With
per-path random streams this makes every ensemble statistic independent of
``threads``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

R = TypeVar("R")

DEFAULT_CHUNK = 1024


def chunk_bounds(n_paths: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    if n_paths < 0 or chunk < 1:
        raise ValueError("need n_paths >= 0 and chunk >= 1")
    return [(s, min(s + chunk, n_paths)) for s in range(0, n_paths, chunk)]


def map_chunks(func: Callable[[int, int], R], n_paths: int, chunk: int = DEFAULT_CHUNK,
               threads: int = 1) -> list[R]:
    """Apply ``func(start, stop)`` to consecutive path ranges, results in range order."""
    bounds = chunk_bounds(n_paths, chunk)
    if threads <= 1 or len(bounds) <= 1:
        return [func(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: func(*ab), bounds))
