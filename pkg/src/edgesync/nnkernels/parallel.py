"""Disjoint-write task scheduling for the model-level parallel kernels."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable


def partition(n_tasks: int, workers: int) -> list[tuple[int, int]]:
    """Split ``range(n_tasks)`` into at most ``workers`` contiguous, non-empty chunks."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    workers = min(workers, n_tasks) or 1
    base, extra = divmod(n_tasks, workers)
    chunks, start = [], 0
    for w in range(workers):
        stop = start + base + (1 if w < extra else 0)
        if stop > start:
            chunks.append((start, stop))
        start = stop
    return chunks


def run_tasks(n_tasks: int, workers: int, fn: Callable[[int, int], None]) -> None:
    """Run ``fn(start, stop)`` over every chunk and join before returning.

    ``fn`` must write only the output elements indexed by its own range.
    """
    chunks = partition(n_tasks, workers)
    if len(chunks) <= 1:
        for start, stop in chunks:
            fn(start, stop)
        return
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(fn, s, e) for s, e in chunks]
        for fut in futures:
            fut.result()
