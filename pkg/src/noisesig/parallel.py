"""Deterministic work chunking.

Simulation pipelines split their replicate range into one chunk per
worker.  Because every replicate owns its own counter-based stream
(:mod:`noisesig.rng`), the chunk boundaries cannot change any draw:
results are bit-identical for any worker count.  On a single-CPU host
the chunks simply run in sequence; the knob bounds peak memory and
preserves the determinism contract for callers that script ``--threads``.
"""

from __future__ import annotations

import os

from .validation import check_count

__all__ = ["resolve_threads", "chunk_ranges"]

_MAX_THREADS = 256


def resolve_threads(threads: int | None) -> int:
    """Default the worker count to the CPU count; clamp to sanity."""
    if threads is None:
        return max(1, os.cpu_count() or 1)
    t = check_count(threads, "threads")
    return min(t, _MAX_THREADS)


def chunk_ranges(total: int, workers: int) -> list[tuple[int, int]]:
    """Split range(total) into <= workers contiguous (start, stop) chunks."""
    total = int(total)
    if total <= 0:
        return []
    workers = max(1, min(int(workers), total))
    size = -(-total // workers)
    return [(s, min(s + size, total)) for s in range(0, total, size)]
