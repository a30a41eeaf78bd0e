"""Deterministic sample-level fan-out.

Work is split into fixed chunks keyed by stream index before any worker
sees it, and results are gathered in chunk order, so outputs are identical
for every worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    env = os.environ.get("STADIUM_LIMITS_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return 1


def run_chunks(fn, chunks, workers: int):
    """Apply fn to each chunk, in order; fan out when workers > 1."""
    if workers <= 1 or len(chunks) <= 1:
        return [fn(ch) for ch in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))
