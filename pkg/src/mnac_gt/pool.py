"""Worker-pool sizing.

Parallelism is an in-process thread pool (the heavy lifting happens in
numpy, outside the GIL); the MNAC_GT_WORKERS environment variable caps
it. Results never depend on the worker count: units of work are indexed,
use their own RNG streams and are reduced by commutative addition or in
index order.
"""

from __future__ import annotations

import os

_ENV = "MNAC_GT_WORKERS"


def resolve_workers(requested: int | None = None) -> int:
    base = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(_ENV)
    if cap is not None:
        try:
            base = min(base, int(cap))
        except ValueError:
            raise ValueError(f"{_ENV} must be an integer, got {cap!r}") from None
    return max(1, base)
