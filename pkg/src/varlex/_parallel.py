"""Deterministic ordered map with an optional thread pool.

``VARLEX_THREADS`` caps the pool size; 0 or 1 (the default) runs serially.
Results always come back in input order, so output never depends on timing.
"""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ValidationError


def thread_count() -> int:
    raw = os.environ.get("VARLEX_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"VARLEX_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValidationError("VARLEX_THREADS must be >= 0")
    return n


def ordered_map(fn, items):
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
