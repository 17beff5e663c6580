"""Collects one pass/fail line per acceptance criterion."""

import time
from contextlib import contextmanager

RESULTS = {}


@contextmanager
def criterion(number, title, limit=None):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        RESULTS[number] = f"FAIL  criterion {number}: {title} ({time.perf_counter() - t0:.2f}s) {exc!r:.200}"
        raise
    elapsed = time.perf_counter() - t0
    if limit is not None and elapsed >= limit:
        RESULTS[number] = f"FAIL  criterion {number}: {title} ({elapsed:.2f}s, limit {limit}s)"
        raise AssertionError(f"criterion {number} took {elapsed:.2f}s, limit {limit}s")
    RESULTS[number] = f"PASS  criterion {number}: {title} ({elapsed:.2f}s)"
