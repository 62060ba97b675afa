"""Worker-pool helpers.

Work is always split into fixed-size chunks whose boundaries do not depend
on the worker count, so numerical results are identical for any --threads
value; threads only change how chunks are scheduled.
"""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "TOPIC_COMPOSE_THREADS"


def resolve_threads(requested=None):
    """Worker count: explicit argument, else the TOPIC_COMPOSE_THREADS
    environment variable, else 1."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV)
        if raw is None:
            return 1
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    requested = int(requested)
    if requested < 1:
        raise ValueError(f"thread count must be >= 1, got {requested}")
    return requested


def chunk_spans(total, chunk):
    """[(start, end), ...] covering range(total) in chunks of `chunk`."""
    if chunk < 1:
        raise ValueError("chunk size must be >= 1")
    return [(s, min(s + chunk, total)) for s in range(0, total, chunk)]


def map_chunks(total, chunk, fn, threads):
    """Apply fn((start, end)) to every chunk, possibly from a thread pool.

    fn must write results into preallocated, disjoint slices; chunks carry
    no ordering requirement beyond that.
    """
    spans = chunk_spans(total, chunk)
    if threads <= 1 or len(spans) <= 1:
        for span in spans:
            fn(span)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # consume the iterator so worker exceptions propagate
        for _ in pool.map(fn, spans):
            pass
