"""Worker-pool helper for embarrassingly parallel replicate loops.

Every replicate derives its RNG stream from (seed, replicate-index, attempt),
so results are identical whatever the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_threads(threads: int | None) -> int:
    if threads is not None and threads > 0:
        return threads
    env = os.environ.get("HMMFIT_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def parallel_map(fn, args_list, threads: int = 1) -> list:
    args_list = list(args_list)
    threads = min(resolve_threads(threads), len(args_list)) if args_list else 1
    if threads <= 1:
        return [fn(a) for a in args_list]
    chunk = max(1, len(args_list) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args_list, chunksize=chunk))
