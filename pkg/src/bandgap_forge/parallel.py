"""Deterministic fork-join helper."""
from __future__ import annotations

import multiprocessing as mp
import os

_TASK = None


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        env = os.environ.get("BANDGAP_FORGE_JOBS")
        jobs = int(env) if env else 1
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    return jobs


def _call(item):
    return _TASK(item)


def parallel_map(fn, items, jobs: int | None = 1) -> list:
    """map(fn, items) over a forked pool; results keep the input order."""
    global _TASK
    items = list(items)
    jobs = min(resolve_jobs(jobs), max(len(items), 1))
    if jobs == 1:
        return [fn(x) for x in items]
    _TASK = fn
    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(jobs) as pool:
            return pool.map(_call, items, chunksize=1)
    finally:
        _TASK = None
