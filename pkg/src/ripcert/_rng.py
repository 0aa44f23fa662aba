"""Seeded, splittable random streams.

Every stream is identified by ``(seed, *path)``. The path is fed to
``numpy.random.SeedSequence`` as its ``spawn_key`` and drives a Philox
(counter-based) bit generator, so a stream's contents depend only on its
identifier and never on which worker consumes it or in what order.
"""
from __future__ import annotations

import os
import secrets
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

SEED_MASK = (1 << 64) - 1


def fresh_seed() -> int:
    """Return a new 64-bit seed (used when the caller did not supply one)."""
    return secrets.randbits(64)


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream ``(seed, *path)``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """A 64-bit child seed, for handing a sub-task its own master seed."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_workers() -> int:
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = 1) -> list[R]:
    """``[fn(x) for x in items]``, optionally on a thread pool.

    Results come back in input order, so reductions over them are
    independent of the worker count.
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
