from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np
from joblib import Parallel, cpu_count, delayed

from core.config import LAB_PARALLEL_BACKEND, LAB_THREADS

T = TypeVar("T")
R = TypeVar("R")


def resolve_jobs(n_jobs: Optional[int]) -> int:
    """Worker count; negative values mean every core"""
    n_jobs = LAB_THREADS if n_jobs is None else int(n_jobs)
    if n_jobs < 0:
        return cpu_count()
    return max(1, n_jobs)


def ordered_map(func: Callable[[T], R], items: Iterable[T], n_jobs: Optional[int] = None,
                backend: Optional[str] = None) -> List[R]:
    """Map func over items, results in input order whatever the completion order"""
    items = list(items)
    jobs = resolve_jobs(n_jobs)
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=jobs, backend=backend or LAB_PARALLEL_BACKEND)(
        delayed(func)(item) for item in items
    )


def chunked(indices: np.ndarray, n_chunks: int) -> List[np.ndarray]:
    """Split an index range into contiguous blocks"""
    n_chunks = max(1, min(n_chunks, len(indices)))
    return [block for block in np.array_split(indices, n_chunks) if len(block)]


def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
    """Independent child generators keyed by position, not by worker"""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]
