"""Order-fixed reductions and the optional per-scenario worker pool."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Advisory override for per-scenario parallelism; results never depend on it.
THREADS_ENV = "PHIDRO_THREADS"


def fsum(values: Iterable[float]) -> float:
    return math.fsum(values)


def weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    """Correctly rounded sum of ``weights * values``, independent of order."""
    return math.fsum((np.asarray(weights, dtype=float) * np.asarray(values, dtype=float)).tolist())


def weighted_vector_sum(weights: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Column-wise correctly rounded sum of ``weights[i] * vectors[i]``."""
    terms = np.asarray(weights, dtype=float)[:, None] * np.asarray(vectors, dtype=float)
    return np.array([math.fsum(col) for col in terms.T.tolist()], dtype=float)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map ``fn`` over ``items``, possibly on worker threads; output keeps input order."""
    workers = thread_count()
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
