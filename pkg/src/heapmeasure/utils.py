import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .formats import FLOAT_FORMAT

T = TypeVar("T")

ProgressCallback = Callable[[int, int], None]


def _trajectory_rng(seed: int, trajectory: int) -> np.random.Generator:
    """
    Independent PCG64 generator for one trajectory.

    The master seed is the entropy of a numpy SeedSequence and the trajectory
    index its spawn key; SeedSequence hashes both into the PCG64 state, so
    trajectories never share a stream.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(trajectory,)))
    )


def _default_jobs() -> int:
    return os.cpu_count() or 4


def _map_trajectories(
    func: Callable[[int], T],
    count: int,
    jobs: Optional[int] = None,
    progress: Optional[ProgressCallback] = None,
) -> List[T]:
    """
    Run `func(t)` for t in range(count) on a thread pool and return the
    results in trajectory order, whatever order they complete in.
    """
    results: List[Optional[T]] = [None] * count
    if count == 0:
        return []
    done = 0
    with ThreadPoolExecutor(max_workers=jobs or _default_jobs()) as exe:
        futures = {exe.submit(func, t): t for t in range(count)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
            done += 1
            if progress is not None:
                progress(done, count)
    return results  # type: ignore[return-value]


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error (0 for a single value)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def _format_float(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(value, FLOAT_FORMAT)
