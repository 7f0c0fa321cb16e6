"""Deterministic random substreams and index-ordered fan-out.

Every resample or permutation draws from its own generator, derived from
``(seed, *keys)`` with :class:`numpy.random.SeedSequence`. Work items are
independent, so the results never depend on the number of jobs.
"""

import hashlib
import logging
from collections.abc import Callable
from typing import TypeVar, Union

import numpy as np
from joblib import Parallel, delayed

_log = logging.getLogger(__name__)

T = TypeVar("T")

StreamKey = Union[int, str]


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, int):
        if key < 0:
            raise ValueError("Integer stream keys must be non-negative.")
        return key
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream_rng(seed: int, *keys: StreamKey) -> np.random.Generator:
    sequence = np.random.SeedSequence(
        seed, spawn_key=tuple(_key_to_int(k) for k in keys)
    )
    return np.random.default_rng(sequence)


def run_indexed(fn: Callable[[int], T], n: int, n_jobs: int = 1) -> list[T]:
    """``[fn(0), ..., fn(n - 1)]``, optionally spread over joblib workers."""
    if n_jobs == 1 or n <= 1:
        return [fn(i) for i in range(n)]
    _log.debug("Running %d work items on %d jobs", n, n_jobs)
    return list(
        Parallel(n_jobs=n_jobs, prefer="threads")(delayed(fn)(i) for i in range(n))
    )


def resample_indices(
    rng: np.random.Generator, labels: np.ndarray, stratify: bool
) -> np.ndarray:
    """Row indices of one bootstrap resample.

    Stratified resamples draw positives and negatives separately so that the
    class counts of the original rows are preserved.
    """
    n = labels.shape[0]
    if not stratify:
        return rng.integers(0, n, size=n)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels != 1)
    parts = []
    if pos.size:
        parts.append(pos[rng.integers(0, pos.size, size=pos.size)])
    if neg.size:
        parts.append(neg[rng.integers(0, neg.size, size=neg.size)])
    return np.concatenate(parts)
