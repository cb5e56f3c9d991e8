"""Poisson bootstrap over count records."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from ..measurement import CountRecord

log = logging.getLogger(__name__)

MAX_DROP_FRACTION = 0.1


class Estimate(NamedTuple):
    value: float
    sigma: float


class BootstrapError(RuntimeError):
    pass


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Random stream for one replica, fixed by (seed, index) alone."""
    return np.random.default_rng([int(seed), int(index)])


def resample_records(records, rng: np.random.Generator) -> list[CountRecord]:
    out = []
    for r in records:
        counts = rng.poisson(r.array.astype(float))
        out.append(CountRecord.from_array(r.setting, counts, r.duration, r.metadata))
    return out


def bootstrap_metrics(records, statistic, replicas: int = 200, seed: int = 0):
    """Mean and standard deviation of ``statistic`` over Poisson-resampled records.

    Every outcome count n_k is redrawn as Poisson(n_k). ``statistic`` takes
    the list of resampled records and returns a float or a 1-D array.
    Replicas whose statistic raises or is not finite are dropped; more than
    10% drops raises BootstrapError.
    """
    if replicas < 100:
        raise ValueError("at least 100 replicas are required")
    if isinstance(records, CountRecord):
        records = [records]
    records = list(records)
    values = []
    dropped = 0
    for i in range(replicas):
        sample = resample_records(records, replica_rng(seed, i))
        try:
            v = np.asarray(statistic(sample), dtype=float)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.debug("replica %d dropped: %s", i, exc)
            dropped += 1
            continue
        if not np.all(np.isfinite(v)):
            dropped += 1
            continue
        values.append(v)
    if dropped > MAX_DROP_FRACTION * replicas:
        raise BootstrapError(f"{dropped} of {replicas} bootstrap replicas failed")
    values = np.array(values)
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    if mean.ndim == 0:
        return float(mean), float(std)
    return mean, std
