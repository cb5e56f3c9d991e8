"""Count-level Monte Carlo: Poisson totals, multinomial outcome splits."""

from __future__ import annotations

import numpy as np

from ..measurement import CountRecord, as_setting, born_probabilities


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_counts(rho, setting, true_rate: float, duration: float, accidental_rate: float = 0.0,
                  seed=None) -> CountRecord:
    """Simulate one measurement block.

    Signal events arrive as Poisson(true_rate * duration) and are split over
    outcomes by the Born rule; accidental coincidences arrive as
    Poisson(accidental_rate * duration) and are spread uniformly.
    """
    if true_rate < 0 or accidental_rate < 0:
        raise ValueError("rates must be >= 0")
    if duration <= 0:
        raise ValueError("duration must be > 0")
    setting = as_setting(setting)
    rng = as_rng(seed)
    probs = born_probabilities(rho, setting)
    n_true = rng.poisson(true_rate * duration)
    n_acc = rng.poisson(accidental_rate * duration)
    counts = rng.multinomial(n_true, probs) + rng.multinomial(n_acc, np.full(probs.size, 1 / probs.size))
    meta = {"true_events": str(int(n_true)), "accidental_events": str(int(n_acc))}
    return CountRecord.from_array(setting, counts, duration, meta)


def merge_records(records) -> CountRecord:
    """Sum records taken under the same setting."""
    records = list(records)
    if not records:
        raise ValueError("nothing to merge")
    setting = records[0].setting
    if any(r.setting != setting for r in records):
        raise ValueError("cannot merge records with different settings")
    total = sum(r.array for r in records)
    return CountRecord.from_array(setting, total, sum(r.duration for r in records))


def expected_counts(rho, setting, total: int) -> CountRecord:
    """Noiseless record: counts rounded from total * Born probabilities."""
    setting = as_setting(setting)
    p = born_probabilities(rho, setting)
    return CountRecord.from_array(setting, np.rint(total * p).astype(np.int64))
