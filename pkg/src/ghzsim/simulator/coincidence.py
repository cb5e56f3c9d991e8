"""Greedy k-fold coincidence finder over merged click streams.

The coincidence window is the full width of the acceptance interval: every
member of an event lies at most ``window/2`` after the earliest member, so
two uncorrelated streams at rates R1 and R2 produce R1*R2*window accidental
pairs per second.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numba
import numpy as np

from ..measurement import CountRecord, MeasurementSetting
from .streams import PS_PER_S, TimestampStream


@dataclass(frozen=True)
class CoincidenceEvent:
    times: tuple[int, ...]
    channels: tuple[int, ...]

    @property
    def fold(self) -> int:
        return len(self.times)

    @property
    def span(self) -> int:
        return max(self.times) - min(self.times)


class CoincidenceEvents(Sequence):
    """Array-backed list of events; rows are members in time order."""

    def __init__(self, times: np.ndarray, channels: np.ndarray):
        self.times = times
        self.channels = channels

    def __len__(self):
        return self.times.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return CoincidenceEvent(tuple(int(t) for t in self.times[i]), tuple(int(c) for c in self.channels[i]))


@numba.njit(cache=True)
def _scan(times, groups, n_groups, twice_tol, fold):
    n = times.size
    consumed = np.zeros(n, dtype=np.bool_)
    taken = np.zeros(n_groups, dtype=np.bool_)
    members = np.empty(fold, dtype=np.int64)
    out = np.empty((n // fold + 1, fold), dtype=np.int64)
    n_events = 0
    for i in range(n):
        if consumed[i]:
            continue
        taken[:] = False
        taken[groups[i]] = True
        members[0] = i
        count = 1
        j = i + 1
        while j < n and count < fold and 2 * (times[j] - times[i]) <= twice_tol:
            if not consumed[j] and not taken[groups[j]]:
                taken[groups[j]] = True
                members[count] = j
                count += 1
            j += 1
        if count == fold:
            for k in range(fold):
                consumed[members[k]] = True
                out[n_events, k] = members[k]
            n_events += 1
    return out[:n_events]


def merge_streams(streams):
    """Merge streams into (times, channels, origins) ordered by (time, channel)."""
    streams = list(streams)
    for s in streams:
        t = np.asarray(s.times)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError(f"stream for channel {s.channel} is not sorted")
    if not streams:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.uint8)
    times = np.concatenate([np.asarray(s.times, dtype=np.int64) for s in streams])
    chans = np.concatenate([np.full(len(s.times), s.channel, dtype=np.int64) for s in streams])
    origins = np.concatenate([np.asarray(s.origins, dtype=np.uint8) for s in streams])
    order = np.lexsort((chans, times))
    return times[order], chans[order], origins[order]


def window_ps(window: float) -> int:
    w = int(round(window * PS_PER_S))
    if w <= 0:
        raise ValueError("window must be > 0")
    return w


def find_coincidences(streams, window: float, fold: int, groups: dict[int, int] | None = None):
    """Find k-fold coincidences by a single greedy earliest-first scan.

    Clicks are visited in (time, channel) order. An unconsumed click anchors
    an event when ``fold - 1`` further unconsumed clicks, each from a
    different channel group, lie within ``window/2`` after it; the earliest
    such clicks are taken and consumed. ``groups`` maps channel -> group
    (default: every channel its own group).

    Returns ``(events, counts)`` where ``counts`` maps the tuple of member
    channels (sorted by group) to the number of events.
    """
    streams = list(streams)
    if fold < 2:
        raise ValueError("fold must be >= 2")
    tol = window_ps(window)
    times, chans, _ = merge_streams(streams)
    if groups is None:
        groups = {s.channel: s.channel for s in streams}
    labels = sorted(set(groups.values()))
    if fold > len(labels):
        raise ValueError(f"fold {fold} exceeds the {len(labels)} channel groups")
    gindex = {g: k for k, g in enumerate(labels)}
    try:
        gmap = {c: gindex[groups[c]] for c in np.unique(chans).tolist()}
    except KeyError as exc:
        raise ValueError(f"channel {exc.args[0]} has no group") from exc
    group_arr = _vector_map(chans, gmap)

    idx = _scan(times, group_arr, len(labels), tol, fold)
    ev_times = times[idx]
    ev_chans = chans[idx]
    counts = _tally(ev_chans, group_arr[idx])
    return CoincidenceEvents(ev_times, ev_chans), counts


def _vector_map(chans, gmap):
    keys = np.array(sorted(gmap), dtype=np.int64)
    vals = np.array([gmap[k] for k in keys], dtype=np.int64)
    return vals[np.searchsorted(keys, chans)]


def _tally(ev_chans: np.ndarray, ev_groups: np.ndarray) -> dict[tuple[int, ...], int]:
    if ev_chans.shape[0] == 0:
        return {}
    order = np.argsort(ev_groups, axis=1, kind="stable")
    by_group = np.take_along_axis(ev_chans, order, axis=1)
    keys, n = np.unique(by_group, axis=0, return_counts=True)
    return {tuple(int(c) for c in k): int(m) for k, m in zip(keys, n)}


def reference_coincidences(streams, window: float, fold: int, groups: dict[int, int] | None = None):
    """Quadratic reference finder: for each anchor, test every other click.

    Slow; for checking ``find_coincidences`` on small inputs.
    """
    streams = list(streams)
    tol = window_ps(window)
    times = np.concatenate([np.asarray(s.times, dtype=np.int64) for s in streams]) if streams else np.empty(0, np.int64)
    chans = np.concatenate([np.full(len(s.times), s.channel) for s in streams]) if streams else np.empty(0, np.int64)
    if groups is None:
        groups = {s.channel: s.channel for s in streams}
    order = np.lexsort((chans, times))
    times, chans = times[order], chans[order]
    grp = np.array([groups[int(c)] for c in chans])
    rank = np.arange(times.size)
    free = np.ones(times.size, dtype=bool)
    events = []
    for i in range(times.size):
        if not free[i]:
            continue
        cand = np.flatnonzero(free & (rank > i) & (2 * (times - times[i]) <= tol) & (times >= times[i]))
        chosen, seen = [i], {grp[i]}
        for j in cand:
            if grp[j] not in seen:
                seen.add(grp[j])
                chosen.append(j)
                if len(chosen) == fold:
                    break
        if len(chosen) == fold:
            free[chosen] = False
            events.append(CoincidenceEvent(tuple(int(times[k]) for k in chosen), tuple(int(chans[k]) for k in chosen)))
    return events


def accidental_rate(singles, window: float) -> float:
    """Analytic accidental k-fold rate: product of singles rates times window^(k-1).

    Exact for two channels under the finder's full-width window convention.
    """
    singles = [float(r) for r in singles]
    if any(r < 0 for r in singles):
        raise ValueError("rates must be >= 0")
    if len(singles) < 2:
        return 0.0
    return float(np.prod(singles) * window ** (len(singles) - 1))


def counts_to_record(counts: dict[tuple[int, ...], int], setting, duration: float = 0.0) -> CountRecord:
    """Convert n-fold counts on the two-channels-per-photon layout to a CountRecord."""
    setting = setting if isinstance(setting, MeasurementSetting) else MeasurementSetting.from_label(setting)
    out = dict.fromkeys(setting.outcomes(), 0)
    for chans, n in counts.items():
        photons = [c // 2 for c in chans]
        if photons != list(setting.measured):
            continue
        out["".join("-" if c % 2 else "+" for c in chans)] += n
    return CountRecord(setting, out, duration)


def singles_rates(streams, duration: float) -> dict[int, float]:
    return {s.channel: len(s) / duration for s in streams}


def stream_from_arrays(channel: int, times, origins=None) -> TimestampStream:
    return TimestampStream(channel, np.asarray(times, dtype=np.int64), origins)
