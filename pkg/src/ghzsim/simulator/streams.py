"""Event-level simulation of detector click streams.

Each photon has two detector channels, one per outcome of its analyzer:
channel ``2*photon`` fires on ``+`` and ``2*photon + 1`` on ``-``.
Timestamps are integer picoseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..measurement import as_setting, born_probabilities
from ..sources import SourceConfig
from .sampling import as_rng

PS_PER_S = 1_000_000_000_000
SIGNAL, DARK = 0, 1


@dataclass(frozen=True)
class TimestampStream:
    channel: int
    times: np.ndarray
    origins: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.int64)
        o = np.zeros(t.size, dtype=np.uint8) if self.origins is None else np.asarray(self.origins, dtype=np.uint8)
        if o.shape != t.shape:
            raise ValueError("origins must match times")
        if t.size and (t[0] < 0 or np.any(np.diff(t) <= 0)):
            raise ValueError(f"channel {self.channel}: times must be nonnegative and strictly increasing")
        t.flags.writeable = False
        o.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "origins", o)

    @property
    def origin(self) -> str:
        kinds = set(np.unique(self.origins).tolist())
        if kinds == {DARK}:
            return "dark"
        if kinds <= {SIGNAL}:
            return "signal"
        return "mixed"

    def __len__(self):
        return self.times.size


def channel_id(photon: int, minus: bool) -> int:
    return 2 * photon + int(minus)


def photon_groups(channels) -> dict[int, int]:
    return {c: c // 2 for c in channels}


def poisson_times(rate: float, duration_ps: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted click times of a homogeneous Poisson process on [0, duration)."""
    n = rng.poisson(rate * duration_ps / PS_PER_S)
    return np.sort(rng.integers(0, duration_ps, size=n, dtype=np.int64))


def _to_stream(channel: int, times: np.ndarray, origins: np.ndarray) -> TimestampStream:
    order = np.argsort(times, kind="stable")
    times, origins = times[order], origins[order]
    # same-picosecond clicks on one channel register once
    keep = np.ones(times.size, dtype=bool)
    keep[1:] = np.diff(times) > 0
    return TimestampStream(channel, times[keep], origins[keep])


def detected_rate(config: SourceConfig, n_photons: int) -> float:
    if n_photons == 3:
        return config.triplet_rate
    if n_photons == 2:
        return config.pair_rate_1
    raise ValueError("streams are simulated for pairs or triplets")


def generate_streams(config: SourceConfig, rho, setting, duration: float, seed=None, *,
                     rate: float | None = None, efficiencies=None, jitter_ps: float = 0.0,
                     return_emissions: bool = False):
    """Simulate per-channel click streams for one measurement setting.

    Emissions form a Poisson process at ``rate / prod(efficiencies)`` so that
    the expected detected n-fold rate equals ``rate`` (default: the
    config's triplet or pair rate). Each emission gets an outcome from the
    Born rule; each photon is then kept with its channel efficiency. Dark
    counts at ``config.dark_rate`` are added on every channel, and signal
    clicks get optional Gaussian jitter.

    With ``return_emissions`` the emission times and outcome indices are
    returned as a second value.
    """
    setting = as_setting(setting)
    if setting.measured != tuple(range(setting.n_photons)):
        raise ValueError("stream simulation needs every photon measured")
    if duration <= 0:
        raise ValueError("duration must be > 0")
    n = setting.n_photons
    eff = np.array(config.channel_efficiency[:n] if efficiencies is None else efficiencies, dtype=float)
    if eff.size != n:
        raise ValueError(f"need {n} efficiencies, got {eff.size}")
    rate = detected_rate(config, n) if rate is None else float(rate)
    rng = as_rng(seed)
    duration_ps = int(round(duration * PS_PER_S))

    probs = born_probabilities(rho, setting)
    prod_eff = float(np.prod(eff))
    emission_rate = rate / prod_eff if prod_eff > 0 else 0.0
    t_emit = poisson_times(emission_rate, duration_ps, rng)
    outcome = rng.choice(probs.size, size=t_emit.size, p=probs)

    per_channel = {c: ([], []) for c in range(2 * n)}
    for photon in range(n):
        minus = (outcome >> (n - 1 - photon)) & 1
        survive = rng.random(t_emit.size) < eff[photon]
        t = t_emit
        if jitter_ps > 0:
            t = t + np.rint(rng.normal(0.0, jitter_ps, size=t.size)).astype(np.int64)
            t = np.clip(t, 0, None)
        for bit in (0, 1):
            sel = survive & (minus == bit)
            per_channel[channel_id(photon, bool(bit))][0].append(t[sel])
            per_channel[channel_id(photon, bool(bit))][1].append(np.full(sel.sum(), SIGNAL, dtype=np.uint8))

    streams = []
    for c in range(2 * n):
        dark = poisson_times(config.dark_rate, duration_ps, rng)
        times = np.concatenate(per_channel[c][0] + [dark])
        origins = np.concatenate(per_channel[c][1] + [np.full(dark.size, DARK, dtype=np.uint8)])
        streams.append(_to_stream(c, times, origins))

    if return_emissions:
        return streams, (t_emit, outcome)
    return streams


def independent_streams(rates, duration: float, seed=None) -> list[TimestampStream]:
    """Uncorrelated Poisson streams, one channel per rate (dark-labelled)."""
    rng = as_rng(seed)
    duration_ps = int(round(duration * PS_PER_S))
    out = []
    for c, r in enumerate(rates):
        t = poisson_times(r, duration_ps, rng)
        out.append(_to_stream(c, t, np.full(t.size, DARK, dtype=np.uint8)))
    return out
