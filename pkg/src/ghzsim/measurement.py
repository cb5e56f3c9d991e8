"""Pauli measurement settings, Born-rule outcome distributions and
parity estimates from coincidence counts.

Outcomes are strings of ``+``/``-`` over the measured (non-identity)
photons, ordered lexicographically with ``+`` first. For the Z basis ``+``
is H; for X it is D = (H + V)/sqrt(2); for Y it is R = (H + iV)/sqrt(2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .qcore import Observable, as_density

BASIS_LETTERS = ("X", "Y", "Z")
IGNORE = "1"

_EIGVECS = {
    "Z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    "X": (np.array([1, 1], dtype=complex) / math.sqrt(2), np.array([1, -1], dtype=complex) / math.sqrt(2)),
    "Y": (np.array([1, 1j], dtype=complex) / math.sqrt(2), np.array([1, -1j], dtype=complex) / math.sqrt(2)),
}


class NoCountsError(ValueError):
    """A record holds zero counts, so no expectation value exists."""


@dataclass(frozen=True)
class MeasurementSetting:
    """Per-photon basis choice; ``"1"`` marks an ignored photon."""

    bases: tuple[str, ...]

    def __post_init__(self):
        bases = tuple(str(b).upper().replace("I", IGNORE) for b in self.bases)
        if not bases:
            raise ValueError("a setting needs at least one photon")
        bad = [b for b in bases if b not in BASIS_LETTERS + (IGNORE,)]
        if bad:
            raise ValueError(f"unknown basis {bad[0]!r}")
        if all(b == IGNORE for b in bases):
            raise ValueError("a setting must measure at least one photon")
        object.__setattr__(self, "bases", bases)

    @classmethod
    def from_label(cls, label: str) -> MeasurementSetting:
        return cls(tuple(label))

    @property
    def label(self) -> str:
        return "".join(self.bases)

    @property
    def n_photons(self) -> int:
        return len(self.bases)

    @property
    def measured(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bases) if b != IGNORE)

    def outcomes(self) -> list[str]:
        return ["".join(o) for o in itertools.product("+-", repeat=len(self.measured))]

    def __str__(self):
        return self.label


def as_setting(setting) -> MeasurementSetting:
    if isinstance(setting, MeasurementSetting):
        return setting
    return MeasurementSetting.from_label(str(setting))


def pauli_settings(n_photons: int) -> list[MeasurementSetting]:
    """All 3^n full settings over X, Y, Z."""
    return [MeasurementSetting(b) for b in itertools.product(BASIS_LETTERS, repeat=n_photons)]


def _check_outcome(setting: MeasurementSetting, outcome: str) -> None:
    if len(outcome) != len(setting.measured) or set(outcome) - {"+", "-"}:
        raise ValueError(f"invalid outcome {outcome!r} for setting {setting.label}")


def outcome_projector(setting, outcome: str) -> Observable:
    """Tensor product of eigenprojectors (identity on ignored photons)."""
    setting = as_setting(setting)
    _check_outcome(setting, outcome)
    signs = iter(outcome)
    factors = []
    for b in setting.bases:
        if b == IGNORE:
            factors.append(np.eye(2, dtype=complex))
        else:
            v = _EIGVECS[b][0 if next(signs) == "+" else 1]
            factors.append(np.outer(v, v.conj()))
    return Observable(reduce(np.kron, factors), f"{setting.label}:{outcome}")


def projector_stack(setting) -> np.ndarray:
    """Array of shape (n_outcomes, d, d) with the projectors in outcome order."""
    setting = as_setting(setting)
    return np.array([outcome_projector(setting, o).matrix for o in setting.outcomes()])


def born_probabilities(rho, setting) -> np.ndarray:
    """Outcome probabilities Tr(rho P_k), in ``setting.outcomes()`` order."""
    setting = as_setting(setting)
    r = as_density(rho).matrix
    if r.shape[0] != 2**setting.n_photons:
        raise ValueError(f"state has dimension {r.shape[0]}, setting {setting.label} needs {2**setting.n_photons}")
    stack = projector_stack(setting)
    p = np.einsum("kij,ji->k", stack, r).real
    p[(p < 0) & (p >= -1e-10)] = 0.0
    if p.min() < 0:
        raise ValueError("negative outcome probability; state is not PSD")
    return p / p.sum()


def parity_signs(setting, word: str | None = None) -> np.ndarray:
    """Parity (+1/-1) of each outcome of ``setting``.

    With ``word`` (e.g. ``"1ZZ"`` on a ``"ZZZ"`` record) the parity is taken
    over the word's non-identity photons only, which must be measured in the
    matching basis.
    """
    setting = as_setting(setting)
    mask = [True] * len(setting.measured)
    if word is not None:
        word = word.upper().replace("I", IGNORE)
        if len(word) != setting.n_photons:
            raise ValueError(f"word {word} does not match setting {setting.label}")
        mask = []
        for w, b in zip(word, setting.bases):
            if w == IGNORE:
                if b != IGNORE:
                    mask.append(False)
                continue
            if w != b:
                raise ValueError(f"word {word} is not measurable from setting {setting.label}")
            mask.append(True)
    signs = []
    for o in setting.outcomes():
        s = 1
        for c, m in zip(o, mask):
            if m and c == "-":
                s = -s
        signs.append(s)
    return np.array(signs, dtype=float)


def compatible(setting, word: str) -> bool:
    try:
        parity_signs(setting, word)
    except ValueError:
        return False
    return True


@dataclass
class CountRecord:
    """Coincidence counts accumulated under one setting."""

    setting: MeasurementSetting
    counts: dict[str, int]
    duration: float = 0.0
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.setting = as_setting(self.setting)
        allowed = self.setting.outcomes()
        extra = set(self.counts) - set(allowed)
        if extra:
            raise ValueError(f"unknown outcomes {sorted(extra)} for setting {self.setting.label}")
        counts = {o: int(self.counts.get(o, 0)) for o in allowed}
        if any(c < 0 for c in counts.values()):
            raise ValueError("counts must be nonnegative")
        self.counts = counts

    @classmethod
    def from_array(cls, setting, counts, duration: float = 0.0, metadata=None) -> CountRecord:
        setting = as_setting(setting)
        counts = np.asarray(counts)
        return cls(setting, dict(zip(setting.outcomes(), (int(c) for c in counts))), duration, dict(metadata or {}))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.counts[o] for o in self.setting.outcomes()], dtype=np.int64)

    @property
    def total(self) -> int:
        return int(sum(self.counts.values()))

    def to_dict(self) -> dict:
        return {
            "setting": self.setting.label,
            "counts": dict(self.counts),
            "duration": float(self.duration),
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d: dict) -> CountRecord:
        unknown = set(d) - {"setting", "counts", "duration", "metadata"}
        if unknown:
            raise ValueError(f"unknown CountRecord keys: {sorted(unknown)}")
        return cls(MeasurementSetting.from_label(d["setting"]), dict(d["counts"]),
                   float(d.get("duration", 0.0)), {str(k): str(v) for k, v in d.get("metadata", {}).items()})


def multinomial_sigma(value: float, total: int) -> float:
    """Closed-form standard error sqrt((1 - E^2)/N) of a parity mean."""
    if total <= 0:
        raise NoCountsError("no counts")
    return math.sqrt(max(0.0, 1 - value**2) / total)


def poisson_replicas(counts: np.ndarray, replicas: int, rng: np.random.Generator) -> np.ndarray:
    """Resample each count as an independent Poisson variable with mean equal to the count."""
    return rng.poisson(np.asarray(counts, dtype=float), size=(replicas, len(counts)))


def parity_expectation(record: CountRecord, word: str | None = None, replicas: int = 10_000,
                       seed: int = 0) -> tuple[float, float]:
    """Parity mean and its Poisson Monte Carlo standard deviation.

    Each outcome count is redrawn as Poisson(n_k) in ``replicas`` seeded
    replicas; replicas with zero total are discarded.
    """
    counts = record.array
    n = counts.sum()
    if n <= 0:
        raise NoCountsError(f"record for {record.setting.label} has zero counts")
    s = parity_signs(record.setting, word)
    value = float(s @ counts / n)
    if replicas <= 0:
        return value, multinomial_sigma(value, int(n))
    draws = poisson_replicas(counts, replicas, np.random.default_rng(seed))
    tot = draws.sum(axis=1)
    ok = tot > 0
    vals = (draws[ok] @ s) / tot[ok]
    sigma = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return value, sigma
