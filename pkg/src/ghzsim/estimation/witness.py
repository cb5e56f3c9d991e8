"""GHZ entanglement witness and the fidelity bound it implies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..measurement import CountRecord, NoCountsError, parity_expectation, parity_signs
from ..qcore import Observable, pauli_word
from .bootstrap import MAX_DROP_FRACTION, BootstrapError, Estimate, replica_rng

Z_WORDS = ("1ZZ", "Z1Z", "ZZ1")


@dataclass(frozen=True)
class WitnessResult:
    e_xxx: Estimate
    e_1zz: Estimate
    e_z1z: Estimate
    e_zz1: Estimate
    w_value: Estimate
    fidelity_lower_bound: Estimate
    sigma_method: str = "quadrature"

    def to_dict(self) -> dict:
        d = {k: {"value": v.value, "sigma": v.sigma} for k, v in self._items()}
        d["sigma_method"] = self.sigma_method
        return d

    def _items(self):
        return [("e_xxx", self.e_xxx), ("e_1zz", self.e_1zz), ("e_z1z", self.e_z1z), ("e_zz1", self.e_zz1),
                ("w_value", self.w_value), ("fidelity_lower_bound", self.fidelity_lower_bound)]


def witness_operator() -> Observable:
    """3/2 * 1 - XXX - (1ZZ + Z1Z + ZZ1)/2."""
    m = 1.5 * np.eye(8) - pauli_word("XXX").matrix
    for w in Z_WORDS:
        m = m - 0.5 * pauli_word(w).matrix
    return Observable(m, "W_GHZ")


def witness_value(e_xxx: float, e_1zz: float, e_z1z: float, e_zz1: float) -> float:
    return 1.5 - e_xxx - (e_1zz + e_z1z + e_zz1) / 2


def fidelity_bound(w: float) -> float:
    """Lower bound (1 - W)/2 on the fidelity with (|HHH> + |VVV>)/sqrt(2)."""
    return (1 - w) / 2


def _as_estimate(x) -> Estimate:
    if isinstance(x, Estimate):
        return x
    if isinstance(x, (tuple, list)):
        return Estimate(float(x[0]), float(x[1]))
    return Estimate(float(x), 0.0)


def ghz_witness(e_xxx, e_1zz, e_z1z, e_zz1, *, records=None, combine: str = "quadrature",
                replicas: int = 10_000, seed: int = 0) -> WitnessResult:
    """Witness value and fidelity bound from the four expectation values.

    Inputs are ``(value, sigma)`` pairs or bare values. Sigmas of W combine
    the input sigmas in quadrature by default; ``combine="linear"`` adds
    their absolute contributions instead. When ``records`` =
    ``(xxx_record, zzz_record)`` is given, the W sigma comes from a joint
    Poisson bootstrap of the raw counts, which keeps the correlation of the
    three Z parities drawn from one record.
    """
    es = [_as_estimate(e) for e in (e_xxx, e_1zz, e_z1z, e_zz1)]
    for e in es:
        # exact expectations can overshoot by rounding
        if not -1 - 1e-9 <= e.value <= 1 + 1e-9:
            raise ValueError(f"expectation value {e.value} outside [-1, 1]")
    w = witness_value(*(e.value for e in es))
    coeffs = np.array([1.0, 0.5, 0.5, 0.5])
    sig = np.array([e.sigma for e in es])
    if records is not None:
        w_sigma = _bootstrap_w_sigma(*records, replicas=replicas, seed=seed)
        method = "bootstrap"
    elif combine == "quadrature":
        w_sigma = float(np.sqrt(np.sum((coeffs * sig) ** 2)))
        method = combine
    elif combine == "linear":
        w_sigma = float(np.sum(coeffs * sig))
        method = combine
    else:
        raise ValueError(f"unknown sigma combination {combine!r}")
    return WitnessResult(*es, Estimate(w, w_sigma), Estimate(fidelity_bound(w), w_sigma / 2), method)


def _bootstrap_w_sigma(xxx_record: CountRecord, zzz_record: CountRecord, replicas: int, seed: int) -> float:
    sx = parity_signs(xxx_record.setting, "XXX")
    sz = np.array([parity_signs(zzz_record.setting, w) for w in Z_WORDS])
    w_vals = np.empty(replicas)
    ok = np.zeros(replicas, dtype=bool)
    cx, cz = xxx_record.array.astype(float), zzz_record.array.astype(float)
    # vectorized over replicas in blocks; each block's stream is (seed, block)
    block = 1000
    for b, lo in enumerate(range(0, replicas, block)):
        m = min(block, replicas - lo)
        rng = replica_rng(seed, b)
        dx = rng.poisson(cx, size=(m, cx.size))
        dz = rng.poisson(cz, size=(m, cz.size))
        nx, nz = dx.sum(1), dz.sum(1)
        good = (nx > 0) & (nz > 0)
        ex = np.where(good, dx @ sx / np.maximum(nx, 1), 0.0)
        ez = np.where(good, (dz @ sz.T).sum(1) / np.maximum(nz, 1), 0.0)
        w_vals[lo:lo + m] = 1.5 - ex - ez / 2
        ok[lo:lo + m] = good
    if (~ok).sum() > MAX_DROP_FRACTION * replicas:
        raise BootstrapError("too many bootstrap replicas with empty records")
    return float(w_vals[ok].std(ddof=1))


def witness_from_records(xxx_record: CountRecord, zzz_record: CountRecord, replicas: int = 10_000,
                         seed: int = 0) -> WitnessResult:
    """Witness from an XXX record and one ZZZ record (Z parities by marginalization)."""
    if xxx_record.total == 0 or zzz_record.total == 0:
        raise NoCountsError("witness needs counts in both the X and Z bases")
    e_x = parity_expectation(xxx_record, "XXX", replicas=replicas, seed=seed)
    e_z = [parity_expectation(zzz_record, w, replicas=replicas, seed=seed) for w in Z_WORDS]
    return ghz_witness(e_x, *e_z, records=(xxx_record, zzz_record), replicas=replicas, seed=seed)
