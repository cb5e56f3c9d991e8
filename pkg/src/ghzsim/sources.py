"""Ideal and noisy states of the two pair sources and the cascaded triplet source."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .qcore import DensityMatrix, PureState, concurrence, fidelity, ket, purity


@dataclass(frozen=True)
class SourceConfig:
    """Physical parameters of the cascaded source and its detection chain.

    Angles are in radians, rates in events per second, the coincidence
    window in seconds. ``triplet_phase`` set to None means the relative
    triplet phase is ``phi + phi_prime``; a number overrides it.
    ``channel_efficiency`` holds one combined coupling and detection
    efficiency per photon (846 nm, 1530 nm, 1570 nm).
    """

    theta: float = math.pi / 4
    phi: float = 0.0
    theta_prime: float = math.pi / 4
    phi_prime: float = 0.0
    triplet_phase: float | None = None
    white_noise: float = 0.0
    dephasing_visibility: float = 1.0
    leak_fraction: float = 0.0
    pair_rate_1: float = 3e6
    pair_rate_2: float = 1.5e4
    triplet_rate: float = 10 / 3600
    dark_rate: float = 5.0
    channel_efficiency: tuple[float, ...] = (0.30, 0.16, 0.13)
    cascade_coupling: float = 0.30
    coincidence_window: float = 0.5e-9

    def __post_init__(self):
        object.__setattr__(self, "channel_efficiency", tuple(float(e) for e in self.channel_efficiency))
        for name in ("pair_rate_1", "pair_rate_2", "triplet_rate", "dark_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("white_noise", "dephasing_visibility", "leak_fraction", "cascade_coupling"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.channel_efficiency or any(not 0 <= e <= 1 for e in self.channel_efficiency):
            raise ValueError("channel_efficiency entries must lie in [0, 1]")
        if self.coincidence_window <= 0:
            raise ValueError("coincidence_window must be > 0")

    @property
    def Phi(self) -> float:
        """Relative phase between the |HHH> and |VVV> terms."""
        if self.triplet_phase is None:
            return self.phi + self.phi_prime
        return self.triplet_phase

    def replace(self, **changes) -> SourceConfig:
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in self.field_names()}
        d["channel_efficiency"] = list(self.channel_efficiency)
        return d


def psi_pair_state(theta: float, phi: float) -> PureState:
    """cos(theta)|HV> + exp(i phi) sin(theta)|VH>."""
    amps = np.zeros(4, dtype=complex)
    amps[1] = math.cos(theta)
    amps[2] = np.exp(1j * phi) * math.sin(theta)
    return PureState(amps)


def phi_pair_state(theta_prime: float, phi_prime: float) -> PureState:
    """cos(theta')|HH> + exp(i phi') sin(theta')|VV>."""
    amps = np.zeros(4, dtype=complex)
    amps[0] = math.cos(theta_prime)
    amps[3] = np.exp(1j * phi_prime) * math.sin(theta_prime)
    return PureState(amps)


def cascade_map(parent: str) -> PureState:
    """Two-photon state produced when a parent photon of the given
    polarization pumps the second source: H -> |VV>, V -> |HH>."""
    parent = parent.upper()
    if parent == "H":
        return ket("VV")
    if parent == "V":
        return ket("HH")
    raise ValueError(f"parent polarization must be 'H' or 'V', got {parent!r}")


def cascade(parent_amplitudes, phase: float = 0.0) -> PureState:
    """Coherently cascade a single-photon polarization state.

    ``phase`` is attached to the |HH> branch (the V parent), which is where
    the second source's own phase enters.
    """
    a = np.asarray(parent_amplitudes, dtype=complex)
    if a.shape != (2,):
        raise ValueError("parent state must be a single-qubit amplitude pair")
    out = a[0] * cascade_map("H").amplitudes + a[1] * np.exp(1j * phase) * cascade_map("V").amplitudes
    return PureState(out)


def ghz_exp_state(theta: float, Phi: float) -> PureState:
    """cos(theta)|HHH> + exp(i Phi) sin(theta)|VVV>."""
    amps = np.zeros(8, dtype=complex)
    amps[0] = math.cos(theta)
    amps[7] = np.exp(1j * Phi) * math.sin(theta)
    return PureState(amps)


def triplet_state(config: SourceConfig) -> PureState:
    return ghz_exp_state(config.theta, config.Phi)


def balance_angle(efficiency_ratio: float) -> float:
    """HWP setting theta that equalizes the two emission terms when the
    clockwise/counter-clockwise coupling efficiencies differ by ``efficiency_ratio``."""
    if efficiency_ratio <= 0:
        raise ValueError("efficiency ratio must be positive")
    return math.atan(math.sqrt(efficiency_ratio))


def _leak_index(amps: np.ndarray) -> int:
    empty = np.flatnonzero(np.abs(amps) < 1e-12)
    if empty.size == 0:
        raise ValueError("ideal state has full support; no leak component available")
    return int(empty[0])


def noisy_state(ideal: PureState, p: float = 0.0, v: float = 1.0, leak: float = 0.0) -> DensityMatrix:
    """Apply dephasing, population leak and white noise to a pure state.

    rho = (1 - p) * [(1 - leak) * D_v(|psi><psi|) + leak * |b><b|] + p * 1/d

    D_v scales every off-diagonal element in the H/V basis by ``v``; for
    GHZ-type states this only touches the |H..H><V..V| coherence. ``|b>`` is
    the first computational basis state outside the support of ``ideal``.
    """
    for name, x in (("p", p), ("v", v), ("leak", leak)):
        if not 0 <= x <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {x}")
    psi = ideal.amplitudes
    d = psi.size
    m = np.outer(psi, psi.conj())
    m = v * m + (1 - v) * np.diag(np.diag(m))
    if leak > 0:
        b = _leak_index(psi)
        m = (1 - leak) * m
        m[b, b] += leak
    m = (1 - p) * m + p * np.eye(d) / d
    return DensityMatrix(m)


def source_state(ideal: PureState, config: SourceConfig) -> DensityMatrix:
    return noisy_state(ideal, config.white_noise, config.dephasing_visibility, config.leak_fraction)


def predicted_triplet_rate(config: SourceConfig, conversion_efficiency: float) -> float:
    """Order-of-magnitude detected triplet rate.

    Emitted first-source pairs (detected pairs over the 846 nm efficiency)
    times the fiber coupling into the second source, its conversion
    probability, and the two telecom detection efficiencies.
    """
    if conversion_efficiency < 0:
        raise ValueError("conversion efficiency must be >= 0")
    eta_845, eta_1530, eta_1570 = config.channel_efficiency[:3]
    if eta_845 == 0:
        return 0.0
    return (config.pair_rate_1 / eta_845 * config.cascade_coupling
            * conversion_efficiency * eta_1530 * eta_1570)


def implied_conversion_efficiency(config: SourceConfig, detected_triplet_rate: float) -> float:
    """Conversion efficiency that makes ``predicted_triplet_rate`` equal the given rate."""
    unit = predicted_triplet_rate(config, 1.0)
    if unit == 0:
        raise ValueError("configuration predicts no triplets at any conversion efficiency")
    return detected_triplet_rate / unit


def pair_metrics(rho, target: PureState) -> tuple[float, float, float]:
    """(fidelity to target, purity, tangle)."""
    return fidelity(rho, target), purity(rho), concurrence(rho) ** 2


def calibrate_pair_noise(family: str, targets: tuple[float, float, float], free: tuple[str, ...]) -> dict:
    """Solve for noise parameters that give the requested pair metrics.

    ``family`` is ``"psi-"`` (phase around pi) or ``"phi+"`` (phase around 0);
    ``targets`` is (fidelity, purity, tangle). ``free`` names the three
    parameters to solve for among ``theta``, ``phase_error``,
    ``white_noise``, ``dephasing_visibility``, ``leak_fraction``; the rest
    take their ideal values. Returns the full parameter dict plus the
    achieved metrics.
    """
    from scipy.optimize import least_squares

    if family == "psi-":
        make, base_phase, target = psi_pair_state, math.pi, psi_pair_state(math.pi / 4, math.pi)
    elif family == "phi+":
        make, base_phase, target = phi_pair_state, 0.0, phi_pair_state(math.pi / 4, 0.0)
    else:
        raise ValueError(f"unknown pair family {family!r}")
    if len(free) != 3:
        raise ValueError("exactly three free parameters are needed for three targets")

    defaults = {"theta": math.pi / 4, "phase_error": 0.0, "white_noise": 0.0,
                "dephasing_visibility": 1.0, "leak_fraction": 0.0}
    bounds = {"theta": (0.0, math.pi / 2), "phase_error": (0.0, math.pi / 2), "white_noise": (0.0, 1.0),
              "dephasing_visibility": (0.0, 1.0), "leak_fraction": (0.0, 1.0)}
    start = {"theta": math.pi / 4 + 0.01, "phase_error": 0.1, "white_noise": 0.01,
             "dephasing_visibility": 0.97, "leak_fraction": 0.01}

    def build(x):
        params = dict(defaults)
        params.update(zip(free, x))
        ideal = make(params["theta"], base_phase + params["phase_error"])
        rho = noisy_state(ideal, params["white_noise"], params["dephasing_visibility"], params["leak_fraction"])
        return params, rho

    def resid(x):
        _, rho = build(x)
        return np.array(pair_metrics(rho, target)) - np.array(targets)

    lo = [bounds[k][0] for k in free]
    hi = [bounds[k][1] for k in free]
    sol = least_squares(resid, [start[k] for k in free], bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    params, rho = build(sol.x)
    params["metrics"] = pair_metrics(rho, target)
    params["residual"] = float(np.max(np.abs(sol.fun)))
    return params
