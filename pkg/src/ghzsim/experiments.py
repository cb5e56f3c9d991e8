"""Simulated versions of the source characterization runs.

Each ``run_*`` function takes an ExperimentPlan and returns plain result
objects; writing files is left to the CLI.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, resolve, source_from
from .estimation import (
    BootstrapError,
    FitError,
    SinusoidFit,
    TomographyResult,
    WitnessResult,
    fit_sinusoid,
    mle_reconstruct,
    witness_from_records,
)
from .measurement import CountRecord, NoCountsError, as_setting, parity_expectation, pauli_settings
from .qcore import expectation, pauli_word
from .simulator import (
    accidental_rate,
    find_coincidences,
    generate_streams,
    independent_streams,
    merge_records,
    reference_coincidences,
    sample_counts,
)
from .simulator.coincidence import counts_to_record
from .simulator.streams import TimestampStream, photon_groups
from .sources import (
    SourceConfig,
    ghz_exp_state,
    noisy_state,
    pair_metrics,
    phi_pair_state,
    psi_pair_state,
    source_state,
    triplet_state,
)

KINDS = ("pair_tomography", "triplet_witness", "phase_scan", "stability", "coincidence_bench", "simulate_streams")


@dataclass(frozen=True)
class DriftModel:
    """Slow drift of the triplet state: a random walk on the relative phase
    (radians per sqrt(hour)) and a linear visibility change per hour."""

    phase_walk_sigma: float = 0.0
    visibility_drift: float = 0.0
    resample_interval: float = 3600.0

    def __post_init__(self):
        if self.phase_walk_sigma < 0:
            raise ConfigError("phase_walk_sigma must be >= 0")
        if self.resample_interval <= 0:
            raise ConfigError("resample_interval must be > 0")


@dataclass(frozen=True)
class ScheduleEntry:
    setting: str
    duration: float
    phase: float | None = None


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str
    source: SourceConfig
    schedule: tuple[ScheduleEntry, ...]
    seed: int
    drift: DriftModel | None = None
    replicas: int = 100
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.schedule:
            raise ConfigError("schedule is empty")
        for e in self.schedule:
            if not e.duration > 0:
                raise ConfigError(f"duration must be > 0 (got {e.duration} for {e.setting or self.kind})")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed fixed by the master seed and the keys."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1, np.uint64)[0])


def build_plan(kind: str, values: dict) -> ExperimentPlan:
    """ExperimentPlan from a resolved flat config dict."""
    src = source_from(values)
    seed = int(values["seed"])
    replicas = int(values["replicas"])
    opts: dict = {}
    drift = None
    if kind == "pair_tomography":
        if values["pair_source"] not in ("ppktp", "ppln"):
            raise ConfigError("pair_source must be 'ppktp' or 'ppln'")
        schedule = tuple(ScheduleEntry(s.label, float(values["setting_duration"])) for s in pauli_settings(2))
        opts = {"pair_source": values["pair_source"], "target_state": values["target_state"]}
    elif kind == "triplet_witness":
        d = float(values["basis_duration"])
        schedule = (ScheduleEntry("XXX", d), ScheduleEntry("ZZZ", d))
    elif kind == "phase_scan":
        if src.triplet_phase is not None:
            raise ConfigError("phase scans vary phi; leave triplet_phase unset")
        phases = values["scan_phases"]
        if phases is None:
            n = int(values["n_phases"])
            if n < 3:
                raise ConfigError("a phase scan needs at least 3 phases")
            phases = [2 * math.pi * k / n for k in range(n)]
        schedule = tuple(ScheduleEntry("XXX", float(values["phase_duration"]), float(p)) for p in phases)
        opts = {"noiseless": bool(values["noiseless"])}
    elif kind == "stability":
        d = float(values["basis_duration"])
        cycles = int(values["cycles"])
        if cycles <= 0:
            raise ConfigError("cycles must be positive")
        downtime = float(values["downtime"])
        if downtime < 0:
            raise ConfigError("downtime must be >= 0")
        schedule = (ScheduleEntry("XXX", d), ScheduleEntry("ZZZ", d))
        drift = DriftModel(float(values["phase_walk_sigma"]), float(values["visibility_drift"]),
                           float(values["resample_interval"]))
        opts = {"cycles": cycles, "downtime": downtime}
    elif kind == "coincidence_bench":
        rates = [float(r) for r in values["bench_rates"]]
        if any(r < 0 for r in rates):
            raise ConfigError("bench_rates must be >= 0")
        schedule = (ScheduleEntry("", float(values["bench_duration"])),)
        opts = {"rates": rates, "fold": int(values["bench_fold"]), "reference_clicks": int(values["reference_clicks"])}
    elif kind == "simulate_streams":
        setting = as_setting(values["stream_setting"])
        schedule = (ScheduleEntry(setting.label, float(values["stream_duration"])),)
        opts = {"rate": values["stream_rate"], "jitter_ps": float(values["jitter_ps"])}
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    return ExperimentPlan(kind, src, schedule, seed, drift, replicas, opts)


def plan_from_preset(kind: str, preset: str | None = None, **overrides) -> ExperimentPlan:
    return build_plan(kind, resolve(preset, overrides=overrides))


def dark_accidentals(config: SourceConfig, fold: int) -> float:
    """Accidental n-fold rate from detector dark counts alone."""
    return accidental_rate([config.dark_rate] * fold, config.coincidence_window)


def _require(plan: ExperimentPlan, kind: str) -> None:
    if plan.kind != kind:
        raise ConfigError(f"plan kind is {plan.kind!r}, expected {kind!r}")


# -- phase scan ---------------------------------------------------------------


@dataclass
class PhaseScanResult:
    rows: list[tuple[float, float, float, int]]  # (phase, <XXX>, sigma, counts)
    fit: SinusoidFit | None
    fit_error: str | None = None


def weight_sigma(record: CountRecord, sigma: float) -> float:
    """Fit weight sigma; replaces a zero bootstrap sigma (all counts one
    parity) with the spread implied by half a pseudo-count per parity."""
    if sigma > 0:
        return sigma
    n = record.total
    odd = (1 - parity_expectation(record, replicas=0)[0]) / 2 * n
    p = (odd + 0.5) / (n + 1)
    return 2 * math.sqrt(p * (1 - p) / n)


def run_phase_scan(plan: ExperimentPlan) -> PhaseScanResult:
    """Scan the pump phase, estimate <XXX> at each step and fit A cos(phi + offset)."""
    _require(plan, "phase_scan")
    src = plan.source
    acc = dark_accidentals(src, 3)
    xxx = pauli_word("XXX")
    rows, points = [], []
    for i, e in enumerate(plan.schedule):
        cfg = src.replace(phi=e.phase)
        rho = noisy_state(ghz_exp_state(cfg.theta, cfg.Phi), cfg.white_noise, cfg.dephasing_visibility,
                          cfg.leak_fraction)
        if plan.options.get("noiseless"):
            val = expectation(rho, xxx)
            rows.append((e.phase, val, 0.0, 0))
            points.append((e.phase, val, 1.0))
            continue
        rec = sample_counts(rho, e.setting, src.triplet_rate, e.duration, acc, seed=derive_seed(plan.seed, 1, i))
        if rec.total == 0:
            rows.append((e.phase, math.nan, math.nan, 0))
            continue
        val, sig = parity_expectation(rec, replicas=10_000, seed=derive_seed(plan.seed, 2, i))
        rows.append((e.phase, val, sig, rec.total))
        points.append((e.phase, val, weight_sigma(rec, sig)))
    try:
        fit, err = fit_sinusoid(points), None
    except FitError as exc:
        fit, err = None, str(exc)
    return PhaseScanResult(rows, fit, err)


# -- witness -------------------------------------------------------------------


@dataclass
class WitnessRun:
    result: WitnessResult | None
    records: list[CountRecord]
    diagnostic: str | None = None


def run_witness(plan: ExperimentPlan) -> WitnessRun:
    """Simulate the XXX and ZZZ blocks and evaluate the GHZ witness."""
    _require(plan, "triplet_witness")
    labels = {e.setting for e in plan.schedule}
    if not {"XXX", "ZZZ"} <= labels:
        raise ConfigError("witness schedule must contain XXX and ZZZ blocks")
    src = plan.source
    rho = source_state(triplet_state(src), src)
    acc = dark_accidentals(src, 3)
    by_setting: dict[str, list[CountRecord]] = {}
    for i, e in enumerate(plan.schedule):
        rec = sample_counts(rho, e.setting, src.triplet_rate, e.duration, acc, seed=derive_seed(plan.seed, 1, i))
        by_setting.setdefault(e.setting, []).append(rec)
    records = [merge_records(v) for v in by_setting.values()]
    rx = next(r for r in records if r.setting.label == "XXX")
    rz = next(r for r in records if r.setting.label == "ZZZ")
    try:
        res = witness_from_records(rx, rz, replicas=10_000, seed=derive_seed(plan.seed, 2))
    except (NoCountsError, BootstrapError) as exc:
        return WitnessRun(None, records, f"witness not computed: {exc}")
    return WitnessRun(res, records)


# -- stability -----------------------------------------------------------------


@dataclass
class StabilityPoint:
    t_hours: float
    result: WitnessResult | None
    phase: float
    visibility: float


def _drifting_block(plan, rng_walk, phase, t0, duration, setting, visibility0, block_key):
    """Sample one measurement block while the phase walks; returns (record, end phase)."""
    src, drift = plan.source, plan.drift
    acc = dark_accidentals(src, 3)
    recs = []
    t = 0.0
    k = 0
    while t < duration:
        dt = min(drift.resample_interval, duration - t)
        hours = (t0 + t) / 3600
        v = min(1.0, max(0.0, visibility0 + drift.visibility_drift * hours))
        rho = noisy_state(ghz_exp_state(src.theta, phase), src.white_noise, v, src.leak_fraction)
        recs.append(sample_counts(rho, setting, src.triplet_rate, dt, acc, seed=derive_seed(plan.seed, *block_key, k)))
        phase += drift.phase_walk_sigma * math.sqrt(dt / 3600) * rng_walk.standard_normal()
        t += dt
        k += 1
    return merge_records(recs), phase


def run_stability(plan: ExperimentPlan) -> list[StabilityPoint]:
    """Repeated witness runs (X block, Z block, downtime) under drift; one point per cycle."""
    _require(plan, "stability")
    if plan.drift is None:
        raise ConfigError("stability runs need a drift model")
    src, drift = plan.source, plan.drift
    block = {e.setting: e.duration for e in plan.schedule}
    if set(block) != {"XXX", "ZZZ"}:
        raise ConfigError("stability schedule must be one XXX and one ZZZ block")
    downtime = plan.options.get("downtime", 8 * 3600.0)
    cycles = plan.options.get("cycles", 7)
    rng_walk = np.random.default_rng(derive_seed(plan.seed, 3))
    phase = src.Phi
    t0 = 0.0
    points = []
    for c in range(cycles):
        start_phase = phase
        v_start = min(1.0, max(0.0, src.dephasing_visibility + drift.visibility_drift * t0 / 3600))
        rx, phase = _drifting_block(plan, rng_walk, phase, t0, block["XXX"], "XXX", src.dephasing_visibility, (1, c, 0))
        rz, phase = _drifting_block(plan, rng_walk, phase, t0 + block["XXX"], block["ZZZ"], "ZZZ",
                                    src.dephasing_visibility, (1, c, 1))
        # phase keeps walking through the downtime
        n_idle = math.ceil(downtime / drift.resample_interval) if downtime > 0 else 0
        for k in range(n_idle):
            dt = min(drift.resample_interval, downtime - k * drift.resample_interval)
            phase += drift.phase_walk_sigma * math.sqrt(dt / 3600) * rng_walk.standard_normal()
        try:
            res = witness_from_records(rx, rz, replicas=10_000, seed=derive_seed(plan.seed, 2, c))
        except (NoCountsError, BootstrapError):
            res = None
        points.append(StabilityPoint(t0 / 3600, res, start_phase, v_start))
        t0 += block["XXX"] + block["ZZZ"] + downtime
    return points


def trend_slope(points: list[StabilityPoint]) -> tuple[float, float]:
    """Weighted least-squares slope of the fidelity bound versus time, with its sigma."""
    pts = [(p.t_hours, p.result.fidelity_lower_bound) for p in points if p.result is not None]
    t = np.array([p[0] for p in pts])
    y = np.array([p[1].value for p in pts])
    s = np.array([max(p[1].sigma, 1e-6) for p in pts])
    a = np.column_stack([np.ones_like(t), t]) / s[:, None]
    cov = np.linalg.inv(a.T @ a)
    coef = cov @ a.T @ (y / s)
    return float(coef[1]), float(math.sqrt(cov[1, 1]))


# -- pair tomography -------------------------------------------------------------

TARGETS = {
    "psi-": lambda: psi_pair_state(math.pi / 4, math.pi),
    "psi+": lambda: psi_pair_state(math.pi / 4, 0.0),
    "phi+": lambda: phi_pair_state(math.pi / 4, 0.0),
    "phi-": lambda: phi_pair_state(math.pi / 4, math.pi),
}


@dataclass
class PairTomographyRun:
    source: str
    target: str
    tomography: TomographyResult
    truth: dict[str, float]
    records: list[CountRecord]


def pair_truth(plan: ExperimentPlan):
    src = plan.source
    if plan.options["pair_source"] == "ppktp":
        ideal, rate, default_target = psi_pair_state(src.theta, src.phi), src.pair_rate_1, "psi-"
    else:
        ideal, rate, default_target = phi_pair_state(src.theta_prime, src.phi_prime), src.pair_rate_2, "phi+"
    target = plan.options.get("target_state") or default_target
    if target not in TARGETS:
        raise ConfigError(f"target_state must be one of {', '.join(TARGETS)}")
    return source_state(ideal, src), rate, target


def run_pair_tomography(plan: ExperimentPlan) -> PairTomographyRun:
    """Simulate the nine two-photon settings (36 outcome counts) and reconstruct by MLE."""
    _require(plan, "pair_tomography")
    rho, rate, target_name = pair_truth(plan)
    target = TARGETS[target_name]()
    acc = dark_accidentals(plan.source, 2)
    records = [sample_counts(rho, e.setting, rate, e.duration, acc, seed=derive_seed(plan.seed, 1, i))
               for i, e in enumerate(plan.schedule)]
    tomo = mle_reconstruct(records, target=target, replicas=plan.replicas, seed=derive_seed(plan.seed, 2))
    f, p, t = pair_metrics(rho, target)
    return PairTomographyRun(plan.options["pair_source"], target_name, tomo,
                             {"fidelity": f, "purity": p, "tangle": t}, records)


# -- coincidence bench ------------------------------------------------------------


def _head(streams: list[TimestampStream], n_clicks: int) -> list[TimestampStream]:
    """Streams truncated to (roughly) the first ``n_clicks`` merged clicks."""
    allt = np.sort(np.concatenate([s.times for s in streams])) if streams else np.empty(0, np.int64)
    if allt.size <= n_clicks:
        return streams
    cut = allt[n_clicks - 1]
    return [TimestampStream(s.channel, s.times[s.times <= cut], s.origins[s.times <= cut]) for s in streams]


def run_coincidence_bench(plan: ExperimentPlan) -> dict:
    """Time the finder on independent streams and check it against the
    analytic accidental rate and the quadratic reference."""
    _require(plan, "coincidence_bench")
    rates = plan.options["rates"]
    fold = plan.options["fold"]
    duration = plan.schedule[0].duration
    window = plan.source.coincidence_window
    streams = independent_streams(rates, duration, seed=derive_seed(plan.seed, 1))
    clicks = sum(len(s) for s in streams)
    n_groups = len(streams)
    t = time.perf_counter()
    if n_groups >= fold and clicks:
        events, _ = find_coincidences(streams, window, fold)
        n_events = len(events)
    else:
        n_events = 0
    elapsed = time.perf_counter() - t

    expected = accidental_rate(rates, window) * duration if len(rates) == fold else math.nan
    sub = _head(streams, plan.options["reference_clicks"])
    if n_groups >= fold:
        fast, _ = find_coincidences(sub, window, fold)
        ref = reference_coincidences(sub, window, fold)
        match = list(fast) == ref
        n_ref = len(ref)
    else:
        match, n_ref = True, 0
    return {
        "total_clicks": int(clicks),
        "events": int(n_events),
        "expected_accidentals": expected,
        "z_score": (n_events - expected) / math.sqrt(expected) if expected and expected > 0 else math.nan,
        "reference_clicks": int(sum(len(s) for s in sub)),
        "reference_events": int(n_ref),
        "reference_match": bool(match),
        "elapsed_seconds": elapsed,
    }


# -- stream simulation ---------------------------------------------------------


def run_simulate_streams(plan: ExperimentPlan):
    """Event-level streams for the triplet source; returns (streams, record of found coincidences)."""
    _require(plan, "simulate_streams")
    src = plan.source
    e = plan.schedule[0]
    rho = source_state(triplet_state(src), src)
    streams = generate_streams(src, rho, e.setting, e.duration, seed=derive_seed(plan.seed, 1),
                               rate=plan.options.get("rate"), jitter_ps=plan.options.get("jitter_ps", 0.0))
    setting = as_setting(e.setting)
    groups = photon_groups(range(2 * setting.n_photons))
    _, counts = find_coincidences(streams, src.coincidence_window, setting.n_photons, groups)
    return streams, counts_to_record(counts, setting, e.duration)


__all__ = [
    "DriftModel",
    "ExperimentPlan",
    "ScheduleEntry",
    "build_plan",
    "derive_seed",
    "plan_from_preset",
    "run_coincidence_bench",
    "run_pair_tomography",
    "run_phase_scan",
    "run_simulate_streams",
    "run_stability",
    "run_witness",
    "trend_slope",
]
