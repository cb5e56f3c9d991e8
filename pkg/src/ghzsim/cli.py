"""Command-line front end.

    ghzsim SUBCOMMAND [--config PATH] [--seed U64] [--out DIR]
                      [--format json|csv|both] [--replicas N] [--preset NAME]
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import DEFAULT_PRESET, PRESETS, ConfigError, load_config_file, resolve
from .measurement import NoCountsError
from .output import RUN_INFO_KEY, write_csv, write_json
from .simulator import write_timestamps
from .simulator.streams import SIGNAL

log = logging.getLogger("ghzsim")

COMMANDS = {
    "phase-scan": "phase_scan",
    "witness": "triplet_witness",
    "stability": "stability",
    "pair-tomo": "pair_tomography",
    "coinc-bench": "coincidence_bench",
    "simulate-streams": "simulate_streams",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghzsim", description="Cascaded-SPDC GHZ source simulator and analysis runs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="flat TOML config file")
        s.add_argument("--seed", type=int, help=f"master seed (default {ex_default_seed()})")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--format", choices=("json", "csv", "both"), default="both")
        s.add_argument("--replicas", type=int, help="bootstrap replicas")
        s.add_argument("--preset", choices=sorted(PRESETS), help=f"preset (default {DEFAULT_PRESET[name]})")
    return p


def ex_default_seed() -> str:
    from .config import DEFAULT_SEED

    return hex(DEFAULT_SEED)


def _est(e):
    return {"value": e.value, "sigma": e.sigma}


class _Writer:
    def __init__(self, out: Path, fmt: str, command: str, values: dict):
        self.out = out
        self.fmt = fmt
        self.command = command
        self.values = values
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    @property
    def meta(self):
        return {"command": self.command, "seed": int(self.values["seed"]), "config": self.values}

    def json(self, name: str, result: dict, extra_info: str = ""):
        if self.fmt in ("json", "both"):
            info = f"generated_at={_dt.datetime.now(_dt.timezone.utc).isoformat()}; " \
                   f"elapsed_seconds={time.perf_counter() - self.t0:.3f}{extra_info}"
            payload = {**self.meta, "result": result, RUN_INFO_KEY: info}
            self.written.append(write_json(self.out / name, payload))

    def csv(self, name: str, header, rows):
        if self.fmt in ("csv", "both"):
            self.written.append(write_csv(self.out / name, header, rows, self.meta))


def _phase_scan(plan, w: _Writer):
    res = ex.run_phase_scan(plan)
    fit = None if res.fit is None else {
        "amplitude": res.fit.amplitude, "amplitude_sigma": res.fit.amplitude_sigma,
        "phase_offset": res.fit.phase_offset, "residual_rms": res.fit.residual_rms}
    rows = [{"phase": r[0], "e_xxx": r[1], "sigma": r[2], "counts": r[3]} for r in res.rows]
    w.csv("phase_scan.csv", ["phase", "e_xxx", "sigma", "counts"], res.rows)
    w.json("phase_scan.json", {"points": rows, "fit": fit, "fit_error": res.fit_error})
    if res.fit_error:
        log.error("sinusoid fit failed: %s", res.fit_error)
        return 1
    log.info("fitted amplitude %.4f +- %.4f", res.fit.amplitude, res.fit.amplitude_sigma)
    return 0


def _witness(plan, w: _Writer):
    run = ex.run_witness(plan)
    records = [r.to_dict() for r in run.records]
    if run.result is None:
        log.error(run.diagnostic)
        w.json("witness.json", {"witness": None, "diagnostic": run.diagnostic, "records": records})
        return 1
    res = run.result
    w.json("witness.json", {"witness": res.to_dict(), "diagnostic": None, "records": records})
    labels = {"e_xxx": "XXX", "e_1zz": "1ZZ", "e_z1z": "Z1Z", "e_zz1": "ZZ1",
              "w_value": "W_GHZ", "fidelity_lower_bound": "F_GHZ_lower_bound"}
    w.csv("witness.csv", ["measurement", "value", "sigma"],
          [(labels[k], v.value, v.sigma) for k, v in res._items()])
    log.info("W = %.3f +- %.3f, F >= %.3f", res.w_value.value, res.w_value.sigma, res.fidelity_lower_bound.value)
    return 0


def _stability(plan, w: _Writer):
    pts = ex.run_stability(plan)
    rows = []
    for p in pts:
        r = p.result
        if r is None:
            rows.append((p.t_hours, math.nan, math.nan, math.nan, math.nan, p.phase, p.visibility))
        else:
            rows.append((p.t_hours, r.fidelity_lower_bound.value, r.fidelity_lower_bound.sigma,
                         r.w_value.value, r.w_value.sigma, p.phase, p.visibility))
    header = ["t_hours", "f_bound", "f_sigma", "w_value", "w_sigma", "phase", "visibility"]
    w.csv("stability.csv", header, rows)
    fs = np.array([r[1] for r in rows if math.isfinite(r[1])])
    summary = {"mean_f_bound": float(fs.mean()) if fs.size else math.nan,
               "min_f_bound": float(fs.min()) if fs.size else math.nan}
    if fs.size >= 2:
        slope, slope_sigma = ex.trend_slope(pts)
        summary.update(slope_per_hour=slope, slope_sigma=slope_sigma)
    w.json("stability.json", {"points": [dict(zip(header, r)) for r in rows], "summary": summary})
    log.info("mean F bound %.3f, minimum %.3f", summary["mean_f_bound"], summary["min_f_bound"])
    return 0


def _pair_tomo(plan, w: _Writer):
    run = ex.run_pair_tomography(plan)
    t = run.tomography
    rho = t.rho.matrix
    w.json("pair_tomography.json", {
        "source": run.source,
        "target": run.target,
        "rho_real": rho.real.tolist(),
        "rho_imag": rho.imag.tolist(),
        "log_likelihood": t.log_likelihood,
        "iterations": t.iterations,
        "converged": t.converged,
        "metrics": {k: _est(v) for k, v in t.metrics.items()},
        "truth": run.truth,
        "records": [r.to_dict() for r in run.records],
    })
    basis = ["HH", "HV", "VH", "VV"]
    w.csv("rho_real.csv", ["row"] + basis, [[b] + list(rho.real[i]) for i, b in enumerate(basis)])
    w.csv("rho_imag.csv", ["row"] + basis, [[b] + list(rho.imag[i]) for i, b in enumerate(basis)])
    log.info("%s: %s", run.source, ", ".join(f"{k} {v.value:.4f}+-{v.sigma:.4f}" for k, v in t.metrics.items()))
    return 0 if t.converged else 1


def _coinc_bench(plan, w: _Writer):
    rep = ex.run_coincidence_bench(plan)
    elapsed = rep.pop("elapsed_seconds")
    w.json("coinc_bench.json", rep, extra_info=f"; finder_seconds={elapsed:.3f}")
    w.csv("coinc_bench.csv", list(rep), [list(rep.values())])
    log.info("%d clicks -> %d events in %.2f s; reference match: %s", rep["total_clicks"], rep["events"], elapsed,
             rep["reference_match"])
    return 0 if rep["reference_match"] else 1


def _simulate_streams(plan, w: _Writer):
    streams, record = ex.run_simulate_streams(plan)
    write_timestamps(w.out / "streams.cgts", streams)
    w.written.append(w.out / "streams.cgts")
    summary = [{"channel": s.channel, "clicks": len(s), "signal_clicks": int((s.origins == SIGNAL).sum()),
                "origin": s.origin} for s in streams]
    w.json("streams.json", {"channels": summary, "coincidences": record.to_dict()})
    w.csv("streams.csv", ["outcome", "count"], sorted(record.counts.items()))
    return 0


HANDLERS = {
    "phase_scan": _phase_scan,
    "triplet_witness": _witness,
    "stability": _stability,
    "pair_tomography": _pair_tomo,
    "coincidence_bench": _coinc_bench,
    "simulate_streams": _simulate_streams,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _parser().parse_args(argv)
    kind = COMMANDS[args.command]
    try:
        file_values = load_config_file(args.config) if args.config else None
        values = resolve(args.preset or DEFAULT_PRESET[args.command], file_values,
                         {"seed": args.seed, "replicas": args.replicas})
        plan = ex.build_plan(kind, values)
        writer = _Writer(args.out, args.format, args.command, values)
        status = HANDLERS[kind](plan, writer)
    except (ConfigError, NoCountsError) as exc:
        log.error("%s", exc)
        return 2
    for path in writer.written:
        log.info("wrote %s", path)
    return status


if __name__ == "__main__":
    sys.exit(main())
