"""Weighted least-squares fit of A*cos(phase + offset) to a phase scan."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SinusoidFit:
    amplitude: float
    phase_offset: float
    residual_rms: float
    amplitude_sigma: float

    def __call__(self, phase):
        return self.amplitude * np.cos(np.asarray(phase) + self.phase_offset)


class FitError(ValueError):
    pass


def fit_sinusoid(points) -> SinusoidFit:
    """Fit ``value = A*cos(phase + offset)`` with no vertical offset.

    ``points`` is an iterable of ``(phase, value, sigma)``; ``sigma=None``
    gives unit weight. The model is linear in a = A cos(offset) and
    b = -A sin(offset), so the fit is a single weighted linear solve and the
    amplitude error follows from the parameter covariance.
    """
    pts = list(points)
    if len(pts) < 3:
        raise FitError("need at least three points")
    phase = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    sig = np.array([1.0 if p[2] is None else p[2] for p in pts], dtype=float)
    if np.any(sig <= 0) or not np.all(np.isfinite(sig)):
        raise FitError("sigmas must be positive and finite")
    design = np.column_stack([np.cos(phase), np.sin(phase)])
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] < 1e-9 * sv[0]:
        raise FitError("degenerate phase set: all phases equal modulo pi")

    w = 1 / sig
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    a, b = coef
    cov = np.linalg.inv((design * (w**2)[:, None]).T @ design)
    amp = math.hypot(a, b)
    if amp == 0:
        offset, amp_sigma = 0.0, math.sqrt(max(cov[0, 0], cov[1, 1]))
    else:
        offset = math.atan2(-b, a)
        grad = np.array([a, b]) / amp
        amp_sigma = math.sqrt(grad @ cov @ grad)
    resid = y - design @ coef
    return SinusoidFit(amp, offset, float(np.sqrt(np.mean(resid**2))), amp_sigma)
