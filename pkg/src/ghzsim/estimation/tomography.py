"""State reconstruction from Pauli-basis count records.

``mle_reconstruct`` maximizes the multinomial log-likelihood over
rho = T^dag T / Tr(T^dag T), T lower triangular with a real diagonal
(4^n real parameters), so every iterate is a valid density matrix.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from ..measurement import CountRecord, compatible, parity_signs, projector_stack
from ..qcore import PAULI, DensityMatrix, PureState, concurrence, fidelity, purity
from .bootstrap import Estimate, bootstrap_metrics

log = logging.getLogger(__name__)


@dataclass
class TomographyResult:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    metrics: dict[str, Estimate] = field(default_factory=dict)
    history: np.ndarray = field(default=None, repr=False)


def _n_qubits(records) -> int:
    ns = {r.setting.n_photons for r in records}
    if len(ns) != 1:
        raise ValueError("records mix different photon numbers")
    return ns.pop()


def _check_complete(records, n: int) -> None:
    have = {r.setting.label for r in records}
    missing = ["".join(s) for s in itertools.product("XYZ", repeat=n) if "".join(s) not in have]
    if missing:
        raise ValueError(f"missing settings: {', '.join(missing)}")


def linear_inversion(records) -> np.ndarray:
    """Pauli-expansion estimate sum_P E_P P / 2^n (Hermitian, trace 1, maybe not PSD).

    Each E_P pools the parity counts of every record whose setting measures
    the word P.
    """
    records = list(records)
    n = _n_qubits(records)
    _check_complete(records, n)
    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    for word in itertools.product("1XYZ", repeat=n):
        word = "".join(word)
        op = PAULI[word[0]]
        for c in word[1:]:
            op = np.kron(op, PAULI[c])
        if set(word) == {"1"}:
            rho += op / d
            continue
        num = den = 0
        for r in records:
            if compatible(r.setting, word):
                counts = r.array
                num += parity_signs(r.setting, word) @ counts
                den += counts.sum()
        if den == 0:
            raise ValueError(f"no counts for Pauli word {word}")
        rho += (num / den) * op / d
    return (rho + rho.conj().T) / 2


class _LogLikelihood:
    def __init__(self, records):
        records = list(records)
        self.n = _n_qubits(records)
        self.d = 2**self.n
        stacks = [projector_stack(r.setting) for r in records]
        proj = np.concatenate(stacks)
        self.proj = proj
        # Tr(P rho) = sum_ij P_ji rho_ij
        self.proj_t = proj.transpose(0, 2, 1).reshape(len(proj), -1)
        self.counts = np.concatenate([r.array for r in records]).astype(float)
        self.total = self.counts.sum()
        if self.total <= 0:
            raise ValueError("records hold no counts")
        self.nz = self.counts > 0
        d = self.d
        self.rows, self.cols = np.tril_indices(d, -1)

    def unpack(self, x: np.ndarray) -> np.ndarray:
        d = self.d
        t = np.zeros((d, d), dtype=complex)
        t[np.arange(d), np.arange(d)] = x[:d]
        t[self.rows, self.cols] = x[d::2] + 1j * x[d + 1::2]
        return t

    def pack(self, t: np.ndarray) -> np.ndarray:
        d = self.d
        x = np.empty(d * d)
        x[:d] = np.diag(t).real
        off = t[self.rows, self.cols]
        x[d::2] = off.real
        x[d + 1::2] = off.imag
        return x

    def value_and_grad(self, x: np.ndarray):
        t = self.unpack(x)
        g = t.conj().T @ t
        tr = np.trace(g).real
        q = self.proj_t @ g.ravel()
        q = q.real
        nz = self.nz
        if np.any(q[nz] <= 0):
            return -np.inf, None
        ll = float(np.sum(self.counts[nz] * np.log(q[nz] / tr)))
        w = np.zeros_like(q)
        w[nz] = self.counts[nz] / q[nz]
        m = np.tensordot(w, self.proj, axes=1) - (self.total / tr) * np.eye(self.d)
        tm = t @ m
        grad = np.empty_like(x)
        d = self.d
        grad[:d] = 2 * np.diag(tm).real
        off = tm[self.rows, self.cols]
        grad[d::2] = 2 * off.real
        grad[d + 1::2] = 2 * off.imag
        return ll, grad

    def rho(self, x: np.ndarray) -> np.ndarray:
        t = self.unpack(x)
        g = t.conj().T @ t
        g = (g + g.conj().T) / 2
        return g / np.trace(g).real


def t_from_rho(rho: np.ndarray) -> np.ndarray:
    """Lower-triangular T with T^dag T = rho (rho must be positive definite)."""
    d = rho.shape[0]
    j = np.eye(d)[::-1]
    low = np.linalg.cholesky(j @ rho @ j)
    return j @ low.conj().T @ j


def _ascend(fn: _LogLikelihood, x0: np.ndarray, max_iter: int, tol: float):
    """BFGS ascent with Armijo backtracking; only improving steps are accepted."""
    x = x0.copy()
    ll, g = fn.value_and_grad(x)
    eye = np.eye(x.size)
    h0 = eye / fn.total
    h = h0
    fresh = True
    history = [ll]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        direction = h @ g
        slope = direction @ g
        if slope <= 0:
            if fresh:
                converged = True
                break
            h, fresh = h0, True
            continue
        step = 1.0
        for _ in range(50):
            ll_new, g_new = fn.value_and_grad(x + step * direction)
            if ll_new > ll and ll_new >= ll + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            # no acceptable step even along the scaled gradient: stationary
            if fresh:
                converged = True
                break
            h, fresh = h0, True
            continue
        s = step * direction
        y = g - g_new  # gradient difference of -ll
        gain = ll_new - ll
        x, ll, g = x + s, ll_new, g_new
        history.append(ll)
        if gain < tol:
            converged = True
            break
        sy = s @ y
        if sy > 0:
            h0 = eye * (sy / (y @ y))
            if fresh:
                h = h0
            r = 1.0 / sy
            hy = h @ y
            h = h + (r * r * (sy + y @ hy)) * np.outer(s, s) - r * (np.outer(hy, s) + np.outer(s, hy))
            fresh = False
    return x, ll, it, converged, np.array(history)


def _metrics_vector(rho: np.ndarray, target: PureState | None, n: int) -> np.ndarray:
    dm = DensityMatrix(rho, validate=False)
    out = [purity(dm)]
    if target is not None:
        out.insert(0, fidelity(dm, target))
    if n == 2:
        out.append(concurrence(dm) ** 2)
    return np.array(out)


def _metric_names(target, n):
    names = ["purity"]
    if target is not None:
        names.insert(0, "fidelity")
    if n == 2:
        names.append("tangle")
    return names


def mle_reconstruct(records, initial=None, *, target: PureState | None = None, max_iter: int = 5000,
                    tol: float = 1e-9, warm_start: str = "mixed", replicas: int = 100,
                    seed: int = 0) -> TomographyResult:
    """Maximum-likelihood density matrix from a complete set of Pauli records.

    The log-likelihood is sum_k n_k log p_k(rho) with outcome probabilities
    conditioned on each setting's total. Iteration stops when an accepted
    step improves it by less than ``tol`` or after ``max_iter`` iterations;
    ``converged`` reports which. ``initial`` (a density matrix) or
    ``warm_start="linear"`` replace the maximally mixed start.

    Metrics (fidelity to ``target`` if given, purity, and tangle for two
    qubits) get Poisson-bootstrap sigmas from ``replicas`` refits; pass
    ``replicas=0`` to skip them (sigma is then NaN).
    """
    records = list(records)
    n = _n_qubits(records)
    _check_complete(records, n)
    d = 2**n
    if initial is not None:
        start = np.asarray(getattr(initial, "matrix", initial), dtype=complex)
    elif warm_start == "linear":
        start = _project_psd(linear_inversion(records))
    elif warm_start == "mixed":
        start = np.eye(d) / d
    else:
        raise ValueError(f"unknown warm start {warm_start!r}")
    # keep full rank so every direction of T stays reachable
    start = 0.99 * start + 0.01 * np.eye(d) / d
    fn = _LogLikelihood(records)
    x0 = fn.pack(t_from_rho(start))
    x, ll, it, conv, hist = _ascend(fn, x0, max_iter, tol)
    if not conv:
        log.warning("MLE hit the iteration cap (%d) before converging", max_iter)
    rho = fn.rho(x)
    result = TomographyResult(DensityMatrix(rho), ll, it, conv, history=hist)

    names = _metric_names(target, n)
    point = _metrics_vector(rho, target, n)
    if replicas > 0:
        warm = 0.99 * rho + 0.01 * np.eye(d) / d

        def stat(sample):
            f = _LogLikelihood(sample)
            xs, *_ = _ascend(f, f.pack(t_from_rho(warm)), max_iter, tol)
            return _metrics_vector(f.rho(xs), target, n)

        _, sig = bootstrap_metrics(records, stat, replicas=replicas, seed=seed)
    else:
        sig = np.full(len(names), np.nan)
    result.metrics = {k: Estimate(float(v), float(s)) for k, v, s in zip(names, point, sig)}
    return result


def _project_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 0, None)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real
