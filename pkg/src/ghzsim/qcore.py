"""Dense linear algebra for one to three polarization qubits.

Basis convention: H -> 0, V -> 1, Kronecker products ordered with the first
photon as the most significant index, so |HHH> is index 0 and |VVV> is the
last index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

MAX_QUBITS = 3
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

PAULI = {
    "1": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI["I"] = PAULI["1"]

_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "A": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "R": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "L": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def _qubits_for_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the supported maximum of {MAX_QUBITS}")
    return n


@dataclass(frozen=True)
class PureState:
    """Normalized state vector. Amplitudes are normalized on construction."""

    amplitudes: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        n = _qubits_for_dim(amps.size)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero state vector")
        object.__setattr__(self, "amplitudes", _frozen(amps / norm))
        object.__setattr__(self, "n_qubits", n)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator.

    Construction validates the invariants; pass ``validate=False`` only for
    matrices produced by code that already guarantees them.
    """

    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)
    n_qubits: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        n = _qubits_for_dim(m.shape[0])
        if self.validate:
            check_density(m)
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "n_qubits", n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order, with tiny negative residues set to 0."""
        w = np.linalg.eigvalsh(self.matrix)
        return np.where((w < 0) & (w >= -PSD_TOL), 0.0, w)


@dataclass(frozen=True)
class Observable:
    matrix: np.ndarray
    label: str = ""
    n_qubits: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"observable must be square, got shape {m.shape}")
        n = _qubits_for_dim(m.shape[0])
        if not np.allclose(m, m.conj().T, rtol=0, atol=HERMITIAN_TOL):
            raise ValueError("observable is not Hermitian")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "n_qubits", n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def check_density(m: np.ndarray) -> None:
    """Raise ValueError unless ``m`` is Hermitian, unit trace and PSD."""
    if not np.allclose(m, m.conj().T, rtol=0, atol=HERMITIAN_TOL):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1) > TRACE_TOL:
        raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    if w.min() < -PSD_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {w.min():.3g}")


def ket(label: str) -> PureState:
    """Product state from a string of H, V, D, A, R, L (e.g. ``"HHV"``)."""
    try:
        vecs = [_KETS[c] for c in label.upper()]
    except KeyError as exc:
        raise ValueError(f"unknown polarization label in {label!r}") from exc
    return PureState(reduce(np.kron, vecs))


def ghz_state() -> PureState:
    """(|HHH> + |VVV>)/sqrt(2)."""
    amps = np.zeros(8, dtype=complex)
    amps[0] = amps[7] = 1 / np.sqrt(2)
    return PureState(amps)


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    d = 2**n_qubits
    return DensityMatrix(np.eye(d) / d)


def pauli_word(label: str) -> Observable:
    """Tensor product of Pauli factors, e.g. ``"XXX"`` or ``"1ZZ"``."""
    try:
        mats = [PAULI[c] for c in label.upper()]
    except KeyError as exc:
        raise ValueError(f"unknown Pauli factor in {label!r}") from exc
    if not mats:
        raise ValueError("empty Pauli word")
    return Observable(reduce(np.kron, mats), label.upper().replace("I", "1"))


def tensor(a, b):
    """Kronecker product with ``a`` on the most significant qubits.

    Both operands must be states (PureState) or both operators
    (DensityMatrix, Observable or square arrays). The result keeps the type
    of the operands where it is well defined.
    """
    if isinstance(a, PureState) != isinstance(b, PureState):
        raise TypeError("cannot tensor a state with an operator")
    if isinstance(a, PureState):
        if a.n_qubits + b.n_qubits > MAX_QUBITS:
            raise ValueError("tensor product exceeds the supported qubit count")
        return PureState(np.kron(a.amplitudes, b.amplitudes))

    ma, mb = _matrix_of(a), _matrix_of(b)
    if ma.shape[0] * mb.shape[0] > 2**MAX_QUBITS:
        raise ValueError("tensor product exceeds the supported qubit count")
    out = np.kron(ma, mb)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(out)
    if isinstance(a, Observable) and isinstance(b, Observable):
        return Observable(out, a.label + b.label)
    return out


def _matrix_of(x) -> np.ndarray:
    if isinstance(x, (DensityMatrix, Observable)):
        return x.matrix
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("operator operand must be a square matrix")
    return m


def as_density(state) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return state.density()
    return DensityMatrix(state)


def expectation(rho, obs) -> float:
    """Tr(rho O). The imaginary residue is dropped; no clamping is applied."""
    r = as_density(rho).matrix
    o = _matrix_of(obs)
    if r.shape != o.shape:
        raise ValueError(f"dimension mismatch: state {r.shape} vs observable {o.shape}")
    val = np.trace(r @ o)
    if abs(val.imag) > 1e-9:
        raise ValueError(f"expectation has imaginary part {val.imag:.3g}; operator not Hermitian?")
    return float(val.real)


def fidelity(rho, target: PureState) -> float:
    """<psi|rho|psi> for a pure target."""
    r = as_density(rho).matrix
    psi = target.amplitudes
    if r.shape[0] != psi.size:
        raise ValueError(f"dimension mismatch: state {r.shape} vs target {psi.size}")
    return float(np.real(psi.conj() @ r @ psi))


def purity(rho) -> float:
    w = as_density(rho).eigenvalues()
    return float(np.sum(np.clip(w, 0, None) ** 2))


_YY = np.kron(PAULI["Y"], PAULI["Y"])


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state."""
    r = as_density(rho).matrix
    if r.shape != (4, 4):
        raise ValueError("concurrence is defined for two qubits only")
    # The lambdas (square roots of the eigenvalues of rho * rho_tilde) are the
    # singular values of sqrt(rho) sqrt(rho_tilde). Taking them this way avoids
    # square roots of rounding-level eigenvalues, which cost ~1e-8 on pure states.
    w, v = np.linalg.eigh((r + r.conj().T) / 2)
    w = np.where(w < 1e-13, 0.0, w)
    s = (v * np.sqrt(w)) @ v.conj().T
    lam = np.linalg.svd(s @ _YY @ s.conj() @ _YY, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def tangle(rho) -> float:
    """Squared concurrence."""
    return concurrence(rho) ** 2


def partial_trace(rho, keep) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (0-based indices)."""
    dm = as_density(rho)
    n = dm.n_qubits
    keep = sorted(set(int(k) for k in keep))
    if not keep or len(keep) == n:
        raise ValueError("keep must be a nonempty strict subset of the qubits")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"qubit index out of range for {n} qubits")
    drop = [q for q in range(n) if q not in keep]
    t = dm.matrix.reshape([2] * (2 * n))
    # trace from the highest index down so earlier axis numbers stay valid
    for q in sorted(drop, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + cur)
    d = 2 ** len(keep)
    return DensityMatrix(t.reshape(d, d))


def trace_distance(a, b) -> float:
    ma, mb = _matrix_of(a), _matrix_of(b)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(ma - mb))))


def random_pure_state(n_qubits: int, rng: np.random.Generator) -> PureState:
    d = 2**n_qubits
    return PureState(rng.normal(size=d) + 1j * rng.normal(size=d))


def random_density_matrix(n_qubits: int, rng: np.random.Generator, n_components: int | None = None) -> DensityMatrix:
    """Random mixture of random pure states with Dirichlet-like weights."""
    if n_components is None:
        n_components = int(rng.integers(1, 2**n_qubits + 1))
    weights = rng.exponential(size=n_components)
    weights /= weights.sum()
    d = 2**n_qubits
    m = np.zeros((d, d), dtype=complex)
    for w in weights:
        psi = random_pure_state(n_qubits, rng).amplitudes
        m += w * np.outer(psi, psi.conj())
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real)
