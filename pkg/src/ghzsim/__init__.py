"""Simulation and analysis toolkit for a cascaded-downconversion source of
three-photon polarization GHZ states."""

from .qcore import (
    DensityMatrix,
    Observable,
    PureState,
    expectation,
    fidelity,
    ghz_state,
    partial_trace,
    pauli_word,
    purity,
    tangle,
    tensor,
)
from .sources import SourceConfig, ghz_exp_state, noisy_state, phi_pair_state, psi_pair_state

__version__ = "0.1.0"
