from .bootstrap import BootstrapError, Estimate, bootstrap_metrics
from .fitting import FitError, SinusoidFit, fit_sinusoid
from .tomography import TomographyResult, linear_inversion, mle_reconstruct
from .witness import (
    WitnessResult,
    fidelity_bound,
    ghz_witness,
    witness_from_records,
    witness_operator,
    witness_value,
)

__all__ = [
    "BootstrapError",
    "Estimate",
    "FitError",
    "SinusoidFit",
    "TomographyResult",
    "WitnessResult",
    "bootstrap_metrics",
    "fidelity_bound",
    "fit_sinusoid",
    "ghz_witness",
    "linear_inversion",
    "mle_reconstruct",
    "witness_from_records",
    "witness_operator",
    "witness_value",
]
