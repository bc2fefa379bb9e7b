"""Continued-fraction spectra of the two-mode and k-photon quantum Rabi models.

The regular spectrum of each invariant sector is found as the zeros of a
continued-fraction spectral function built from a three-term recurrence, and
checked against brute-force diagonalization of the truncated sector
Hamiltonian.
"""

__version__ = "0.1.0"

from .model import Family, ModelParams, Parity, SectorLabel, classify_regime  # noqa: E402
from .spectrum import compute_spectrum, crosscheck_oracle  # noqa: E402

__all__ = [
    "Family",
    "ModelParams",
    "Parity",
    "SectorLabel",
    "classify_regime",
    "compute_spectrum",
    "crosscheck_oracle",
    "__version__",
]
