"""cavmem: digital twin of a linear-cavity-enhanced warm-vapour ladder memory.

Subpackages cover the atomic Zeeman structure, the cavity frequency response,
Doppler spectroscopy of the vapour, time-domain storage/retrieval dynamics,
nonlinear least-squares estimation, and a genetic-algorithm tuning loop, all
tied together by a JSON-configured CLI.
"""

__version__ = "0.1.0"

from .errors import (CavmemError, ConfigError, DomainError, NumericalError,
                     StructuralError)

__all__ = [
    "__version__", "CavmemError", "ConfigError", "DomainError",
    "NumericalError", "StructuralError",
]
