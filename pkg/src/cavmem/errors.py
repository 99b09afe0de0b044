"""Exception hierarchy shared across the toolkit."""


class CavmemError(Exception):
    """Base class for all toolkit errors."""


class DomainError(CavmemError):
    """Inputs outside the physical or contractual domain of an operation."""


class StructuralError(CavmemError):
    """Malformed data structures (dimensions, invalid specs, bad files)."""


class NumericalError(CavmemError):
    """Solver non-convergence or failed numerical sanity checks."""


class ConfigError(CavmemError):
    """Invalid experiment configuration (unknown keys, bad values)."""
