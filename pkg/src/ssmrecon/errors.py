"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class SsmReconError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SsmReconError):
    """Bad configuration file or command-line usage."""


class DataError(SsmReconError):
    """Malformed or inconsistent input data (files, meshes, masks)."""


class NumericalError(SsmReconError):
    """A numerical procedure failed (degenerate input, divergence, non-finite values)."""
